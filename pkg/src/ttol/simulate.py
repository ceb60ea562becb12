"""Monte Carlo checks of the corner asymptotics at finite sample sizes.

Local alternatives gamma_n = delta / sqrt(n) are simulated by the
normal / chi-square composition of the t distribution; each replicate gets
its own counter-derived RNG stream so serial and parallel runs agree and
reports are byte-for-byte reproducible from (config, seed).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .asymptotics import KAPPA_T, NullPoint, bias_and_noise, estimand_by_name
from .compromise import as_rule, compromise_estimate
from .estimation import FitError, delta_switch, fit_narrow, fit_wide
from .risk import coverage_narrow_ci, t_test_power

_DEFAULT_RULE_NAMES = ("narrow", "wide", "ratio", "eb", "vague", "pre", "lim")


@dataclass(frozen=True)
class SimConfig:
    """Configuration of one simulation run; fully determines the report."""

    n: int
    delta: float = 0.0
    replicates: int = 1000
    seed: int = 0
    estimand: str = "mean"
    rules: tuple[str, ...] = _DEFAULT_RULE_NAMES
    xi0: float = 0.0
    sigma0: float = 1.0
    level: float = 0.05
    bootstrap: int = 500

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("n must be at least 4 (wide fits need 4 points)")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must be in (0, 1)")
        if self.bootstrap < 1:
            raise ValueError("bootstrap must be at least 1")
        object.__setattr__(self, "rules", tuple(as_rule(r).name for r in self.rules))

    @property
    def m(self) -> float:
        """Degrees of freedom sqrt(n)/delta of the simulated alternative."""
        return math.inf if self.delta == 0.0 else math.sqrt(self.n) / self.delta

    @property
    def gamma_n(self) -> float:
        return self.delta / math.sqrt(self.n)

    @property
    def a(self) -> float:
        return self.delta / KAPPA_T

    def to_dict(self) -> dict:
        return {
            "n": self.n, "delta": self.delta, "replicates": self.replicates,
            "seed": self.seed, "estimand": self.estimand,
            "rules": list(self.rules), "xi0": self.xi0, "sigma0": self.sigma0,
            "level": self.level, "bootstrap": self.bootstrap,
        }


@dataclass
class SimReport:
    """Aggregated simulation output; elapsed stays out of the JSON form."""

    config: dict
    per_rule: list[dict]
    corner_freq: float | None
    agreement: float | None
    coverage: float | None
    excluded: int
    seed: int
    extra: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "per_rule": self.per_rule,
            "corner_freq": self.corner_freq,
            "agreement": self.agreement,
            "coverage": self.coverage,
            "excluded": self.excluded,
            "seed": self.seed,
            "extra": self.extra,
        }
        return json.dumps(payload, indent=2) + "\n"


def _replicate_rng(seed: int, i: int) -> np.random.Generator:
    # Counter-keyed stream: replicate i gets the same draws regardless of
    # execution order, so parallel and serial runs produce identical reports.
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


def sample_local(n: int, null: NullPoint, delta: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Draw n observations from the local alternative gamma_n = delta/sqrt(n)."""
    gamma_n = delta / math.sqrt(n)
    if not gamma_n < 2.0:
        raise ValueError("delta/sqrt(n) must be below 2")
    z = rng.standard_normal(n)
    if delta == 0.0:
        return null.xi0 + null.sigma0 * z
    m = 1.0 / gamma_n
    scale = np.sqrt(m / rng.chisquare(m, n))
    return null.xi0 + null.sigma0 * z * scale


def _null_of(cfg: SimConfig) -> NullPoint:
    return NullPoint(cfg.xi0, cfg.sigma0)


def run_risk_sim(cfg: SimConfig) -> SimReport:
    """Empirical n x MSE of the compromise estimator per rule (narrow/wide refits)."""
    t0 = time.perf_counter()
    e = estimand_by_name(cfg.estimand)
    null = _null_of(cfg)
    rules = [as_rule(r) for r in cfg.rules]
    mu_true = e.eval(cfg.xi0, cfg.sigma0, cfg.gamma_n)
    sq = {r.name: [] for r in rules}
    excluded = 0
    for i in range(cfg.replicates):
        rng = _replicate_rng(cfg.seed, i)
        data = sample_local(cfg.n, null, cfg.delta, rng)
        try:
            fits = (fit_narrow(data), fit_wide(data))
        except (FitError, ValueError):
            excluded += 1
            continue
        for r in rules:
            err = compromise_estimate(data, e, r, fits=fits) - mu_true
            sq[r.name].append(cfg.n * err * err)
    per_rule = []
    for r in rules:
        v = np.asarray(sq[r.name])
        per_rule.append({
            "rule": r.name,
            "n_mse": float(v.mean()),
            "se": float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0,
        })
    return SimReport(config=cfg.to_dict(), per_rule=per_rule, corner_freq=None,
                     agreement=None, coverage=None, excluded=excluded,
                     seed=cfg.seed, elapsed=time.perf_counter() - t0)


def _positive_part_ks(values: np.ndarray, delta: float) -> float:
    """KS distance of sqrt(n) gamma_hat > 0 against the censored limit law.

    The positive part of max(C + delta, 0) has CDF
    [Phi((x - delta)/kappa) - Phi(-delta/kappa)] / [1 - Phi(-delta/kappa)].
    """
    pos = np.sort(values[values > 0])
    if pos.size == 0:
        return 0.0
    denom = 1.0 - float(ndtr(-delta / KAPPA_T))
    cdf = (ndtr((pos - delta) / KAPPA_T) - ndtr(-delta / KAPPA_T)) / denom
    k = np.arange(1, pos.size + 1)
    return float(np.max(np.maximum(k / pos.size - cdf, cdf - (k - 1) / pos.size)))


def run_corner_sim(cfg: SimConfig) -> SimReport:
    """Corner frequency of the wide fit against Phi(-delta/kappa), plus the
    switch-statistic agreement and the distribution distance of the
    positive part of sqrt(n) gamma_hat."""
    t0 = time.perf_counter()
    null = _null_of(cfg)
    root_n = math.sqrt(cfg.n)
    sn_gamma = []
    agree = 0
    excluded = 0
    for i in range(cfg.replicates):
        rng = _replicate_rng(cfg.seed, i)
        data = sample_local(cfg.n, null, cfg.delta, rng)
        try:
            narrow = fit_narrow(data)
            wide = fit_wide(data)
        except (FitError, ValueError):
            excluded += 1
            continue
        sn_gamma.append(root_n * wide.params.gamma)
        dn = delta_switch(data, narrow.params.xi, narrow.params.sigma)
        agree += (dn > 0) == (not wide.at_corner)
    sn_gamma = np.asarray(sn_gamma)
    kept = sn_gamma.size
    corner_freq = float(np.mean(sn_gamma == 0.0))
    report = SimReport(
        config=cfg.to_dict(), per_rule=[], corner_freq=corner_freq,
        agreement=agree / kept if kept else None, coverage=None,
        excluded=excluded, seed=cfg.seed, elapsed=time.perf_counter() - t0)
    report.extra = {
        "predicted_corner_freq": float(ndtr(-cfg.delta / KAPPA_T)),
        "ks_positive_part": _positive_part_ks(sn_gamma, cfg.delta),
        "mean_sqrt_n_gamma": float(sn_gamma.mean()) if kept else None,
    }
    return report


def run_coverage_sim(cfg: SimConfig) -> SimReport:
    """Coverage of the narrow interval mu_hat +/- z tau0_hat / sqrt(n)."""
    t0 = time.perf_counter()
    e = estimand_by_name(cfg.estimand)
    null = _null_of(cfg)
    z = float(ndtri(1.0 - cfg.level))
    mu_true = e.eval(cfg.xi0, cfg.sigma0, cfg.gamma_n)
    covered = 0
    kept = 0
    excluded = 0
    for i in range(cfg.replicates):
        rng = _replicate_rng(cfg.seed, i)
        data = sample_local(cfg.n, null, cfg.delta, rng)
        try:
            narrow = fit_narrow(data)
        except ValueError:
            excluded += 1
            continue
        mu_hat = e.eval(narrow.params.xi, narrow.params.sigma, 0.0)
        _, tau0_hat = bias_and_noise(e, NullPoint(narrow.params.xi, narrow.params.sigma))
        half = z * tau0_hat / math.sqrt(cfg.n)
        covered += abs(mu_hat - mu_true) <= half
        kept += 1
    b, tau0 = bias_and_noise(e, null)
    report = SimReport(
        config=cfg.to_dict(), per_rule=[], corner_freq=None, agreement=None,
        coverage=covered / kept if kept else None, excluded=excluded,
        seed=cfg.seed, elapsed=time.perf_counter() - t0)
    report.extra = {
        "predicted_coverage": coverage_narrow_ci(b, cfg.delta, tau0, z),
        "z_level": z,
    }
    return report


def run_power_sim(cfg: SimConfig) -> SimReport:
    """Rejection rate of the one-sided corner test T_n > z_{1-level}."""
    t0 = time.perf_counter()
    null = _null_of(cfg)
    z = float(ndtri(1.0 - cfg.level))
    factor = math.sqrt(1.5 * cfg.n)
    rejected = 0
    kept = 0
    excluded = 0
    for i in range(cfg.replicates):
        rng = _replicate_rng(cfg.seed, i)
        data = sample_local(cfg.n, null, cfg.delta, rng)
        try:
            wide = fit_wide(data)
        except (FitError, ValueError):
            excluded += 1
            continue
        rejected += factor * wide.params.gamma > z
        kept += 1
    report = SimReport(
        config=cfg.to_dict(), per_rule=[], corner_freq=None, agreement=None,
        coverage=None, excluded=excluded, seed=cfg.seed,
        elapsed=time.perf_counter() - t0)
    report.extra = {
        "rejection": rejected / kept if kept else None,
        "predicted_power": t_test_power(cfg.a, cfg.level),
        "z_level": z,
    }
    return report


def quantile_statistic_D(data, xi_hat: float, sigma_hat: float) -> float:
    """Largest scaled gap between trimmed order statistics and normal quantiles.

    D_n = max sqrt(n+2) |Y_(i) - xi_hat - sigma_hat Phi^-1(i/(n+1))| over the
    central range 0.025 <= i/(n+1) <= 0.975.
    """
    y = np.sort(np.asarray(data, dtype=float).ravel())
    n = y.size
    if n < 40:
        raise ValueError("need at least 40 observations for the trimmed range")
    i = np.arange(1, n + 1)
    frac = i / (n + 1.0)
    keep = (frac >= 0.025) & (frac <= 0.975)
    gaps = np.abs(y[keep] - xi_hat - sigma_hat * ndtri(frac[keep]))
    return float(math.sqrt(n + 2.0) * gaps.max())


def quantile_test_pvalue(data, bootstrap: int = 500,
                         rng: np.random.Generator | None = None) -> tuple[float, float]:
    """(D_n, p-value) for normality, by parametric bootstrap under the fitted normal."""
    if rng is None:
        rng = np.random.default_rng(0)
    y = np.asarray(data, dtype=float).ravel()
    narrow = fit_narrow(y)
    xi_hat, sigma_hat = narrow.params.xi, narrow.params.sigma
    d_obs = quantile_statistic_D(y, xi_hat, sigma_hat)
    n = y.size
    frac = np.arange(1, n + 1) / (n + 1.0)
    keep = (frac >= 0.025) & (frac <= 0.975)
    q = ndtri(frac[keep])
    boot = xi_hat + sigma_hat * rng.standard_normal((bootstrap, n))
    boot.sort(axis=1)
    mu = boot.mean(axis=1, keepdims=True)
    sd = np.sqrt(np.mean((boot - mu) ** 2, axis=1, keepdims=True))
    gaps = np.abs(boot[:, keep] - mu - sd * q)
    d_boot = math.sqrt(n + 2.0) * gaps.max(axis=1)
    pvalue = (1.0 + float(np.sum(d_boot >= d_obs))) / (bootstrap + 1.0)
    return d_obs, pvalue


def run_quantile_test_sim(cfg: SimConfig) -> SimReport:
    """Rejection rate of the bootstrap D_n normality test under the alternative."""
    t0 = time.perf_counter()
    null = _null_of(cfg)
    rejected = 0
    kept = 0
    excluded = 0
    for i in range(cfg.replicates):
        rng = _replicate_rng(cfg.seed, i)
        data = sample_local(cfg.n, null, cfg.delta, rng)
        try:
            _, pvalue = quantile_test_pvalue(data, bootstrap=cfg.bootstrap, rng=rng)
        except ValueError:
            excluded += 1
            continue
        rejected += pvalue <= cfg.level
        kept += 1
    report = SimReport(
        config=cfg.to_dict(), per_rule=[], corner_freq=None, agreement=None,
        coverage=None, excluded=excluded, seed=cfg.seed,
        elapsed=time.perf_counter() - t0)
    report.extra = {"rejection": rejected / kept if kept else None}
    return report

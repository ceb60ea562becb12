"""Local asymptotics at the normal corner of the wide model.

Scores and information for (xi, sigma, gamma) at gamma = 0, estimand
derivative machinery yielding the bias rate b and baseline noise tau0, and
samplers for the limiting distribution of compromise estimators under
gamma_n = delta / sqrt(n) alternatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .densities import (DEFAULT_QUASI_T_CUTOFF, _log_norm_const, penalty_R,
                        t_cdf, t_quantile)

# kappa^2 = (J_wide^-1)[gamma, gamma] = 2/3 for the t widening.
KAPPA_T = math.sqrt(2.0 / 3.0)

_PHI0 = 1.0 / math.sqrt(2.0 * math.pi)


def _phi(z):
    return np.exp(-0.5 * np.asarray(z, dtype=float) ** 2) * _PHI0


@dataclass(frozen=True, eq=False)
class NullPoint:
    """Parameter point (xi0, sigma0) at gamma = 0; regression uses (beta0, D)."""

    xi0: float = 0.0
    sigma0: float = 1.0
    beta0: np.ndarray | None = None
    D: np.ndarray | None = None

    def __post_init__(self):
        if not (math.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ValueError("sigma0 must be positive and finite")
        if (self.beta0 is None) != (self.D is None):
            raise ValueError("regression null needs both beta0 and D")
        if self.beta0 is not None:
            beta0 = np.atleast_1d(np.asarray(self.beta0, dtype=float))
            D = np.asarray(self.D, dtype=float)
            if D.shape != (beta0.size, beta0.size):
                raise ValueError("D must be p x p matching beta0")
            try:
                np.linalg.cholesky(D)
            except np.linalg.LinAlgError:
                raise ValueError("D must be positive definite")
            object.__setattr__(self, "beta0", beta0)
            object.__setattr__(self, "D", D)

    @property
    def is_regression(self) -> bool:
        return self.beta0 is not None


@dataclass(frozen=True, eq=False)
class EstimandDerivatives:
    """Partials of the estimand at the null; d_xi is a vector for regression."""

    d_xi: float | np.ndarray
    d_sigma: float
    d_gamma: float

    @property
    def d_beta(self):
        return self.d_xi


@dataclass(frozen=True, eq=False)
class Estimand:
    """A focus parameter mu(xi, sigma, gamma), gamma >= 0.

    fn evaluates mu; deriv, when given, returns analytic partials at a null
    point. Without deriv the partials are finite differences: central steps
    1e-6 in xi and sigma, one-sided step 1e-5 in gamma (a boundary) with one
    Richardson refinement.
    """

    name: str
    fn: Callable[..., float]
    deriv: Callable[[NullPoint], EstimandDerivatives] | None = None

    def eval(self, xi, sigma, gamma) -> float:
        return float(self.fn(xi, sigma, gamma))

    def derivatives(self, null: NullPoint) -> EstimandDerivatives:
        d = self.deriv(null) if self.deriv is not None else _fd_derivatives(self.fn, null)
        flat = np.ravel(np.asarray(d.d_xi, dtype=float)).tolist() + [d.d_sigma, d.d_gamma]
        if not all(math.isfinite(v) for v in flat):
            raise ValueError(f"non-finite derivative for estimand {self.name!r}")
        return d


def _fd_derivatives(fn, null: NullPoint) -> EstimandDerivatives:
    h_loc, h_gam = 1e-6, 1e-5
    if null.is_regression:
        beta0, s0 = null.beta0, null.sigma0
        d_beta = np.empty(beta0.size)
        for i in range(beta0.size):
            e = np.zeros(beta0.size)
            e[i] = h_loc
            d_beta[i] = (fn(beta0 + e, s0, 0.0) - fn(beta0 - e, s0, 0.0)) / (2 * h_loc)
        loc0, d_loc = beta0, d_beta
    else:
        loc0, s0 = null.xi0, null.sigma0
        d_loc = (fn(loc0 + h_loc, s0, 0.0) - fn(loc0 - h_loc, s0, 0.0)) / (2 * h_loc)
    d_sigma = (fn(loc0, s0 + h_loc, 0.0) - fn(loc0, s0 - h_loc, 0.0)) / (2 * h_loc)
    f0 = fn(loc0, s0, 0.0)
    d1 = (fn(loc0, s0, h_gam) - f0) / h_gam
    d2 = (fn(loc0, s0, h_gam / 2) - f0) / (h_gam / 2)
    return EstimandDerivatives(d_xi=d_loc, d_sigma=float(d_sigma),
                               d_gamma=float(2 * d2 - d1))


def score_at_null(z, sigma0: float):
    """Scores (U, V, W) of the wide model at (xi0, sigma0, gamma=0)."""
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    z = np.asarray(z, dtype=float)
    U = z / sigma0
    V = (z * z - 1.0) / sigma0
    W = penalty_R(z)
    if z.ndim == 0:
        return float(U), float(V), float(W)
    return U, V, np.asarray(W)


def info_wide(sigma0: float) -> np.ndarray:
    """Wide-model information matrix at the null, parameters (xi, sigma, gamma)."""
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    s2 = sigma0 * sigma0
    return np.array([[1.0 / s2, 0.0, 0.0],
                     [0.0, 2.0 / s2, 2.0 / sigma0],
                     [0.0, 2.0 / sigma0, 3.5]])


def info_wide_inv(sigma0: float) -> np.ndarray:
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    s2 = sigma0 * sigma0
    return np.array([[s2, 0.0, 0.0],
                     [0.0, 7.0 / 6.0 * s2, -2.0 / 3.0 * sigma0],
                     [0.0, -2.0 / 3.0 * sigma0, 2.0 / 3.0]])


def info_wide_regression(sigma0: float, D: np.ndarray) -> np.ndarray:
    """Information for (beta, sigma, gamma): upper block D/sigma0^2."""
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    D = np.asarray(D, dtype=float)
    p = D.shape[0]
    J = np.zeros((p + 2, p + 2))
    J[:p, :p] = D / sigma0 ** 2
    J[p:, p:] = np.array([[2.0 / sigma0 ** 2, 2.0 / sigma0], [2.0 / sigma0, 3.5]])
    return J


def info_wide_regression_inv(sigma0: float, D: np.ndarray) -> np.ndarray:
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    D = np.asarray(D, dtype=float)
    p = D.shape[0]
    Jinv = np.zeros((p + 2, p + 2))
    Jinv[:p, :p] = np.linalg.inv(D) * sigma0 ** 2
    Jinv[p:, p:] = np.array([[7.0 / 6.0 * sigma0 ** 2, -2.0 / 3.0 * sigma0],
                             [-2.0 / 3.0 * sigma0, 2.0 / 3.0]])
    return Jinv


@dataclass(frozen=True)
class LocalModel:
    """Local alternative gamma_n = delta / sqrt(n) around a null point."""

    null: NullPoint
    delta: float
    n: int
    kappa: float = KAPPA_T

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @property
    def a(self) -> float:
        return self.delta / self.kappa

    @property
    def gamma_n(self) -> float:
        return self.delta / math.sqrt(self.n)


def bias_and_noise(e: Estimand, null: NullPoint) -> tuple[float, float]:
    """Bias rate b = sigma0 d_sigma - d_gamma and baseline noise tau0."""
    d = e.derivatives(null)
    s0 = null.sigma0
    b = s0 * d.d_sigma - d.d_gamma
    if null.is_regression:
        dx = np.atleast_1d(np.asarray(d.d_xi, dtype=float))
        quad = float(dx @ np.linalg.solve(null.D, dx))
    else:
        quad = float(d.d_xi) ** 2
    tau0 = s0 * math.sqrt(quad + 0.5 * d.d_sigma ** 2)
    return b, tau0


def phi_W_integral(t):
    """Closed form of the partial expectation integral of phi(z) W(z) up to t.

    Equals -t (t^2 + 1) phi(t) / 4; drives the gamma-derivative of quantiles
    and tail probabilities.
    """
    t = np.asarray(t, dtype=float)
    out = -0.25 * t * (t * t + 1.0) * _phi(t)
    return float(out) if out.ndim == 0 else out


def mean_estimand() -> Estimand:
    return Estimand(
        name="mean",
        fn=lambda xi, sigma, gamma: xi,
        deriv=lambda null: EstimandDerivatives(1.0, 0.0, 0.0),
    )


def sd_estimand() -> Estimand:
    def fn(xi, sigma, gamma):
        return sigma / math.sqrt(1.0 - 2.0 * gamma) if gamma < 0.5 else math.inf

    return Estimand(
        name="sd",
        fn=fn,
        deriv=lambda null: EstimandDerivatives(0.0, 1.0, null.sigma0),
    )


def _mean_abs_z(gamma: float) -> float:
    # E|Z| = 2 c(gamma) / (1 - gamma); c(0+) expands as phi(0)(1 - gamma/4).
    if gamma >= 1.0:
        return math.inf
    c = _PHI0 * (1.0 - 0.25 * gamma) if gamma < 1e-4 else math.exp(_log_norm_const(gamma))
    return 2.0 * c / (1.0 - gamma)


def mad_estimand() -> Estimand:
    """Mean absolute deviation sigma E|Z|; b = sigma0 phi(0)/2."""
    return Estimand(
        name="mad",
        fn=lambda xi, sigma, gamma: sigma * _mean_abs_z(gamma),
        deriv=lambda null: EstimandDerivatives(0.0, 2.0 * _PHI0, 1.5 * _PHI0 * null.sigma0),
    )


def quantile_estimand(p: float) -> Estimand:
    """p-th quantile xi + sigma G^-1(p, 1/gamma); bias factor z_p (3 - z_p^2)/4."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level p must be in (0, 1)")
    zp = float(ndtri(p))

    def fn(xi, sigma, gamma):
        q = zp if gamma == 0.0 else float(t_quantile(p, 1.0 / gamma))
        return xi + sigma * q

    def deriv(null):
        d_gamma = -null.sigma0 * phi_W_integral(zp) / float(_phi(zp))
        return EstimandDerivatives(1.0, zp, d_gamma)

    return Estimand(name=f"quantile:{p:g}", fn=fn, deriv=deriv)


def probability_estimand(y: float) -> Estimand:
    """Tail probability P(Y <= y) = G((y - xi)/sigma, 1/gamma)."""
    if not math.isfinite(y):
        raise ValueError("threshold y must be finite")

    def fn(xi, sigma, gamma):
        z = (y - xi) / sigma
        return float(ndtr(z)) if gamma == 0.0 else float(t_cdf(z, 1.0 / gamma))

    def deriv(null):
        z0 = (y - null.xi0) / null.sigma0
        pz = float(_phi(z0))
        return EstimandDerivatives(-pz / null.sigma0, -pz * z0 / null.sigma0,
                                   float(phi_W_integral(z0)))

    return Estimand(name=f"probability:{y:g}", fn=fn, deriv=deriv)


def regression_line_estimand(x) -> Estimand:
    """Mean response x'beta at a covariate vector x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))

    return Estimand(
        name="line",
        fn=lambda beta, sigma, gamma: float(x @ np.atleast_1d(beta)),
        deriv=lambda null: EstimandDerivatives(x.copy(), 0.0, 0.0),
    )


def regression_quantile_estimand(p: float, x) -> Estimand:
    """p-th conditional quantile x'beta + sigma G^-1(p, 1/gamma)."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level p must be in (0, 1)")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    zp = float(ndtri(p))

    def fn(beta, sigma, gamma):
        q = zp if gamma == 0.0 else float(t_quantile(p, 1.0 / gamma))
        return float(x @ np.atleast_1d(beta)) + sigma * q

    def deriv(null):
        d_gamma = -null.sigma0 * phi_W_integral(zp) / float(_phi(zp))
        return EstimandDerivatives(x.copy(), zp, d_gamma)

    return Estimand(name=f"regression-quantile:{p:g}", fn=fn, deriv=deriv)


def builtin_estimands() -> dict:
    """Catalogue of built-in estimands; parameterized families map to factories."""
    return {
        "mean": mean_estimand(),
        "sd": sd_estimand(),
        "mad": mad_estimand(),
        "quantile": quantile_estimand,
        "probability": probability_estimand,
        "line": regression_line_estimand,
        "regression-quantile": regression_quantile_estimand,
    }


def estimand_by_name(name: str) -> Estimand:
    """Resolve names like 'mean', 'quantile:0.75', 'probability:1.5'."""
    head, _, arg = name.partition(":")
    catalogue = builtin_estimands()
    if head not in catalogue or head in ("line", "regression-quantile"):
        known = "mean, sd, mad, quantile:p, probability:y"
        raise ValueError(f"unknown estimand {name!r}; choose one of: {known}")
    entry = catalogue[head]
    if isinstance(entry, Estimand):
        if arg:
            raise ValueError(f"estimand {head!r} takes no parameter")
        return entry
    if not arg:
        raise ValueError(f"estimand {head!r} needs a parameter, e.g. {head}:0.75")
    return entry(float(arg))


def sample_limit_triple(null: NullPoint, rng: np.random.Generator, size=None):
    """Draw (A, B, C) from N3(0, J_wide^-1) via Cholesky of the closed form."""
    L = np.linalg.cholesky(info_wide_inv(null.sigma0))
    z = rng.standard_normal(3 if size is None else (3,) + tuple(np.atleast_1d(size)))
    A, B, C = np.tensordot(L, z, axes=(1, 0))
    if size is None:
        return float(A), float(B), float(C)
    return A, B, C


def sample_lambda(e: Estimand, null: NullPoint, delta: float, rule,
                  rng: np.random.Generator, size=None):
    """Draw the limiting estimation error Lambda of a compromise estimator.

    Lambda = (1 - w(T or 0)) Lambda_narrow + w(T or 0) Lambda_wide with
    T = a + C/kappa; its mean square is kappa^2 b^2 R(a) + tau0^2.
    """
    from .compromise import as_rule, weight

    rule = as_rule(rule)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    kappa = KAPPA_T
    a = delta / kappa
    d = e.derivatives(null)
    s0 = null.sigma0
    if null.is_regression:
        dx = np.atleast_1d(np.asarray(d.d_xi, dtype=float))
        d_loc = math.sqrt(float(dx @ np.linalg.solve(null.D, dx)))
    else:
        d_loc = float(d.d_xi)
    b = s0 * d.d_sigma - d.d_gamma

    A, B, C = sample_limit_triple(NullPoint(0.0, s0), rng, size=size)
    A, B, C = np.asarray(A), np.asarray(B), np.asarray(C)
    loc = d_loc * A
    T = a + C / kappa
    lam_narr = b * delta + loc + d.d_sigma * (B + s0 * C)
    tpos = np.maximum(T, 0.0)
    lam_wide = np.where(
        T > 0,
        loc + d.d_sigma * B + d.d_gamma * kappa * (T - a),
        lam_narr,
    )
    w = weight(rule, tpos)
    lam = (1.0 - w) * lam_narr + w * lam_wide
    if size is None:
        return float(lam)
    return lam

"""Normalized risk R(a) of a-estimation rules, tolerance thresholds, and
related diagnostics (coverage, test power, absolute-loss transform).

R(a) is the mean squared error of a_hat(T) for T ~ N(a, 1) with the corner
event T <= 0 contributing a^2; the narrow rule has R(a) = a^2 and the wide
rule crosses it at the tolerance point a*.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import ndtr, ndtri

from .asymptotics import Estimand, NullPoint, bias_and_noise
from .compromise import ARule, DEFAULT_RULES, a_hat, as_rule
from .densities import MixtureSpec, quasi_t_A

_PHI0 = 1.0 / math.sqrt(2.0 * math.pi)
_QUAD_TOL = 1e-6


def _phi(z):
    return np.exp(-0.5 * np.asarray(z, dtype=float) ** 2) * _PHI0


@dataclass(frozen=True, eq=False)
class RiskCurve:
    """Risk values of one rule over an increasing grid of a-values."""

    a_grid: np.ndarray
    values: np.ndarray
    rule: ARule

    def __post_init__(self):
        a = np.asarray(self.a_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if a.ndim != 1 or a.size == 0 or np.any(np.diff(a) <= 0) or a[0] < 0:
            raise ValueError("a_grid must be increasing and nonnegative")
        if v.shape != a.shape:
            raise ValueError("values must match a_grid in length")
        object.__setattr__(self, "a_grid", a)
        object.__setattr__(self, "values", v)


def _quad_checked(f, lo, hi, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(f, lo, hi, points=points, epsabs=1e-12,
                            epsrel=1e-10, limit=200)
        except IntegrationWarning as exc:
            raise RuntimeError(f"quadrature did not converge: {exc}")
    if err > _QUAD_TOL:
        raise RuntimeError(f"quadrature error estimate {err:.2e} above {_QUAD_TOL}")
    return val


def risk_quadrature(rule, a: float) -> float:
    """R(a) = a^2 Phi(-a) + integral over t > 0 of (a_hat(t) - a)^2 phi(t - a)."""
    rule = as_rule(rule)
    if a < 0:
        raise ValueError("a must be nonnegative")
    hi = a + 10.0
    points = None
    if rule.kind in ("pre", "lim") and 0.0 < rule.param < hi:
        points = [rule.param]

    def integrand(t):
        d = a_hat(rule, t) - a
        return d * d * float(_phi(t - a))

    tail = a * a * float(ndtr(-a))
    return tail + _quad_checked(integrand, 0.0, hi, points=points)


def risk_closed(rule, a: float) -> float:
    """Closed-form R(a) for the wide, pre-test, and limited translation rules."""
    rule = as_rule(rule)
    if a < 0:
        raise ValueError("a must be nonnegative")
    if rule.kind == "narrow":
        return a * a
    if rule.kind == "wide":
        return float(ndtr(a)) - a * float(_phi(a)) + a * a * float(ndtr(-a))
    if rule.kind == "pre":
        d = rule.param
        return (float(ndtr(a - d)) + a * a * float(ndtr(d - a))
                - (a - d) * float(_phi(d - a)))
    if rule.kind == "lim":
        d = rule.param
        return ((1.0 + d * d) * float(ndtr(a - d)) + a * a * float(ndtr(d - a))
                - (a + d) * float(_phi(a - d)))
    raise ValueError(f"no closed-form risk for rule kind {rule.kind!r}")


def _risk(rule: ARule, a: float) -> float:
    if rule.kind in ("narrow", "wide", "pre", "lim"):
        return risk_closed(rule, a)
    return risk_quadrature(rule, a)


def tolerance_threshold() -> tuple[float, float, float]:
    """Solve a^2 = R_wide(a); returns (a*, delta* = a* sqrt(2/3), 1/delta*).

    The narrow method beats the wide one for a <= a*; on the t scale the
    normal model tolerates delta <= delta*, i.e. degrees of freedom
    m >= (1/delta*) sqrt(n).
    """

    def f(x):
        return risk_closed(ARule("wide"), x) - x * x

    lo, hi = 0.5, 1.2
    for _ in range(40):  # bisection to ~1e-12 bracket width
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    a_star = 0.5 * (lo + hi)
    for _ in range(3):  # Newton polish; f'(a) = 2a(1 - Phi(a)) - 2a
        fp = 2.0 * a_star * float(ndtr(-a_star)) - 2.0 * a_star
        a_star -= f(a_star) / fp
    if abs(f(a_star)) > 1e-10:
        raise RuntimeError("threshold root residual above 1e-10")
    delta_star = a_star * math.sqrt(2.0 / 3.0)
    return a_star, delta_star, 1.0 / delta_star


def estimand_risk(e: Estimand, null: NullPoint, rule, a: float) -> float:
    """Limiting normalized risk (2/3) b^2 R(a) + tau0^2 of the compromise."""
    rule = as_rule(rule)
    b, tau0 = bias_and_noise(e, null)
    return (2.0 / 3.0) * b * b * _risk(rule, a) + tau0 * tau0


def mixture_tolerance(spec: MixtureSpec, n: int) -> float:
    """Bound on the scale-mixture variance k2 gamma: a* kappa k2 / sqrt(n).

    kappa = 1/(sqrt(6) k2) makes the bound a*/(sqrt(6) sqrt(n)), the same
    0.3429/sqrt(n) for every mixture family.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    a_star, _, _ = tolerance_threshold()
    return a_star * math.sqrt(spec.kappa_sq) * spec.k2 / math.sqrt(n)


def coverage_narrow_ci(b: float, delta: float, tau0: float, z_level: float) -> float:
    """Limiting coverage of the narrow interval: Phi(z - b d/tau0) - Phi(-z - b d/tau0)."""
    if tau0 <= 0:
        raise ValueError("tau0 must be positive")
    shift = b * delta / tau0
    return float(ndtr(z_level - shift) - ndtr(-z_level - shift))


def t_test_power(a: float, level: float) -> float:
    """Asymptotic power Phi(a - z_{1-level}) of the T_n > z test for gamma > 0."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    return float(ndtr(a - ndtri(1.0 - level)))


def abs_normal_loss(z) -> float:
    """L(z) = E|z + N(0,1)| = |z|(2 Phi(|z|) - 1) + 2 phi(z)."""
    z = np.abs(np.asarray(z, dtype=float))
    out = z * (2.0 * ndtr(z) - 1.0) + 2.0 * _phi(z)
    return float(out) if out.ndim == 0 else out


def abs_loss_transform(a_hat_rule, a: float, rho: float) -> float:
    """Absolute-error analogue of R(a): integral of L(rho (a_hat(t) - a)) phi(t - a)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if a < 0:
        raise ValueError("a must be nonnegative")
    rule = None if callable(a_hat_rule) else as_rule(a_hat_rule)
    est = a_hat_rule if rule is None else (lambda t: a_hat(rule, t))
    hi = a + 10.0
    points = None
    if rule is not None and rule.kind in ("pre", "lim") and 0.0 < rule.param < hi:
        points = [rule.param]

    def integrand(t):
        return abs_normal_loss(rho * (est(t) - a)) * float(_phi(t - a))

    return _quad_checked(integrand, 0.0, hi, points=points)


def risk_table(a_grid, rules=DEFAULT_RULES) -> list[RiskCurve]:
    """Evaluate R(a) for each rule over the grid (within [0, 5])."""
    a = np.asarray(a_grid, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("a_grid must be a nonempty 1-d grid")
    if np.any(a < 0) or np.any(a > 5.0):
        raise ValueError("a_grid must lie within [0, 5]")
    rules = [as_rule(r) for r in rules]
    return [RiskCurve(a, np.array([_risk(r, float(x)) for x in a]), r)
            for r in rules]


def _column_label(rule: ARule, rules: list[ARule]) -> str:
    same_kind = sum(1 for r in rules if r.kind == rule.kind)
    return rule.kind if same_kind == 1 else rule.name


def format_risk_csv(curves: list[RiskCurve]) -> str:
    """CSV with header a,<rule columns>, values to 4 decimals, newline-terminated."""
    if not curves:
        raise ValueError("no curves to format")
    a = curves[0].a_grid
    for c in curves:
        if not np.array_equal(c.a_grid, a):
            raise ValueError("curves must share one a-grid")
    rules = [c.rule for c in curves]
    header = "a," + ",".join(_column_label(c.rule, rules) for c in curves)
    lines = [header]
    for i, x in enumerate(a):
        lines.append(f"{x:.4f}," + ",".join(f"{c.values[i]:.4f}" for c in curves))
    return "\n".join(lines) + "\n"


def quasi_t_info(c: float, sigma0: float = 1.0) -> np.ndarray:
    """Information matrix at gamma = 0 of the quasi-t family with cutoff c.

    Scores are (z/sigma0, (z^2 - 1)/sigma0, A(z)) under the standard normal;
    entries are Gauss-Kronrod moments of phi times polynomial-with-plateau
    factors, split at the cutoff.
    """
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")

    def moment(f):
        val = 0.0
        for lo, hi in ((0.0, c), (c, 40.0)):
            val += quad(lambda z: f(z) * float(_phi(z)), lo, hi,
                        epsabs=1e-13, epsrel=1e-11, limit=200)[0]
        return 2.0 * val  # integrands are even

    A = lambda z: float(quasi_t_A(z, c))
    e_a = moment(A)                                 # centering check; ~0
    e_a2 = moment(lambda z: A(z) ** 2)
    e_z2a = moment(lambda z: (z * z - 1.0) * A(z))
    J = np.array([
        [1.0 / sigma0 ** 2, 0.0, 0.0],
        [0.0, 2.0 / sigma0 ** 2, e_z2a / sigma0],
        [0.0, e_z2a / sigma0, e_a2 - e_a ** 2],
    ])
    return J


def quasi_t_kappa(c: float) -> float:
    """kappa = sqrt((J^-1)_{gamma gamma}) for the quasi-t family."""
    J = quasi_t_info(c)
    denom = J[2, 2] - J[1, 2] ** 2 / J[1, 1]
    if denom <= 0:
        raise ValueError("singular quasi-t information: gamma not identifiable")
    return 1.0 / math.sqrt(denom)


def quasi_t_tolerance(c: float, n: int) -> float:
    """Two-sided tolerance bound |gamma| <= kappa/sqrt(n) for the quasi-t family."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return quasi_t_kappa(c) / math.sqrt(n)

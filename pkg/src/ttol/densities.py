"""Densities, CDFs, quantiles, and expansions for the normal model and its widenings.

The wide model is the location-scale t family reparameterized by gamma = 1/m,
so gamma = 0 is the normal member and the parameter space has a boundary there.
Two perturbation families share the same local geometry: general normal scale
mixtures (MixtureSpec) and the quasi-t family (QuasiTSpec), which allows
negative gamma and therefore an interior null point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import betaln, ndtr, ndtri, stdtr, stdtrit

LOG_2PI = math.log(2.0 * math.pi)

# Below this gamma the exact log density is evaluated through its quadratic
# expansion in gamma; the branches agree to ~2e-7 for |z| <= 6 at the switch
# and the exact branch's log-Gamma difference stays fully accurate above it.
_GAMMA_SWITCH = 1e-4

DEFAULT_QUASI_T_CUTOFF = math.sqrt(6.0)


def _check_finite_real(x, name: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class TParams:
    """Parameter point (xi, sigma, gamma) of the wide model, gamma = 1/m >= 0."""

    xi: float
    sigma: float
    gamma: float = 0.0

    def __post_init__(self):
        _check_finite_real((self.xi, self.sigma, self.gamma), "TParams fields")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def m(self) -> float:
        """Degrees of freedom 1/gamma (inf at the normal member)."""
        return math.inf if self.gamma == 0.0 else 1.0 / self.gamma


def _log_norm_const(gamma: float) -> float:
    # log c(gamma) with c = sqrt(g)/sqrt(pi) * Gamma(1/2 + x)/Gamma(x), x = 1/(2g).
    # Written through log Beta(x, 1/2), which stays accurate for large x.
    x = 0.5 / gamma
    return 0.5 * math.log(gamma) - betaln(x, 0.5)


def t_log_density(y, p: TParams):
    """Log density of the reparameterized t model at y (scalar or array).

    The gamma = 0 branch is the explicit normal log density; no limits are
    evaluated at runtime. For 0 < gamma < 1e-4 the quadratic expansion in
    gamma is used, which keeps the value continuous at the boundary.
    """
    y = np.asarray(y, dtype=float)
    _check_finite_real(y, "y")
    z = (y - p.xi) / p.sigma
    out = _std_t_log_density(z, p.gamma) - math.log(p.sigma)
    return float(out) if out.ndim == 0 else out


def _std_t_log_density(z, gamma: float):
    z = np.asarray(z, dtype=float)
    z2 = z * z
    if gamma == 0.0:
        return -0.5 * LOG_2PI - 0.5 * z2
    if gamma < _GAMMA_SWITCH:
        return (-0.5 * LOG_2PI - 0.5 * z2
                + gamma * penalty_R(z) - 0.5 * gamma * gamma * penalty_S(z))
    return _log_norm_const(gamma) - (0.5 + 0.5 / gamma) * np.log1p(gamma * z2)


def t_density(y, p: TParams):
    return np.exp(t_log_density(y, p))


def penalty_R(z):
    """First-order penalty R(z) = z^4/4 - z^2/2 - 1/4; mean zero under the null."""
    z2 = np.square(np.asarray(z, dtype=float))
    out = 0.25 * z2 * z2 - 0.5 * z2 - 0.25
    return float(out) if out.ndim == 0 else out


def penalty_S(z):
    """Second-order penalty S(z) = z^6/3 - z^4/2."""
    z2 = np.square(np.asarray(z, dtype=float))
    z4 = z2 * z2
    out = z4 * z2 / 3.0 - 0.5 * z4
    return float(out) if out.ndim == 0 else out


def log_density_expansion(z, gamma: float):
    """Quadratic-in-gamma expansion log phi(z) + gamma*R(z) - (gamma^2/2)*S(z).

    Agrees with the exact standardized log density to O(gamma^3); intended
    for |gamma| <= 0.2.
    """
    z = np.asarray(z, dtype=float)
    out = (-0.5 * LOG_2PI - 0.5 * z * z
           + gamma * penalty_R(z) - 0.5 * gamma * gamma * penalty_S(z))
    return float(out) if out.ndim == 0 else out


def t_cdf(x, m: float):
    """CDF of the standard t with m > 0 degrees of freedom; m = inf is normal.

    Evaluated through the regularized incomplete beta function, which is
    robust for all m > 0 including m < 1.
    """
    if not m > 0:
        raise ValueError("m must be positive")
    x = np.asarray(x, dtype=float)
    out = ndtr(x) if math.isinf(m) else stdtr(m, x)
    return float(out) if np.ndim(x) == 0 else out


def t_quantile(p, m: float):
    """Quantile of the standard t with m degrees of freedom; inverse of t_cdf."""
    if not m > 0:
        raise ValueError("m must be positive")
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0.0) | (p_arr >= 1.0)):
        raise ValueError("p must lie in (0, 1)")
    if math.isinf(m):
        out = ndtri(p_arr)
    else:
        out = stdtrit(m, p_arr)
        # One Newton step against the CDF polishes the round trip below 1e-10.
        dens = np.exp(_std_t_log_density(out, 1.0 / m))
        with np.errstate(invalid="ignore", divide="ignore"):
            step = (stdtr(m, out) - p_arr) / dens
        out = out - np.where(np.isfinite(step), step, 0.0)
    return float(out) if np.ndim(p) == 0 else out


@dataclass(frozen=True)
class MixtureSpec:
    """Local normal scale-mixture specification: S has mean slope k1, variance slope k2."""

    k1: float
    k2: float

    def __post_init__(self):
        _check_finite_real((self.k1, self.k2), "MixtureSpec fields")
        if self.k2 <= 0:
            raise ValueError("k2 must be positive")

    @property
    def k3(self) -> float:
        return 1.5 * self.k2 - self.k1

    @property
    def kappa_sq(self) -> float:
        return 1.0 / (6.0 * self.k2 * self.k2)


T_CASE_MIXTURE = MixtureSpec(k1=-0.25, k2=0.5)


def mixture_R(z, spec: MixtureSpec):
    """First-order penalty of a general scale mixture:
    (1/2)k2 (z^4 - 6z^2 + 3) + k3 (z^2 - 1); mean zero under the null."""
    z2 = np.square(np.asarray(z, dtype=float))
    out = 0.5 * spec.k2 * (z2 * z2 - 6.0 * z2 + 3.0) + spec.k3 * (z2 - 1.0)
    return float(out) if out.ndim == 0 else out


def quasi_t_centering(c: float) -> float:
    """Centering constant a(c) making int phi(z) A(z) dz = 0."""
    if c < DEFAULT_QUASI_T_CUTOFF - 1e-12:
        raise ValueError("cut-off c must be at least sqrt(6)")
    phi_c = math.exp(-0.5 * c * c) / math.sqrt(2.0 * math.pi)
    return (0.25 - (0.5 * c ** 3 + 0.5 * c) * phi_c
            + (0.5 * c ** 4 - c * c - 0.5) * (1.0 - ndtr(c)))


def quasi_t_A(z, c: float = DEFAULT_QUASI_T_CUTOFF):
    """Even perturbation A(z) = z^4/4 - z^2/2 - a(c) for |z| <= c, constant beyond."""
    a_c = quasi_t_centering(c)
    z = np.minimum(np.abs(np.asarray(z, dtype=float)), c)
    z2 = z * z
    out = 0.25 * z2 * z2 - 0.5 * z2 - a_c
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class QuasiTSpec:
    """Quasi-t member phi(z)(1 + gamma*A(z))/sigma; gamma may be negative.

    Nonnegativity of the density is checked at construction by evaluating
    1 + gamma*A at the critical points z in {0, 1, c} (A is even and its
    only stationary points are 0, +-1, and the plateau beyond +-c).
    """

    gamma: float
    c: float = DEFAULT_QUASI_T_CUTOFF

    def __post_init__(self):
        _check_finite_real((self.gamma, self.c), "QuasiTSpec fields")
        crit = quasi_t_A(np.array([0.0, 1.0, self.c]), self.c)
        if np.min(1.0 + self.gamma * crit) < 0.0:
            raise ValueError(
                f"gamma={self.gamma} makes the quasi-t density negative; "
                f"admissible range for c={self.c:.4f} is "
                f"[{-1.0 / crit.max():.4f}, {1.0 / (-crit.min()):.4f}]")


def quasi_t_log_density(y, xi: float, sigma: float, spec: QuasiTSpec):
    """Log density phi(z)(1 + gamma*A(z))/sigma of the quasi-t member."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    y = np.asarray(y, dtype=float)
    _check_finite_real(y, "y")
    z = (y - xi) / sigma
    with np.errstate(divide="ignore"):
        out = (-0.5 * LOG_2PI - 0.5 * z * z - math.log(sigma)
               + np.log(1.0 + spec.gamma * quasi_t_A(z, spec.c)))
    return float(out) if out.ndim == 0 else out


def quasi_t_permissible_interval(c: float = DEFAULT_QUASI_T_CUTOFF):
    """Gamma interval on which the quasi-t construction is a valid widening.

    Combines three requirements: the density is nonnegative, it is
    nonincreasing in |z| (unimodality), and excess kurtosis carries the sign
    of gamma. Each bound comes from the finitely many critical points of the
    piecewise-polynomial A. The interval is computed, not hard-coded.
    """
    a_c = quasi_t_centering(c)
    a_max = 0.25 * c ** 4 - 0.5 * c * c - a_c  # plateau value, the max of A
    a_min = -0.25 - a_c                        # A at z = +-1, the min
    lo = -1.0 / a_max
    hi_nonneg = 1.0 / (-a_min)
    # Monotone density on z >= 0 requires gamma*(z^2 - 1 - A(z)) <= 1 there;
    # the bracket peaks at z = sqrt(3) with value 5/4 + a(c).
    hi_mono = 1.0 / (1.25 + a_c)
    # Kurtosis sign: moments are linear in gamma, giving the root below.
    s2 = _quasi_t_moment(2, c)
    s4 = _quasi_t_moment(4, c)
    hi_kurt = (s4 - 6.0 * s2) / (3.0 * s2 * s2)
    return lo, min(hi_nonneg, hi_mono, hi_kurt)


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / math.sqrt(2.0 * math.pi)


def _quasi_t_moment(k: int, c: float) -> float:
    f = lambda z: z ** k * _phi(z) * quasi_t_A(z, c)
    core, _ = quad(f, -c, c, epsabs=1e-13, epsrel=1e-13, limit=200)
    left, _ = quad(f, -40.0, -c, epsabs=1e-13, epsrel=1e-13)
    right, _ = quad(f, c, 40.0, epsabs=1e-13, epsrel=1e-13)
    return core + left + right


def quasi_t_kurtosis_derivative(c: float = DEFAULT_QUASI_T_CUTOFF) -> float:
    """d/dgamma of the quasi-t kurtosis at gamma = 0:
    int z^4 phi A dz - 6 int z^2 phi A dz."""
    return _quasi_t_moment(4, c) - 6.0 * _quasi_t_moment(2, c)

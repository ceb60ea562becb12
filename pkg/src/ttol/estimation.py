"""Maximum likelihood in the narrow (normal) and wide (t) models.

The wide fit is a box-constrained quasi-Newton search over (xi, log sigma,
gamma) with gamma clamped to [0, gamma_max], warm-started from the narrow fit
and the one-step gamma statistic. The corner gamma = 0 is decided by a direct
log-likelihood comparison so the at_corner flag is deterministic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import digamma

from .densities import (LOG_2PI, TParams, _GAMMA_SWITCH, _std_t_log_density,
                        penalty_R, penalty_S)

# Convergence: sup-norm of the per-observation (mean) log-likelihood gradient
# at interior coordinates below 1e-8. The mean scale keeps the criterion
# sample-size free and within reach of double precision near the corner.
_GRAD_TOL = 1e-8
_CORNER_LOGLIK_TOL = 1e-9
_MAX_ITER = 500


def _dlogc(g: float) -> float:
    """Derivative in gamma of the log normalizing constant of the t density.

    The digamma form psi(x) - psi(x + 1/2) with x = 1/(2 gamma) cancels
    catastrophically as gamma -> 0, so below 0.01 an asymptotic expansion of
    the difference is used instead; both branches agree to ~1e-12 at the
    crossover and the value tends to R(0) = -1/4 at the corner.
    """
    if g >= 0.01:
        x = 0.5 / g
        return 0.5 / g - (digamma(x + 0.5) - digamma(x)) / (2.0 * g * g)
    if g < 1e-4:
        t1 = 0.25 - g / 6.0 + g * g / 8.0
    else:
        t1 = 0.25 - g / 6.0 + g * g / 8.0 - g ** 3 / 10.0 + g ** 4 / 12.0 - g ** 5 / 14.0
    onep = 1.0 + g
    return (t1 - 0.5 / onep - (2.0 + g) * g / (6.0 * onep ** 2)
            + (g * g / 15.0) * (1.0 - onep ** -4)
            - (8.0 * g ** 4 / 63.0) * (1.0 - onep ** -6))


@dataclass(frozen=True, eq=False)
class RegressionParams:
    """Wide-model regression parameters: response mean x'beta, scale sigma, gamma."""

    beta: np.ndarray
    sigma: float
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        if not (np.all(np.isfinite(self.beta)) and math.isfinite(self.sigma)
                and math.isfinite(self.gamma)):
            raise ValueError("regression parameters must be finite")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")

    @property
    def m(self) -> float:
        return math.inf if self.gamma == 0.0 else 1.0 / self.gamma


@dataclass(frozen=True)
class FitResult:
    """ML output: fitted parameters, log-likelihood, and corner/convergence flags."""

    params: TParams | RegressionParams
    loglik: float
    at_corner: bool
    n_iter: int
    converged: bool

    @property
    def gamma(self) -> float:
        return self.params.gamma

    @property
    def sigma(self) -> float:
        return self.params.sigma


class FitError(RuntimeError):
    """Optimization failure; carries the best point probed so far."""

    def __init__(self, message: str, best: FitResult | None = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class FitOptions:
    gamma_max: float = 2.0     # m >= 1/2; heavier tails are a documented limitation
    max_iter: int = _MAX_ITER
    extra_start: float = 0.02  # interior probe used when the one-step start is 0
    check_profile: bool = False


_DEFAULT_OPTIONS = FitOptions()
_PROFILE_GRID = (0.0, 1e-3, 3e-3, 0.01, 0.03, 0.1, 0.3, 0.6, 1.0)


def _as_data(data) -> np.ndarray:
    y = np.asarray(data, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("data must be finite")
    return y


def _is_degenerate(sigma: float, y: np.ndarray) -> bool:
    """Scale indistinguishable from zero at double precision.

    Relative to the response magnitude so that exact fits contaminated only
    by floating-point roundoff are still flagged.
    """
    return sigma <= 1e-12 * float(np.sqrt(np.mean(y * y)))


def fit_narrow(data) -> FitResult:
    """Normal-model ML: xi = mean, sigma = root mean squared deviation (divisor n)."""
    y = _as_data(data)
    if y.size < 2:
        raise ValueError("need at least 2 observations")
    xi = float(y.mean())
    sigma = float(np.sqrt(np.mean((y - xi) ** 2)))
    if _is_degenerate(sigma, y):
        raise ValueError("degenerate sample: zero variance")
    params = TParams(xi, sigma, 0.0)
    ll = float(np.sum(_std_t_log_density((y - xi) / sigma, 0.0))) - y.size * math.log(sigma)
    return FitResult(params=params, loglik=ll, at_corner=True, n_iter=0, converged=True)


def one_step_gamma(data, xi_hat: float, sigma_hat: float) -> float:
    """One-step gamma estimate max(0, sum R(z) / sum S(z)) at standardized residuals.

    Warm start and corner diagnostic; already on the gamma scale (divide by
    nothing: sqrt(n) factors cancel between numerator and denominator).
    """
    if sigma_hat <= 0:
        raise ValueError("sigma_hat must be positive")
    z = (_as_data(data) - xi_hat) / sigma_hat
    num = float(np.sum(penalty_R(z)))
    den = float(np.sum(penalty_S(z)))
    if den <= 0.0:
        warnings.warn("nonpositive curvature sum in one-step gamma; returning 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return max(0.0, num / den)


def _warm_start_gamma(u: np.ndarray) -> float:
    """One-step value for standardized residuals, silent on the anomaly path."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return one_step_gamma(u, 0.0, 1.0)


def delta_switch(data, xi0: float, sigma0: float) -> float:
    """Switch statistic Delta_n = -(2/3) sigma0 sqrt(n) Vbar + (2/3) sqrt(n) Wbar.

    Its sign predicts whether the wide fit leaves the corner.
    """
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    y = _as_data(data)
    z = (y - xi0) / sigma0
    vbar = float(np.mean(z * z - 1.0)) / sigma0
    wbar = float(np.mean(penalty_R(z)))
    rn = math.sqrt(y.size)
    return -(2.0 / 3.0) * sigma0 * rn * vbar + (2.0 / 3.0) * rn * wbar


def _negll_grad_iid(theta: np.ndarray, u: np.ndarray):
    """Mean negative log-likelihood and gradient at (xi, log sigma, gamma)."""
    xi, s, g = theta
    sig = math.exp(s)
    z = (u - xi) / sig
    z2 = z * z
    if g < _GAMMA_SWITCH:
        z4 = z2 * z2
        ll = (-0.5 * LOG_2PI - s - 0.5 * z2
              + g * (0.25 * z4 - 0.5 * z2 - 0.25)
              - 0.5 * g * g * (z4 * z2 / 3.0 - 0.5 * z4))
        dxi = (z - g * (z2 * z - z) + g * g * (z4 * z - z2 * z)) / sig
        ds = z2 - 1.0 - g * (z4 - z2) + g * g * (z4 * z2 - z4)
        dg = (0.25 * z4 - 0.5 * z2 - 0.25) - g * (z4 * z2 / 3.0 - 0.5 * z4)
    else:
        x = 0.5 / g
        gz2 = g * z2
        l1p = np.log1p(gz2)
        ll = _std_t_log_density(z, g) - s
        w = (1.0 + g) / (1.0 + gz2)
        dxi = w * z / sig
        ds = w * z2 - 1.0
        dg = _dlogc(g) + l1p / (2.0 * g * g) - (0.5 + x) * z2 / (1.0 + gz2)
    return -float(np.mean(ll)), -np.array([np.mean(dxi), np.mean(ds), np.mean(dg)])


def _projected(x, g, bounds):
    """Gradient with components pointing out of an active bound zeroed."""
    pg = np.asarray(g, dtype=float).copy()
    for i, (lo, hi) in enumerate(bounds):
        if lo is not None and x[i] <= lo + 1e-9 and pg[i] > 0:
            pg[i] = 0.0
        if hi is not None and x[i] >= hi - 1e-9 and pg[i] < 0:
            pg[i] = 0.0
    return pg


def _newton_polish(fun, x, bounds, tol_mean: float, max_steps: int = 12):
    """Push the solution to gradient tolerance after a line-search stall.

    Near the optimum the objective is flat to machine precision, so function-
    decrease line searches give up early; the analytic gradient is still
    accurate there, and Newton steps on a finite-difference Hessian of that
    gradient converge in one or two iterations.
    """
    x = np.asarray(x, dtype=float).copy()
    f, g = fun(x)
    for _ in range(max_steps):
        pg = _projected(x, g, bounds)
        sup = float(np.max(np.abs(pg)))
        if sup <= tol_mean:
            return x, f, True
        free = np.flatnonzero(pg != 0.0)
        if free.size == 0:
            return x, f, True
        H = np.empty((free.size, free.size))
        for j, i in enumerate(free):
            h = 1e-6 * max(1.0, abs(x[i]))
            lo, hi = bounds[i]
            hp = h if (hi is None or x[i] + h <= hi) else 0.0
            hm = h if (lo is None or x[i] - h >= lo) else 0.0
            if hp == 0.0 and hm == 0.0:
                hp = h
            xp = x.copy()
            xp[i] += hp
            xm = x.copy()
            xm[i] -= hm
            H[:, j] = (fun(xp)[1][free] - fun(xm)[1][free]) / (hp + hm)
        H = 0.5 * (H + H.T)
        try:
            step = np.linalg.solve(H + 1e-10 * np.eye(free.size), -g[free])
        except np.linalg.LinAlgError:
            break
        xn = x.copy()
        xn[free] += step
        for i in free:
            lo, hi = bounds[i]
            if lo is not None:
                xn[i] = max(xn[i], lo)
            if hi is not None:
                xn[i] = min(xn[i], hi)
        fn, gn = fun(xn)
        if float(np.max(np.abs(_projected(xn, gn, bounds)))) < sup or fn < f:
            x, f, g = xn, fn, gn
        else:
            break
    pg = _projected(x, g, bounds)
    return x, f, float(np.max(np.abs(pg))) <= tol_mean


def _solve(fun, x0, bounds, max_iter: int):
    """L-BFGS-B plus Newton polish; returns (x, fun_value, converged, n_iter, message)."""
    pgtol = _GRAD_TOL
    res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   options=dict(maxiter=max_iter, ftol=1e-16, gtol=pgtol))
    x, f, ok, msg = np.asarray(res.x, dtype=float), float(res.fun), bool(res.success), str(res.message)
    if not ok and "ITERATIONS" not in msg.upper():
        x, f, ok = _newton_polish(fun, x, bounds, pgtol)
    return x, f, ok, int(res.nit), msg


def fit_wide(data, options: FitOptions = _DEFAULT_OPTIONS) -> FitResult:
    """Wide-model ML over xi in R, sigma > 0, gamma in [0, gamma_max].

    Returns the narrow fit with at_corner=True whenever the constrained
    optimum gains less than 1e-9 log-likelihood over gamma = 0.
    """
    y = _as_data(data)
    if y.size < 4:
        raise ValueError("need at least 4 observations for the wide fit")
    narrow = fit_narrow(y)
    # Standardizing by the narrow fit makes the search affine-equivariant
    # and well conditioned; parameters map back exactly afterwards.
    u = (y - narrow.params.xi) / narrow.params.sigma
    n = y.size
    g0 = min(_warm_start_gamma(u), options.gamma_max)
    starts = [g0] if g0 > 0.0 else [0.0, min(options.extra_start, options.gamma_max)]
    bounds = [(None, None), (None, None), (0.0, options.gamma_max)]

    best = None
    n_iter = 0
    for gs in starts:
        sol = _solve(lambda th: _negll_grad_iid(th, u),
                     np.array([0.0, 0.0, gs]), bounds, options.max_iter)
        n_iter += sol[3]
        if best is None or sol[1] < best[1]:
            best = sol
    result = _package_iid(best[0], best[2], narrow, n_iter, y)
    if not best[2]:
        raise FitError(f"wide fit did not converge: {best[4]}", best=result)
    if options.check_profile:
        result = _profile_refine(result, narrow, y, u, options, n_iter)
    return result


def _package_iid(x, converged: bool, narrow: FitResult, n_iter: int,
                 y: np.ndarray) -> FitResult:
    xi = narrow.params.xi + narrow.params.sigma * x[0]
    sigma = narrow.params.sigma * math.exp(x[1])
    gamma = max(float(x[2]), 0.0)
    params = TParams(xi, sigma, gamma)
    z = (y - params.xi) / params.sigma
    ll = float(np.sum(_std_t_log_density(z, params.gamma))) - y.size * math.log(params.sigma)
    if ll - narrow.loglik < _CORNER_LOGLIK_TOL:
        return replace(narrow, n_iter=n_iter, converged=converged)
    return FitResult(params=params, loglik=ll, at_corner=False,
                     n_iter=n_iter, converged=converged)


def profile_loglik(data, gamma: float) -> float:
    """Total log-likelihood maximized over (xi, sigma) at fixed gamma."""
    y = _as_data(data)
    narrow = fit_narrow(y)
    if gamma == 0.0:
        return narrow.loglik
    u = (y - narrow.params.xi) / narrow.params.sigma
    fun = lambda th: _strip_gamma(_negll_grad_iid(np.append(th, gamma), u))
    x, *_ = _solve(fun, np.zeros(2), [(None, None), (None, None)], _MAX_ITER)
    xi = narrow.params.xi + narrow.params.sigma * x[0]
    sigma = narrow.params.sigma * math.exp(x[1])
    z = (y - xi) / sigma
    return float(np.sum(_std_t_log_density(z, gamma))) - y.size * math.log(sigma)


def _strip_gamma(fg):
    f, g = fg
    return f, g[:2]


def _profile_refine(result: FitResult, narrow: FitResult, y: np.ndarray,
                    u: np.ndarray, options: FitOptions, n_iter: int) -> FitResult:
    grid = [g for g in _PROFILE_GRID if g <= options.gamma_max]
    values = [profile_loglik(y, g) for g in grid]
    k = int(np.argmax(values))
    if values[k] - result.loglik <= 1e-6:
        return result
    sol = _solve(lambda th: _negll_grad_iid(th, u),
                 np.array([0.0, 0.0, grid[k]]),
                 [(None, None), (None, None), (0.0, options.gamma_max)],
                 options.max_iter)
    refined = _package_iid(sol[0], sol[2], narrow, n_iter + sol[3], y)
    return refined if refined.loglik > result.loglik else result


@dataclass(frozen=True, eq=False)
class RegressionDesign:
    """Covariate matrix X (n x p) with D_n = X'X/n required positive definite."""

    X: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] <= X.shape[1]:
            raise ValueError("design must be n x p with n > p")
        if not np.all(np.isfinite(X)):
            raise ValueError("design must be finite")
        object.__setattr__(self, "X", X)
        D = X.T @ X / X.shape[0]
        try:
            np.linalg.cholesky(D)
        except np.linalg.LinAlgError:
            raise ValueError("singular design: D_n = X'X/n is not positive definite")
        object.__setattr__(self, "_D", D)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def D(self) -> np.ndarray:
        return self._D


def _regression_loglik(design: RegressionDesign, y: np.ndarray,
                       beta: np.ndarray, sigma: float, gamma: float) -> float:
    z = (y - design.X @ beta) / sigma
    return float(np.sum(_std_t_log_density(z, gamma))) - y.size * math.log(sigma)


def fit_narrow_regression(design: RegressionDesign, y) -> FitResult:
    """Least squares with ML scale sigma^2 = RSS/n."""
    y = _as_data(y)
    if y.size != design.n:
        raise ValueError("response length does not match design")
    beta, *_ = np.linalg.lstsq(design.X, y, rcond=None)
    resid = y - design.X @ beta
    sigma = float(np.sqrt(np.mean(resid ** 2)))
    if _is_degenerate(sigma, y):
        raise ValueError("degenerate fit: response is exactly linear in the design")
    params = RegressionParams(beta=beta, sigma=sigma, gamma=0.0)
    ll = _regression_loglik(design, y, params.beta, sigma, 0.0)
    return FitResult(params=params, loglik=ll, at_corner=True, n_iter=0, converged=True)


def _negll_grad_reg(theta: np.ndarray, X: np.ndarray, y: np.ndarray):
    p = X.shape[1]
    beta = theta[:p]
    s, g = theta[p], theta[p + 1]
    sig = math.exp(s)
    z = (y - X @ beta) / sig
    z2 = z * z
    if g < _GAMMA_SWITCH:
        z4 = z2 * z2
        ll = (-0.5 * LOG_2PI - s - 0.5 * z2
              + g * (0.25 * z4 - 0.5 * z2 - 0.25)
              - 0.5 * g * g * (z4 * z2 / 3.0 - 0.5 * z4))
        psi = z - g * (z2 * z - z) + g * g * (z4 * z - z2 * z)
        ds = z2 - 1.0 - g * (z4 - z2) + g * g * (z4 * z2 - z4)
        dg = (0.25 * z4 - 0.5 * z2 - 0.25) - g * (z4 * z2 / 3.0 - 0.5 * z4)
    else:
        x = 0.5 / g
        gz2 = g * z2
        ll = _std_t_log_density(z, g) - s
        w = (1.0 + g) / (1.0 + gz2)
        psi = w * z
        ds = w * z2 - 1.0
        dg = _dlogc(g) + np.log1p(gz2) / (2.0 * g * g) - (0.5 + x) * z2 / (1.0 + gz2)
    n = y.size
    grad = np.empty(p + 2)
    grad[:p] = -(X.T @ psi) / (sig * n)
    grad[p] = -float(np.mean(ds))
    grad[p + 1] = -float(np.mean(dg))
    return -float(np.mean(ll)), grad


def fit_wide_regression(design: RegressionDesign, y,
                        options: FitOptions = _DEFAULT_OPTIONS) -> FitResult:
    """Joint ML over (beta, sigma, gamma >= 0); same corner contract as fit_wide."""
    y = _as_data(y)
    narrow = fit_narrow_regression(design, y)
    sig_n = narrow.params.sigma
    u = (y - design.X @ narrow.params.beta) / sig_n
    g0 = min(_warm_start_gamma(u), options.gamma_max)
    starts = [g0] if g0 > 0.0 else [0.0, min(options.extra_start, options.gamma_max)]
    p = design.p
    bounds = [(None, None)] * (p + 1) + [(0.0, options.gamma_max)]
    best = None
    n_iter = 0
    for gs in starts:
        x0 = np.zeros(p + 2)
        x0[-1] = gs
        sol = _solve(lambda th: _negll_grad_reg(th, design.X, u),
                     x0, bounds, options.max_iter)
        n_iter += sol[3]
        if best is None or sol[1] < best[1]:
            best = sol
    x, converged = best[0], best[2]
    beta = narrow.params.beta + sig_n * x[:p]
    sigma = sig_n * math.exp(x[p])
    gamma = max(float(x[p + 1]), 0.0)
    ll = _regression_loglik(design, y, beta, sigma, gamma)
    if ll - narrow.loglik < _CORNER_LOGLIK_TOL:
        result = replace(narrow, n_iter=n_iter, converged=converged)
    else:
        result = FitResult(params=RegressionParams(beta=beta, sigma=sigma, gamma=gamma),
                           loglik=ll, at_corner=False, n_iter=n_iter,
                           converged=converged)
    if not converged:
        raise FitError(f"wide regression fit did not converge: {best[4]}", best=result)
    return result

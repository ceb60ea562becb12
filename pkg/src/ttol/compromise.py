"""Rules for estimating the standardized tail-weight parameter a, and the
compromise estimator that mixes narrow and wide plug-in estimates.

Each rule maps the observed statistic t = T_n to an estimate a_hat(t) >= 0.
The induced weight w(t) = a_hat(t)/t defines the narrow/wide mixture; rules
whose a_hat(0) > 0 (vague, bayes) get a finite w(0) by convention since the
mixture value is immaterial on the event T_n = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .asymptotics import Estimand
from .estimation import (FitResult, RegressionDesign, fit_narrow,
                         fit_narrow_regression, fit_wide, fit_wide_regression)

_PHI0 = 1.0 / math.sqrt(2.0 * math.pi)

# Pre-test threshold equal to the tolerance point a*, and limited-translation
# offset making the maximum risk 1 + d^2 match the empirical Bayes rule's.
DEFAULT_PRETEST_D = 0.8399
DEFAULT_LIMITED_D = math.sqrt(0.147)

_KINDS = ("narrow", "wide", "ratio", "bayes", "eb", "vague", "pre", "lim", "custom")


@dataclass(frozen=True)
class ARule:
    """One rule for estimating a from t; kind 'custom' wraps a user function."""

    kind: str
    param: float | None = None
    fn: Callable | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}; valid: {', '.join(_KINDS)}")
        if self.kind == "bayes":
            if self.param is None or not self.param > 0:
                raise ValueError("bayes rule needs prior scale tau > 0")
        elif self.kind in ("pre", "lim"):
            if self.param is None or self.param < 0:
                raise ValueError(f"{self.kind} rule needs threshold d >= 0")
        elif self.kind == "custom":
            if self.fn is None:
                raise ValueError("custom rule needs an a_hat function")
        elif self.param is not None:
            raise ValueError(f"rule {self.kind!r} takes no parameter")

    @property
    def name(self) -> str:
        if self.kind in ("bayes", "pre", "lim") and self.param is not None:
            return f"{self.kind}:{self.param:g}"
        return self.kind


NARROW = ARule("narrow")
WIDE = ARule("wide")
RATIO = ARule("ratio")
EMPIRICAL_BAYES = ARule("eb")
VAGUE = ARule("vague")
PRE_TEST = ARule("pre", DEFAULT_PRETEST_D)
LIMITED_TRANSLATION = ARule("lim", DEFAULT_LIMITED_D)

DEFAULT_RULES = (NARROW, WIDE, RATIO, EMPIRICAL_BAYES, VAGUE, PRE_TEST,
                 LIMITED_TRANSLATION)


def rule_by_name(name: str) -> ARule:
    """Resolve a rule name like 'eb', 'bayes:0.5', 'pre:0.84', 'lim:0.38'."""
    head, _, arg = name.partition(":")
    if head == "bayes":
        if not arg:
            raise ValueError("bayes rule needs a prior scale, e.g. bayes:1.0")
        return ARule("bayes", float(arg))
    if head in ("pre", "lim"):
        default = DEFAULT_PRETEST_D if head == "pre" else DEFAULT_LIMITED_D
        return ARule(head, float(arg) if arg else default)
    if head in ("narrow", "wide", "ratio", "eb", "vague") and not arg:
        return ARule(head)
    valid = "narrow, wide, ratio, eb, vague, bayes:tau, pre[:d], lim[:d]"
    raise ValueError(f"unknown rule {name!r}; valid names: {valid}")


def as_rule(rule) -> ARule:
    if isinstance(rule, ARule):
        return rule
    if isinstance(rule, str):
        return rule_by_name(rule)
    raise TypeError(f"expected ARule or rule name, got {type(rule).__name__}")


def _phi(t):
    return np.exp(-0.5 * np.asarray(t, dtype=float) ** 2) * _PHI0


def _ratio_weight(t):
    t = np.asarray(t, dtype=float)
    num = t * t * ndtr(t) + t * _phi(t)
    den = (t * t + 1.0) * ndtr(t) + t * _phi(t)
    return num / den


def _bayes_a_hat(t, nu):
    t = np.asarray(t, dtype=float)
    rn = np.sqrt(nu)
    return nu * t + rn * _phi(rn * t) / ndtr(rn * t)


def a_hat(rule, t):
    """The rule's estimate of a at statistic t; negative t is treated as 0."""
    rule = as_rule(rule)
    scalar = np.ndim(t) == 0
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    if not np.all(np.isfinite(t)):
        raise ValueError("t must be finite")
    kind = rule.kind
    if kind == "narrow":
        out = np.zeros_like(t)
    elif kind == "wide":
        out = t.copy()
    elif kind == "ratio":
        out = _ratio_weight(t) * t
    elif kind == "bayes":
        tau = rule.param
        out = _bayes_a_hat(t, tau * tau / (tau * tau + 1.0))
    elif kind == "eb":
        nu = t * t / (t * t + 1.0)
        out = np.where(t > 0, _bayes_a_hat(t, np.where(nu > 0, nu, 0.5)), 0.0)
    elif kind == "vague":
        out = t + _phi(t) / ndtr(t)
    elif kind == "pre":
        out = np.where(t > rule.param, t, 0.0)
    elif kind == "lim":
        out = np.where(t > rule.param, t - rule.param, 0.0)
    else:
        out = np.maximum(np.asarray([rule.fn(v) for v in np.atleast_1d(t)], dtype=float), 0.0)
        out = out.reshape(t.shape)
    return float(out) if scalar else out


def _weight_at_zero(rule: ARule) -> float:
    if rule.kind in ("narrow", "ratio"):
        return 0.0
    if rule.kind == "wide":
        return 1.0
    if rule.kind == "eb":
        return 2.0 * _PHI0
    if rule.kind == "vague":
        return 1.0
    if rule.kind == "bayes":
        tau = rule.param
        return tau * tau / (tau * tau + 1.0)
    if rule.kind in ("pre", "lim"):
        return 0.0 if rule.param > 0 else 1.0
    eps = 1e-6
    return float(a_hat(rule, eps)) / eps


def weight(rule, t):
    """Mixture weight w(t) = a_hat(t)/t, with the rule's convention at t = 0.

    Limits at zero: narrow and ratio 0; wide and vague 1; empirical Bayes
    2 phi(0); bayes(tau) its prior weight nu; pre-test and limited translation
    0 for d > 0 (1 when d = 0). Vague and bayes have a_hat(0) > 0, so their
    w(0) is a convention: any value gives the same compromise estimate there.
    """
    rule = as_rule(rule)
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("weight is defined for t >= 0")
    w0 = _weight_at_zero(rule)
    safe = np.where(t > 0, t, 1.0)
    out = np.where(t > 0, a_hat(rule, safe) / safe, w0)
    return float(out) if scalar else out


_T_EPS = 1e-8


def compromise_estimate(data, e: Estimand, rule,
                        fits: tuple[FitResult, FitResult] | None = None) -> float:
    """Estimate mu by mixing narrow and wide plug-ins with weight a_hat(T_n)/T_n.

    data is either a 1-d sample or a (RegressionDesign, y) pair. T_n is
    sqrt(1.5 n) gamma_hat from the wide fit; at the corner (or T_n below
    1e-8) the narrow estimate is returned. Precomputed (narrow, wide) fits
    can be passed to avoid refitting.
    """
    rule = as_rule(rule)
    regression = isinstance(data, tuple)
    if fits is not None:
        narrow, wide = fits
    elif regression:
        design, y = data
        if not isinstance(design, RegressionDesign):
            design = RegressionDesign(design)
        narrow = fit_narrow_regression(design, y)
        wide = fit_wide_regression(design, y)
    else:
        narrow = fit_narrow(data)
        wide = fit_wide(data)
    n = len(data[1]) if regression else len(np.asarray(data).ravel())
    if regression:
        mu_narrow = e.eval(narrow.params.beta, narrow.params.sigma, 0.0)
        mu_wide = e.eval(wide.params.beta, wide.params.sigma, wide.params.gamma)
    else:
        mu_narrow = e.eval(narrow.params.xi, narrow.params.sigma, 0.0)
        mu_wide = e.eval(wide.params.xi, wide.params.sigma, wide.params.gamma)
    if rule.kind == "narrow":
        return mu_narrow
    if rule.kind == "wide":
        return mu_wide
    t_n = math.sqrt(1.5 * n) * wide.params.gamma
    if wide.at_corner or t_n <= _T_EPS:
        return mu_narrow
    return mu_narrow + (mu_wide - mu_narrow) * (a_hat(rule, t_n) / t_n)

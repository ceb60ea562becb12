"""Command-line surface: fitting, risk tables and plots, tolerance bounds,
and simulation runs.

Subcommands: fit, risk, tolerance, simulate.  Exit codes: 0 on success,
1 on runtime failure (e.g. a fit that does not converge), 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .asymptotics import NullPoint, estimand_by_name
from .compromise import DEFAULT_RULES, rule_by_name
from .densities import DEFAULT_QUASI_T_CUTOFF, MixtureSpec, T_CASE_MIXTURE, \
    quasi_t_kurtosis_derivative
from .estimation import FitError, RegressionDesign, fit_narrow, \
    fit_narrow_regression, fit_wide, fit_wide_regression
from .risk import RiskCurve, estimand_risk, format_risk_csv, \
    mixture_tolerance, quasi_t_kappa, quasi_t_tolerance, risk_table, \
    tolerance_threshold
from .simulate import SimConfig, run_corner_sim, run_coverage_sim, \
    run_power_sim, run_quantile_test_sim, run_risk_sim

_EPILOG = """\
rule names:
  narrow, wide, ratio, eb, vague, pre[:d], lim[:d], bayes:<nu>
  (pre defaults to d=0.8399, lim to d=0.3834; bayes requires a prior
  variance ratio nu in (0, 1))

estimand names:
  mean, sd, mad, quantile:<p>, probability:<y>
  (regression-line and regression-quantile estimands need a covariate
  vector and are available through the library API)
"""


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# fit


def _read_numbers(path: str) -> np.ndarray:
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValueError("insufficient data: input file is empty")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError:
        raise ValueError(f"could not parse {path!r} as newline-separated numbers")


def _read_regression(path: str) -> tuple[RegressionDesign, np.ndarray]:
    try:
        table = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError:
        raise
    except Exception as exc:
        raise ValueError(f"could not parse {path!r} as CSV: {exc}")
    if table.size == 0:
        raise ValueError("insufficient data: input file is empty")
    if table.shape[1] < 2:
        raise ValueError("regression input needs a response column plus "
                         "at least one covariate column")
    y = table[:, 0]
    return RegressionDesign(table[:, 1:]), y


def _fit_report(result, model: str, n: int) -> dict:
    params = result.params
    report = {"model": model, "n": n}
    if hasattr(params, "beta"):
        report["beta"] = [float(b) for b in params.beta]
    else:
        report["xi"] = float(params.xi)
    report["sigma"] = float(params.sigma)
    report["gamma"] = float(params.gamma)
    report["m"] = "inf" if params.gamma == 0.0 else float(1.0 / params.gamma)
    report["loglik"] = float(result.loglik)
    report["at_corner"] = bool(result.at_corner)
    report["converged"] = bool(result.converged)
    report["n_iter"] = int(result.n_iter)
    return report


def _print_report(report: dict, fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
        return
    for key, value in report.items():
        if isinstance(value, float):
            value = f"{value:.10g}"
        elif isinstance(value, list):
            value = " ".join(f"{v:.10g}" for v in value)
        print(f"{key}: {value}")


def cmd_fit(args) -> int:
    if args.regression:
        design, y = _read_regression(args.input)
        n = y.size
        if args.model == "narrow":
            result = fit_narrow_regression(design, y)
        else:
            result = fit_wide_regression(design, y)
    else:
        y = _read_numbers(args.input)
        n = y.size
        result = fit_narrow(y) if args.model == "narrow" else fit_wide(y)
    _print_report(_fit_report(result, args.model, n), args.format)
    return 0


# ---------------------------------------------------------------------------
# risk


def _a_grid(a_max: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ValueError("step must be positive")
    if a_max < 0:
        raise ValueError("a-max must be nonnegative")
    count = int(round(a_max / step))
    grid = np.round(np.arange(count + 1) * step, 12)
    return grid[grid <= a_max + 1e-12]


_SVG_STYLE = {"narrow": ":", "wide": ":", "ratio": "-", "eb": "-",
              "vague": "-", "bayes": "-", "pre": "--", "lim": "--"}


def _write_svg(curves: list[RiskCurve], path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for curve in curves:
        style = _SVG_STYLE.get(curve.rule.kind, "-.")
        ax.plot(curve.a_grid, curve.values, style, label=curve.rule.name)
    ax.set_xlabel("a")
    ax.set_ylabel("risk")
    ax.legend(loc="upper left", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_risk(args) -> int:
    rules = [rule_by_name(name.strip()) for name in args.rules.split(",")]
    grid = _a_grid(args.a_max, args.step)
    curves = risk_table(grid, rules)
    if args.estimand is not None:
        e = estimand_by_name(args.estimand)
        null = NullPoint(0.0, args.sigma0)
        curves = [RiskCurve(c.a_grid,
                            [estimand_risk(e, null, c.rule, float(a))
                             for a in c.a_grid], c.rule)
                  for c in curves]
    text = format_risk_csv(curves)
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.svg is not None:
        _write_svg(curves, args.svg)
    return 0


# ---------------------------------------------------------------------------
# tolerance


def cmd_tolerance(args) -> int:
    if args.n < 1:
        raise ValueError("n must be at least 1")
    if args.family != "mixture" and (args.k1 is not None or args.k2 is not None):
        raise ValueError("--k1/--k2 apply only to --family mixture")
    if args.family != "quasi-t" and args.c is not None:
        raise ValueError("--c applies only to --family quasi-t")

    a_star, delta_star, m_coef = tolerance_threshold()
    root_n = math.sqrt(args.n)
    print(f"family: {args.family}")
    print(f"n: {args.n}")
    if args.family == "t":
        print(f"a_star: {a_star:.4f}")
        print(f"delta_star: {delta_star:.4f}")
        print(f"m_coefficient: {m_coef:.4f}")
        print(f"m_min: {m_coef * root_n:.4f}")
    elif args.family == "mixture":
        if (args.k1 is None) != (args.k2 is None):
            raise ValueError("--k1 and --k2 must be given together")
        spec = T_CASE_MIXTURE if args.k1 is None else MixtureSpec(args.k1, args.k2)
        print(f"k1: {spec.k1:.4f}")
        print(f"k2: {spec.k2:.4f}")
        print(f"a_star: {a_star:.4f}")
        print(f"var_s_bound: {mixture_tolerance(spec, args.n):.6f}")
    else:
        c = DEFAULT_QUASI_T_CUTOFF if args.c is None else args.c
        kappa = quasi_t_kappa(c)
        print(f"c: {c:.4f}")
        print(f"kappa: {kappa:.4f}")
        print(f"gamma_bound: {quasi_t_tolerance(c, args.n):.6f}")
        print(f"kurtosis_derivative: {quasi_t_kurtosis_derivative(c):.4f}")
    return 0


# ---------------------------------------------------------------------------
# simulate

_SIM_RUNNERS = {
    "risk": run_risk_sim,
    "corner": run_corner_sim,
    "coverage": run_coverage_sim,
    "power": run_power_sim,
    "quantile-test": run_quantile_test_sim,
}


def _resolve_delta(args) -> float:
    if args.m is not None:
        if args.m <= 0:
            raise ValueError("m must be positive")
        implied = math.sqrt(args.n) / args.m
        if args.delta is not None and abs(args.delta - implied) > 1e-9:
            raise ValueError(
                f"--delta {args.delta} and --m {args.m} disagree: "
                f"m = sqrt(n)/delta implies delta = {implied:.6g}")
        return implied
    return 0.0 if args.delta is None else args.delta


def _summary_line(kind: str, rep) -> str:
    parts = [f"{kind}: n={rep.config['n']} delta={rep.config['delta']:.4g}"]
    if kind == "risk":
        parts += [f"{r['rule']}={r['n_mse']:.4f}" for r in rep.per_rule]
    elif kind == "corner":
        parts.append(f"corner_freq={rep.corner_freq:.4f}")
        parts.append(f"agreement={rep.agreement:.4f}")
    elif kind == "coverage":
        parts.append(f"coverage={rep.coverage:.4f}")
        parts.append(f"predicted={rep.extra['predicted_coverage']:.4f}")
    elif kind == "power":
        parts.append(f"rejection={rep.extra['rejection']:.4f}")
        parts.append(f"predicted={rep.extra['predicted_power']:.4f}")
    else:
        parts.append(f"rejection={rep.extra['rejection']:.4f}")
    parts.append(f"excluded={rep.excluded}")
    return " ".join(parts)


def cmd_simulate(args) -> int:
    delta = _resolve_delta(args)
    rules = tuple(name.strip() for name in args.rules.split(","))
    cfg = SimConfig(n=args.n, delta=delta, replicates=args.replicates,
                    seed=args.seed, estimand=args.estimand, rules=rules,
                    xi0=args.xi0, sigma0=args.sigma0, level=args.level,
                    bootstrap=args.bootstrap)
    rep = _SIM_RUNNERS[args.kind](cfg)
    if args.out is None:
        sys.stdout.write(rep.to_json())
        print(_summary_line(args.kind, rep), file=sys.stderr)
    else:
        with open(args.out, "w") as fh:
            fh.write(rep.to_json())
        print(_summary_line(args.kind, rep))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ttol",
        description="Tolerance analysis of the normal model against "
                    "heavy-tailed alternatives.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_fit = sub.add_parser(
        "fit", help="fit the narrow (normal) or wide (t) model to data",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p_fit.add_argument("input", help="data file: newline-separated numbers, "
                       "or CSV response,covariates with --regression")
    p_fit.add_argument("--model", choices=("narrow", "wide"), default="wide")
    p_fit.add_argument("--regression", action="store_true",
                       help="treat input as CSV with response first")
    p_fit.add_argument("--format", choices=("json", "text"), default="text")
    p_fit.set_defaults(func=cmd_fit)

    p_risk = sub.add_parser(
        "risk", help="tabulate risk functions R(a) over an a-grid",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p_risk.add_argument("--rules", default="narrow,wide,ratio,eb,vague,pre,lim",
                        help="comma-separated rule names")
    p_risk.add_argument("--a-max", type=float, default=5.0, dest="a_max")
    p_risk.add_argument("--step", type=float, default=0.05)
    p_risk.add_argument("--out", help="CSV output path (default stdout)")
    p_risk.add_argument("--estimand", default=None,
                        help="scale risks into estimand units "
                             "(2/3) b^2 R(a) + tau0^2")
    p_risk.add_argument("--sigma0", type=float, default=1.0)
    p_risk.add_argument("--svg", default=None, help="also write an SVG plot")
    p_risk.set_defaults(func=cmd_risk)

    p_tol = sub.add_parser(
        "tolerance", help="tolerance bounds for t, mixture, quasi-t families")
    p_tol.add_argument("--n", type=int, default=1, help="sample size")
    p_tol.add_argument("--family", choices=("t", "mixture", "quasi-t"),
                       default="t")
    p_tol.add_argument("--k1", type=float, default=None,
                       help="mixture curvature coefficient")
    p_tol.add_argument("--k2", type=float, default=None,
                       help="mixture variance coefficient")
    p_tol.add_argument("--c", type=float, default=None,
                       help="quasi-t plateau cutoff (default sqrt(6))")
    p_tol.set_defaults(func=cmd_tolerance)

    p_sim = sub.add_parser(
        "simulate", help="Monte Carlo runs validating the asymptotics",
        epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p_sim.add_argument("--kind", choices=tuple(_SIM_RUNNERS), required=True)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--delta", type=float, default=None,
                       help="local t-ness parameter (gamma_n = delta/sqrt(n))")
    p_sim.add_argument("--m", type=float, default=None,
                       help="degrees of freedom; interchangeable with "
                            "--delta via m = sqrt(n)/delta")
    p_sim.add_argument("--replicates", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--estimand", default="mean")
    p_sim.add_argument("--rules", default="narrow,wide,ratio,eb,vague,pre,lim")
    p_sim.add_argument("--level", type=float, default=0.05)
    p_sim.add_argument("--bootstrap", type=int, default=500)
    p_sim.add_argument("--xi0", type=float, default=0.0)
    p_sim.add_argument("--sigma0", type=float, default=1.0)
    p_sim.add_argument("--out", help="JSON output path (default stdout)")
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FitError as exc:
        return _fail(str(exc), 1)
    except RuntimeError as exc:
        return _fail(str(exc), 1)
    except (ValueError, OSError) as exc:
        return _fail(str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())

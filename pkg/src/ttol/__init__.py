"""Tolerance analysis of the normal model against heavy-tailed alternatives.

The package quantifies how much t-ness (gamma = 1/degrees-of-freedom) or
scale-mixture spread the two-parameter normal model tolerates before wide
three-parameter modelling pays off: maximum likelihood in both models with
exact handling of the gamma = 0 corner, compromise estimators that mix the
two fits, limiting risk functions with tolerance thresholds, and a Monte
Carlo engine validating the corner asymptotics at finite sample sizes.
"""

from .asymptotics import (
    KAPPA_T,
    Estimand,
    EstimandDerivatives,
    LocalModel,
    NullPoint,
    bias_and_noise,
    builtin_estimands,
    estimand_by_name,
    info_wide,
    info_wide_inv,
    info_wide_regression,
    info_wide_regression_inv,
    mad_estimand,
    mean_estimand,
    phi_W_integral,
    probability_estimand,
    quantile_estimand,
    regression_line_estimand,
    regression_quantile_estimand,
    sample_lambda,
    sample_limit_triple,
    score_at_null,
    sd_estimand,
)
from .compromise import (
    DEFAULT_LIMITED_D,
    DEFAULT_PRETEST_D,
    DEFAULT_RULES,
    EMPIRICAL_BAYES,
    LIMITED_TRANSLATION,
    NARROW,
    PRE_TEST,
    RATIO,
    VAGUE,
    WIDE,
    ARule,
    a_hat,
    as_rule,
    compromise_estimate,
    rule_by_name,
    weight,
)
from .densities import (
    DEFAULT_QUASI_T_CUTOFF,
    T_CASE_MIXTURE,
    MixtureSpec,
    QuasiTSpec,
    TParams,
    log_density_expansion,
    mixture_R,
    penalty_R,
    penalty_S,
    quasi_t_A,
    quasi_t_centering,
    quasi_t_kurtosis_derivative,
    quasi_t_log_density,
    quasi_t_permissible_interval,
    t_cdf,
    t_density,
    t_log_density,
    t_quantile,
)
from .estimation import (
    FitError,
    FitOptions,
    FitResult,
    RegressionDesign,
    RegressionParams,
    delta_switch,
    fit_narrow,
    fit_narrow_regression,
    fit_wide,
    fit_wide_regression,
    one_step_gamma,
    profile_loglik,
)
from .risk import (
    RiskCurve,
    abs_loss_transform,
    abs_normal_loss,
    coverage_narrow_ci,
    estimand_risk,
    format_risk_csv,
    mixture_tolerance,
    quasi_t_info,
    quasi_t_kappa,
    quasi_t_tolerance,
    risk_closed,
    risk_quadrature,
    risk_table,
    t_test_power,
    tolerance_threshold,
)
from .simulate import (
    SimConfig,
    SimReport,
    quantile_statistic_D,
    quantile_test_pvalue,
    run_corner_sim,
    run_coverage_sim,
    run_power_sim,
    run_quantile_test_sim,
    run_risk_sim,
    sample_local,
)

__version__ = "0.1.0"

__all__ = [
    "KAPPA_T",
    "Estimand",
    "EstimandDerivatives",
    "LocalModel",
    "NullPoint",
    "bias_and_noise",
    "builtin_estimands",
    "estimand_by_name",
    "info_wide",
    "info_wide_inv",
    "info_wide_regression",
    "info_wide_regression_inv",
    "mad_estimand",
    "mean_estimand",
    "phi_W_integral",
    "probability_estimand",
    "quantile_estimand",
    "regression_line_estimand",
    "regression_quantile_estimand",
    "sample_lambda",
    "sample_limit_triple",
    "score_at_null",
    "sd_estimand",
    "DEFAULT_LIMITED_D",
    "DEFAULT_PRETEST_D",
    "DEFAULT_RULES",
    "EMPIRICAL_BAYES",
    "LIMITED_TRANSLATION",
    "NARROW",
    "PRE_TEST",
    "RATIO",
    "VAGUE",
    "WIDE",
    "ARule",
    "a_hat",
    "as_rule",
    "compromise_estimate",
    "rule_by_name",
    "weight",
    "DEFAULT_QUASI_T_CUTOFF",
    "T_CASE_MIXTURE",
    "MixtureSpec",
    "QuasiTSpec",
    "TParams",
    "log_density_expansion",
    "mixture_R",
    "penalty_R",
    "penalty_S",
    "quasi_t_A",
    "quasi_t_centering",
    "quasi_t_kurtosis_derivative",
    "quasi_t_log_density",
    "quasi_t_permissible_interval",
    "t_cdf",
    "t_density",
    "t_log_density",
    "t_quantile",
    "FitError",
    "FitOptions",
    "FitResult",
    "RegressionDesign",
    "RegressionParams",
    "delta_switch",
    "fit_narrow",
    "fit_narrow_regression",
    "fit_wide",
    "fit_wide_regression",
    "one_step_gamma",
    "profile_loglik",
    "RiskCurve",
    "abs_loss_transform",
    "abs_normal_loss",
    "coverage_narrow_ci",
    "estimand_risk",
    "format_risk_csv",
    "mixture_tolerance",
    "quasi_t_info",
    "quasi_t_kappa",
    "quasi_t_tolerance",
    "risk_closed",
    "risk_quadrature",
    "risk_table",
    "t_test_power",
    "tolerance_threshold",
    "SimConfig",
    "SimReport",
    "quantile_statistic_D",
    "quantile_test_pvalue",
    "run_corner_sim",
    "run_coverage_sim",
    "run_power_sim",
    "run_quantile_test_sim",
    "run_risk_sim",
    "sample_local",
    "__version__",
]

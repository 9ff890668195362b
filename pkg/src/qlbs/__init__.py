"""Quantile-scale regression for length-biased Birnbaum-Saunders responses.

The response distribution is a length-biased Birnbaum-Saunders law
reparameterized so that a chosen quantile-scale parameter, rather than the
usual scale, carries the regression structure. Both that parameter and the
shape get their own linear predictors and link functions. The package covers
the distribution toolkit, maximum likelihood fitting with closed-form score,
residual diagnostics with simulated envelopes, and a Monte Carlo study
harness, plus a CLI wrapping all of it.
"""

from .data import Dataset, load_csv, write_csv
from .diagnostics import (
    DescriptiveStats,
    EnvelopeBand,
    EnvelopeError,
    ResidualSet,
    descriptive_stats,
    gcs_residuals,
    residual_moments,
    rq_residuals,
    simulated_envelope,
)
from .distribution import (
    LbsParams,
    QlbsParams,
    UMixture,
    kappa,
    kappa_logderiv,
    lbs_cdf,
    lbs_moments,
    lbs_pdf,
    lbs_quantile,
    lbs_sample,
    lbs_sf,
    q_from_theta,
    qlbs_cdf,
    qlbs_moments,
    qlbs_pdf,
    quantile_gap,
    theta_from_q,
    u_mixture_cdf,
    u_mixture_pdf,
    u_quantile,
)
from .links import Link, get_link
from .model import (
    BootstrapError,
    BootstrapResult,
    FitResult,
    ModelSpec,
    NotConvergedError,
    ParamVector,
    RankDeficiencyError,
    SingularInformationError,
    bootstrap_ci,
    conf_intervals,
    fit,
    hessian_analytic,
    hessian_numeric,
    initial_values,
    loglik,
    score,
)
from .numerics import (
    BracketError,
    ConvergenceError,
    Interval,
    RngStream,
    fd_gradient,
    find_root,
    integrate,
    norm_cdf,
    norm_logcdf,
    norm_pdf,
    norm_quantile,
)
from .study import (
    CellReport,
    StudyConfig,
    StudyReport,
    run_study,
    simulate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapError",
    "BootstrapResult",
    "BracketError",
    "CellReport",
    "ConvergenceError",
    "Dataset",
    "DescriptiveStats",
    "EnvelopeBand",
    "EnvelopeError",
    "FitResult",
    "Interval",
    "LbsParams",
    "Link",
    "ModelSpec",
    "NotConvergedError",
    "ParamVector",
    "QlbsParams",
    "RankDeficiencyError",
    "ResidualSet",
    "RngStream",
    "SingularInformationError",
    "StudyConfig",
    "StudyReport",
    "UMixture",
    "bootstrap_ci",
    "conf_intervals",
    "descriptive_stats",
    "fd_gradient",
    "find_root",
    "fit",
    "gcs_residuals",
    "get_link",
    "hessian_analytic",
    "hessian_numeric",
    "initial_values",
    "integrate",
    "kappa",
    "kappa_logderiv",
    "lbs_cdf",
    "lbs_moments",
    "lbs_pdf",
    "lbs_quantile",
    "lbs_sample",
    "lbs_sf",
    "load_csv",
    "loglik",
    "norm_cdf",
    "norm_logcdf",
    "norm_pdf",
    "norm_quantile",
    "q_from_theta",
    "qlbs_cdf",
    "qlbs_moments",
    "qlbs_pdf",
    "quantile_gap",
    "residual_moments",
    "rq_residuals",
    "run_study",
    "score",
    "simulate_dataset",
    "simulated_envelope",
    "theta_from_q",
    "u_mixture_cdf",
    "u_mixture_pdf",
    "u_quantile",
    "write_csv",
]

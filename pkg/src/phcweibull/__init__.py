"""Weibull lifetime estimation under Type-I progressively hybrid censoring."""

from .bayes import (
    GammaPriors,
    LossSpec,
    McmcConfig,
    PosteriorChain,
    hpd_interval,
    log_posterior_unnorm,
    mh_sample,
    point_estimate,
    tk_estimate,
)
from .censoring import (
    Case,
    CensoringScheme,
    PhcsSample,
    SchemeError,
    generate,
    read_sample_csv,
    removals_from_shorthand,
    write_sample_csv,
)
from .distributions import WeibullParams, cdf, pdf, quantile, sample_truncated
from .errors import (
    DivergentIterate,
    EmptyChain,
    EstimationError,
    HessianNotNegativeDefinite,
    InsufficientFailures,
    NonConvergence,
    SingularInformation,
)
from .likelihood import (
    ObservedInfo,
    asymptotic_intervals,
    loglik,
    observed_info,
    profile_beta,
    score,
)
from .mle import (
    LouisInfo,
    MlFit,
    SolverConfig,
    cond_exp_e1,
    cond_exp_e2,
    cond_exp_e3,
    cond_exp_e4,
    fit_em,
    fit_nr,
    fit_sem,
    louis_information,
)
from .shrinkage import SptConfig, spt_estimate, wald_statistic
from .simbench import (
    REFERENCE_INFORMATIVE_PRIORS,
    BenchReport,
    CellSpec,
    EstimatorSpec,
    coverage_check,
    elicit_priors,
    load_config,
    run_cell,
)

__version__ = "0.1.0"

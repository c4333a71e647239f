"""Fitting the four-parameter kappa distribution by ML, L-moments, and penalized ML."""

from .distribution import (
    DEFAULT_POLICY,
    BranchPolicy,
    K4Params,
    SpecialCase,
    Support,
    cdf,
    classify_special_case,
    log_pdf,
    pdf,
    quantile,
    sample,
    support,
)
from .errors import DegenerateDataError, MomentExistenceError
from .fitting import (
    LikelihoodWorkspace,
    OptimizerConfig,
    ProfileCI,
    StartStrategy,
    UNPENALIZED,
    covariance_matrix,
    fit_mle,
    fit_mple,
    neg_log_likelihood,
    penalized_nll,
    profile_likelihood_ci,
    return_level,
    standard_errors,
)
from .gof import (
    BootstrapPvalues,
    GofReport,
    SupportMismatchWarning,
    ad_statistic,
    bootstrap_pvalues,
    gof_report,
    ks_statistic,
    mpae,
)
from .lmoments import (
    LmeFailure,
    LmeOutcome,
    LMomentSet,
    fit_lme,
    moments_exist,
    params_from_lmoments,
    population_lmoments,
    sample_lmoments,
)
from .penalties import (
    HPenalty,
    KPenalty,
    PenaltyCombo,
    b_e_normalizer,
    combo_from_name,
    enumerate_combos,
    log_joint_penalty,
    penalty_h,
    penalty_k,
)
from .results import FitResult
from .simulation import (
    CellStats,
    SimConfig,
    SimReport,
    campaign,
    campaign_csv,
    campaign_table,
    resolve_method,
    run_study,
)

__version__ = "0.1.0"

"""Two-arm experimental designs, MSE criteria, and tail-criterion simulation."""

from .designs import (
    Allocation,
    BlockStructure,
    CovMatrix,
    DesignError,
    DesignSpec,
    build_blocks_bivariate,
    build_blocks_univariate,
    cov_block_closed,
    cov_crd_closed,
    cov_empirical,
    design_cov,
    design_mean,
    enumerate_design,
    find_perfect_balance,
    quadratic_form,
    sample_allocation,
    validate_allocation,
)
from .estimator import (
    PotentialOutcomes,
    estimand_tau,
    mse_over_design,
    observed_responses,
    tau_hat,
    tau_hat_group_means,
)
from .responses import (
    CovariateSpec,
    MomentProfile,
    ResponseModel,
    central_moments,
    default_covariates,
    default_model,
    draw_covariates,
    draw_response,
    mean_pair,
    moment_profile,
)
from .criteria import (
    TailTerms,
    lower_bound_rate,
    mean_mse,
    q_q,
    q_tilde,
    tail_terms,
    var_mse_analytic,
    worst_case_block_closed,
    worst_case_continuous,
    worst_case_corner_brute,
)
from .simulate import SimConfig, SimResultRow, run_cell, run_grid

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

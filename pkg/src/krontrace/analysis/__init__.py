from .bounds import (
    RankOneBudget,
    adaptive_query_lower_bound,
    all_ones_lower_bound_samples,
    gamma_assumption_samples,
    psd_sample_factor,
    rankone_expected_partial_trace_norm,
    rankone_variance_budget,
    wishart_mse,
)
from .moments import MomentTensor, OracleMoments, moment_oracle
from .variance import (
    VarianceReport,
    exact_variance,
    psd_worst_case_bound,
    required_samples,
    second_moment_formula,
    variance_report,
    variance_upper_bound_no_abar,
)

__all__ = [
    "MomentTensor",
    "OracleMoments",
    "RankOneBudget",
    "VarianceReport",
    "adaptive_query_lower_bound",
    "all_ones_lower_bound_samples",
    "exact_variance",
    "gamma_assumption_samples",
    "moment_oracle",
    "psd_sample_factor",
    "psd_worst_case_bound",
    "rankone_expected_partial_trace_norm",
    "rankone_variance_budget",
    "required_samples",
    "second_moment_formula",
    "variance_report",
    "variance_upper_bound_no_abar",
    "wishart_mse",
]

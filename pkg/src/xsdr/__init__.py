"""Expectile-assisted inverse regression for sufficient dimension reduction."""

from .benchmark import SimConfig, gen_model, loocv_delta_tau, run_simulation, run_sweep
from .expectile import (
    KernelConfig,
    KernelExpectileRegressor,
    bandwidth_heuristic,
    expectile_matrix,
    fit_ker,
    gram_matrix,
    phi_tau,
    sample_expectile,
)
from .inverse import (
    dr_matrix,
    estimate_directions,
    pooled_marginal,
    projective_resampling,
    save_matrix,
    sir_matrix,
    slice_equal_count,
    slice_moments,
    univariate_candidate,
)
from .linalg import inv_sqrt_psd, sample_unit_sphere, standardize, subspace_distance
from .order import estimate_order, lambda_stat, permutation_test
from .sdr import ExpectileSDR, SdrOptions, fit_sdr
from .tuning import dcor2, select_lambda

__version__ = "0.1.0"

__all__ = [
    "bandwidth_heuristic",
    "dcor2",
    "dr_matrix",
    "estimate_directions",
    "estimate_order",
    "expectile_matrix",
    "ExpectileSDR",
    "fit_ker",
    "fit_sdr",
    "gen_model",
    "gram_matrix",
    "inv_sqrt_psd",
    "KernelConfig",
    "KernelExpectileRegressor",
    "lambda_stat",
    "loocv_delta_tau",
    "permutation_test",
    "phi_tau",
    "pooled_marginal",
    "projective_resampling",
    "run_simulation",
    "run_sweep",
    "sample_expectile",
    "sample_unit_sphere",
    "save_matrix",
    "SdrOptions",
    "select_lambda",
    "SimConfig",
    "sir_matrix",
    "slice_equal_count",
    "slice_moments",
    "standardize",
    "subspace_distance",
    "univariate_candidate",
]

"""Confidence-inducing priors for small Bayesian classifiers.

A library plus CLI for priors placed directly on a classifier's predicted
probabilities (Dirichlet, its clipped variant, per-class Normals over
log-probabilities, and an explicit confidence prior), tempered posteriors
over small MLPs, HMC/SGHMC samplers, and the closed-form analyses that go
with them (gradient-direction phase diagrams, simplex gradient flow,
cold-likelihood CDFs and Wasserstein curves, divergence slices).
"""

from ._backend import BACKEND
from ._version import VERSION as __version__
from .analytics import (
    FlowResult,
    GradientField,
    SimplexPoint,
    bottom_half_mass,
    cdf_cold,
    cdf_upper_bound,
    critical_alpha,
    dirichlet_posterior_field,
    divergence_slice,
    empirical_sup_distance,
    phase_diagram,
    rejection_sample_cold,
    rejection_sample_upper,
    sample_flow_density,
    simplex_flow,
    true_class_update,
    wasserstein_cold_vs_upper,
)
from .datasets import DatasetSpec, ToyDataset, generate_dataset
from .evaluation import (
    BoundaryGrid,
    Ensemble,
    Metrics,
    RHatResult,
    decision_boundary_grid,
    evaluate,
    function_r_hat,
    logprob_cdf,
    parameter_r_hat,
    posterior_predictive,
    prior_confidence_sweep,
    r_hat,
    split_r_hat,
)
from .exceptions import ConfigurationError, DimensionError, NonFiniteError
from .network import (
    NetworkConfig,
    ParamVector,
    Prediction,
    forward,
    grad_log_density,
    init_params,
    log_prob_matrix,
)
from .priors import (
    ImproperPosteriorWarning,
    NDGParams,
    PosteriorSpec,
    PriorSpec,
    assemble_log_posterior,
    confidence_logpdf,
    dirclip_bound,
    dirclip_logpdf,
    dirichlet_logpdf,
    ndg_factorized,
    ndg_logpdf,
    ndg_params,
    ndg_quadratic_coefficients,
    posterior_flags,
    prediction_grad,
    prediction_logpdf,
)
from .samplers import (
    HMCResult,
    HMCRunConfig,
    PosteriorTarget,
    RunLog,
    SamplerState,
    Schedule,
    SGHMCRunConfig,
    hmc_sample,
    run_chains,
    schedule_at,
    sghmc_epoch,
)

__all__ = [
    "BACKEND",
    "__version__",
    "BoundaryGrid",
    "ConfigurationError",
    "DatasetSpec",
    "DimensionError",
    "Ensemble",
    "FlowResult",
    "GradientField",
    "HMCResult",
    "HMCRunConfig",
    "ImproperPosteriorWarning",
    "Metrics",
    "NDGParams",
    "NetworkConfig",
    "NonFiniteError",
    "ParamVector",
    "PosteriorSpec",
    "PosteriorTarget",
    "Prediction",
    "PriorSpec",
    "RHatResult",
    "RunLog",
    "SamplerState",
    "Schedule",
    "SGHMCRunConfig",
    "SimplexPoint",
    "ToyDataset",
    "assemble_log_posterior",
    "bottom_half_mass",
    "cdf_cold",
    "cdf_upper_bound",
    "confidence_logpdf",
    "critical_alpha",
    "decision_boundary_grid",
    "dirclip_bound",
    "dirclip_logpdf",
    "dirichlet_logpdf",
    "dirichlet_posterior_field",
    "divergence_slice",
    "empirical_sup_distance",
    "evaluate",
    "forward",
    "function_r_hat",
    "generate_dataset",
    "grad_log_density",
    "hmc_sample",
    "init_params",
    "log_prob_matrix",
    "logprob_cdf",
    "ndg_factorized",
    "ndg_logpdf",
    "ndg_params",
    "ndg_quadratic_coefficients",
    "parameter_r_hat",
    "phase_diagram",
    "posterior_flags",
    "posterior_predictive",
    "prediction_grad",
    "prediction_logpdf",
    "prior_confidence_sweep",
    "r_hat",
    "rejection_sample_cold",
    "rejection_sample_upper",
    "run_chains",
    "sample_flow_density",
    "schedule_at",
    "sghmc_epoch",
    "simplex_flow",
    "split_r_hat",
    "true_class_update",
    "wasserstein_cold_vs_upper",
]

"""Evolutionary-strategies gradient estimation guided by surrogate gradients."""

from .analysis import (
    QuadraticForm,
    error_objective,
    monte_carlo_error_profile,
    normalized_bias,
    normalized_variance,
    optimal_hyperparameters,
    regime_boundaries,
    sgd_equivalence_check,
)
from .estimator import (
    NonFiniteObjectiveError,
    estimate_gradient,
    expected_update,
    vanilla_gradient,
)
from .sampler import StreamKey, antithetic_pair, covariance_trace, sample_perturbation
from .subspace import DegenerateSubspaceError, SubspaceBuffer, basis_of, correlation
from .types import (
    ConfigError,
    ErrorProfile,
    GradientEstimate,
    RunRecord,
    SearchConfig,
    SubspaceBasis,
    SubspaceTooLargeError,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateSubspaceError",
    "ErrorProfile",
    "GradientEstimate",
    "NonFiniteObjectiveError",
    "QuadraticForm",
    "RunRecord",
    "SearchConfig",
    "StreamKey",
    "SubspaceBasis",
    "SubspaceBuffer",
    "SubspaceTooLargeError",
    "antithetic_pair",
    "basis_of",
    "correlation",
    "covariance_trace",
    "error_objective",
    "estimate_gradient",
    "expected_update",
    "monte_carlo_error_profile",
    "normalized_bias",
    "normalized_variance",
    "optimal_hyperparameters",
    "regime_boundaries",
    "sample_perturbation",
    "sgd_equivalence_check",
    "validate_config",
    "vanilla_gradient",
]

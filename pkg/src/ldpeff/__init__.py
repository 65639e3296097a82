"""Fisher-information-optimal local differential privacy mechanisms and efficient private estimation."""

__version__ = "0.1.0"

from .errors import DomainError, InvalidChannelError, NumericalError, ResourceLimitError
from .estimators import TwoStepConfig, TwoStepResult, mle_from_counts, private_mle, two_step_estimate, warner_estimator
from .fisher import continuity_bound, fisher_info_private, g_theta, private_score
from .kernels import Channel, LaplaceMechanism, make_rng, randomized_response, validate_alpha_dp
from .models import (
    ContinuousModel,
    DiscreteModel,
    bernoulli_model,
    binomial_model,
    discretize,
    gaussian_location_model,
    model_from_name,
    tabulated_model,
)
from .staircase import binomial2_reference, binomial2_threshold, solve_optimal_mechanism

__all__ = [
    "__version__",
    "Channel",
    "ContinuousModel",
    "DiscreteModel",
    "DomainError",
    "InvalidChannelError",
    "LaplaceMechanism",
    "NumericalError",
    "ResourceLimitError",
    "TwoStepConfig",
    "TwoStepResult",
    "bernoulli_model",
    "binomial2_reference",
    "binomial2_threshold",
    "binomial_model",
    "continuity_bound",
    "discretize",
    "fisher_info_private",
    "g_theta",
    "gaussian_location_model",
    "make_rng",
    "mle_from_counts",
    "model_from_name",
    "private_mle",
    "private_score",
    "randomized_response",
    "solve_optimal_mechanism",
    "tabulated_model",
    "two_step_estimate",
    "validate_alpha_dp",
    "warner_estimator",
]

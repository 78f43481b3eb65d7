"""Label information carried by subsets of binary representation components."""

from .bitdata import LabeledBitDataset, LabelSpace, load_idx, to_parity_labels
from .estim import EstimatorConfig, InformationProfile, ProfileEstimator, estimate_profile
from .exceptions import (ConfigError, ConsistencyError, DegenerateConditioningError, DomainError,
                         FormatError, InfoviewsError, SizeError, TrainingDivergedError)
from .oracle import AlphaModel, ExactJoint, alpha_profile, exact_profile
from .separator import LinearSeparator, verify_theorem1

__version__ = "0.1.0"

__all__ = [
    "AlphaModel", "ConfigError", "ConsistencyError", "DegenerateConditioningError", "DomainError",
    "EstimatorConfig", "ExactJoint", "FormatError", "InformationProfile", "InfoviewsError",
    "LabelSpace", "LabeledBitDataset", "LinearSeparator", "ProfileEstimator", "SizeError",
    "TrainingDivergedError", "alpha_profile", "estimate_profile", "exact_profile",
    "load_idx", "to_parity_labels", "verify_theorem1",
]

"""Federated unlearning via Pareto improvement and null-space projected
expansion."""

from .config import RunConfig, parse_config
from .estimator import FUParetoClassifier
from .federation import Federation, RoundRecord, audit_armijo, audit_modes
from .losses import LossSpec
from .mgda import MgdaResult, min_norm
from .model import Batch, ModelSpec

__all__ = [
    "Batch", "FUParetoClassifier", "Federation", "LossSpec", "MgdaResult",
    "ModelSpec", "RoundRecord", "RunConfig", "audit_armijo", "audit_modes",
    "min_norm", "parse_config",
]

__version__ = "0.1.0"

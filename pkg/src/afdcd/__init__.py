"""Dense contrastive feature-distillation losses with analytical gradients,
brute-force oracles, and a small deterministic training harness.
"""
from .backend import active_backend, have_compiled
from .losses import ContrastConfig, DistanceKind, LossBundle

__version__ = "0.1.0"

__all__ = [
    "ContrastConfig",
    "DistanceKind",
    "LossBundle",
    "active_backend",
    "have_compiled",
    "__version__",
]

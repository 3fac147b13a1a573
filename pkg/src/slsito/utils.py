"""
slsito utility functions.

This module provides access to common utility functions used throughout slsito.
"""

# Import common utilities from core
from .core.utils import (
    RNG_ALGORITHM,
    decay_factors,
    ensemble_stats,
    get_task_chunks,
    path_rng,
    z_score,
)

__all__ = [
    "RNG_ALGORITHM",
    "decay_factors",
    "ensemble_stats",
    "get_task_chunks",
    "path_rng",
    "z_score",
]

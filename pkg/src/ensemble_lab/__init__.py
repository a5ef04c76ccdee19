"""Microcanonical and macroscopic entropy of mean-field particle systems.

Finite-N tail entropies, free-energy minimization on grids, Legendre
duality between the two, and critical inverse temperatures.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BracketError,
    ConfigError,
    ConvergenceError,
    DataError,
    EnsembleLabError,
    InsufficientDataError,
    ModelError,
    PreconditionError,
)
from .model import ModelSpec, load_model, model_from_dict  # noqa: E402

__all__ = [
    "__version__",
    "ModelSpec",
    "load_model",
    "model_from_dict",
    "EnsembleLabError",
    "ConfigError",
    "PreconditionError",
    "DataError",
    "ModelError",
    "InsufficientDataError",
    "BracketError",
    "ConvergenceError",
]

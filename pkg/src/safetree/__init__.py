"""Learn interpretable safety constraints from demonstrations.

Pipeline: ingest expert trajectories into a feature dataset, fit a
one-class decision tree over it, extract a DNF constraint formula from the
tree, use the formula as a binary cost inside Lagrangian policy
optimization on the bundled navigation task, and prune the formula with
the violation statistics gathered during training.
"""

from .errors import (
    ConfigError,
    DomainError,
    InputError,
    ParseError,
    SchemaError,
    TrainingDiverged,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "InputError",
    "ParseError",
    "SchemaError",
    "TrainingDiverged",
    "__version__",
]

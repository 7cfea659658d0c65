"""Pathwise stochastic optimal control: value processes, drifts and their identities."""

__version__ = "0.1.0"

from .errors import (BudgetExceededError, ConfigurationError, NumericalRangeError, PreconditionError,
                     ProvenanceWarning)
from .fields import ScalarField, SpaceGrid, VectorField
from .pathwise_value import ValueField, solve, solve_by_shift, solve_by_splitting
from .problem import ProblemSpec, make_entry
from .randomness import BrownianPath, TimeGrid, generate_path, refine_path

__all__ = [
    "BrownianPath", "BudgetExceededError", "ConfigurationError", "NumericalRangeError", "PreconditionError",
    "ProblemSpec", "ProvenanceWarning", "ScalarField", "SpaceGrid", "TimeGrid", "ValueField", "VectorField",
    "generate_path", "make_entry", "refine_path", "solve", "solve_by_shift", "solve_by_splitting",
]

"""Exception and warning types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, problem, or experiment configuration."""


class NumericalRangeError(ArithmeticError):
    """A quantity left the range where it can be represented (e.g. underflow)."""


class BudgetExceededError(RuntimeError):
    """An exhaustive search would exceed its evaluation budget."""


class PreconditionError(ValueError):
    """Inputs violate a documented precondition of a check."""


class ProvenanceWarning(UserWarning):
    """Data outside the standing assumptions (e.g. unbounded potentials) was used."""

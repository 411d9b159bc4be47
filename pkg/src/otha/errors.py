"""Exception types shared across the package."""


class InfeasibleInputError(ValueError):
    """Inputs are structurally valid but mutually inconsistent (e.g. mass mismatch)."""


class DegenerateInputError(ValueError):
    """Inputs lie in a degenerate configuration for which the result is undefined."""


class OutOfDomainError(ValueError):
    """Evaluation requested outside the domain of definition."""

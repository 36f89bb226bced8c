"""Exception types shared across the toolkit."""


class RejectedInputError(ValueError):
    """An argument violates a documented precondition."""


class ResourceLimitError(RuntimeError):
    """A computation would exceed its declared resource cap."""

    def __init__(self, message: str, size: int | None = None):
        super().__init__(message)
        self.size = size


class DegenerateDomainError(RuntimeError):
    """A Monte Carlo measure estimate is indistinguishable from zero."""


class SingularPointError(ValueError):
    """Evaluation requested at the group identity where the sum may diverge."""

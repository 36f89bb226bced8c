"""Numerical verification toolkit for affine-frame bound inequalities,
lattice counting estimates, and automorphism-family expansiveness on
concrete frequency groups (Euclidean lines and planes with full-rank
lattices, and the Gabor frequency group)."""

__version__ = "0.1.0"

from .errors import (DegenerateDomainError, RejectedInputError,
                     ResourceLimitError, SingularPointError)

__all__ = [
    "__version__",
    "RejectedInputError",
    "ResourceLimitError",
    "DegenerateDomainError",
    "SingularPointError",
]

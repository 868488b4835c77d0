"""Conformal flows of spherical caps, capillary surfaces and their index forms."""
from .config import DEFAULT, Tolerances
from .errors import CapflowError, DegenerateInputError, DomainError, InvariantViolation, NumericError

__all__ = [
    "DEFAULT",
    "Tolerances",
    "CapflowError",
    "DomainError",
    "DegenerateInputError",
    "NumericError",
    "InvariantViolation",
]
__version__ = "0.1.0"

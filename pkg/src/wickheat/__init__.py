"""Chaos-expansion solver for parabolic equations with Wick-product random
potentials: weak solutions for bounded chaos potentials, mollifier
regularization of singular ones, and very-weak-solution diagnostics."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    DomainError,
    NotApplicableError,
    NumericalError,
    SequencingError,
    ShapeError,
    SizeError,
    ValidationError,
)

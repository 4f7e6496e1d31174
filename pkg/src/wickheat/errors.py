"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad user input: malformed config, mismatched shapes, out-of-range data."""


class ShapeError(ValidationError):
    """Grid or array shape mismatch between operands."""


class SizeError(ValidationError):
    """An enumeration would exceed its configured cap."""


class DomainError(ValueError):
    """A mathematical precondition is violated (e.g. a divergent series exponent)."""


class SequencingError(RuntimeError):
    """A triangular recursion was asked for a coefficient before its prerequisites."""


class NumericalError(RuntimeError):
    """A computation produced non-finite values or failed to converge."""


class NotApplicableError(ValueError):
    """A bound or formula was requested outside the regime it is derived for."""

"""Exception types raised across the package."""


class WavetankError(Exception):
    """Base class for all package errors."""


class InvalidIntervalError(WavetankError, ValueError):
    pass


class TooFewElementsError(WavetankError, ValueError):
    pass


class UnsupportedFamilyError(WavetankError, ValueError):
    pass


class ElementIndexError(WavetankError, IndexError):
    pass


class UnsupportedOrderError(WavetankError, ValueError):
    pass


class NotPositiveDefiniteError(WavetankError, ArithmeticError):
    pass


class BoundaryMismatchError(WavetankError, ValueError):
    pass


class SpaceMismatchError(WavetankError, ValueError):
    pass


class NonFiniteStateError(WavetankError, FloatingPointError):
    """Raised when a time integrator produces NaN/inf coefficients."""


class PointOutsideDomainError(WavetankError, ValueError):
    pass


class NoContractionError(WavetankError, RuntimeError):
    pass


class MaxIterExceededError(WavetankError, RuntimeError):
    pass


class OnBranchCutError(WavetankError, ValueError):
    pass


class TruncationUnconvergedError(WavetankError, RuntimeError):
    pass


class NoConvergenceError(WavetankError, RuntimeError):
    pass


class SupportOverflowError(WavetankError, ValueError):
    pass


class ConfigError(WavetankError, ValueError):
    pass


class InvalidParameterError(WavetankError, ValueError):
    pass

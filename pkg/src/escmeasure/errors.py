"""Exception hierarchy and the overflow marker shared by all modules."""


class EscMeasureError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(EscMeasureError, ValueError):
    """An argument is outside its admissible range."""

    def __init__(self, message, flag=None):
        super().__init__(message)
        self.flag = flag


class DomainError(ParameterError):
    """A point lies outside the domain where a quantity is defined."""


class NumericError(EscMeasureError, ArithmeticError):
    """An iteration or quadrature failed to converge.

    ``payload`` carries whatever diagnostics the caller may want to print.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}


class BranchError(NumericError):
    """Analytic continuation of a logarithm left its tract."""


class ContourError(NumericError):
    """An a-point lies on (or too close to) an integration contour."""


class _Overflow:
    """Singleton standing in for values beyond double range."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OVERFLOW"

    def __bool__(self):
        return False


OVERFLOW = _Overflow()


def is_overflow(value):
    return value is OVERFLOW

"""Exception hierarchy shared by every module.

``DataError`` subclasses signal bad input files or values (CLI exit code 2);
the rest are programming or configuration errors.
"""


class OneProxyError(Exception):
    """Base class for all package errors."""


class DataError(OneProxyError, ValueError):
    """Input data is malformed or violates a declared invariant."""


class InvalidGenotype(OneProxyError, ValueError):
    pass


class MalformedEncoding(DataError):
    pass


class SpaceTooLarge(OneProxyError):
    pass


class SpaceMismatch(OneProxyError, ValueError):
    pass


class DimensionMismatch(OneProxyError, ValueError):
    pass


class DegenerateDesign(OneProxyError, ArithmeticError):
    pass


class TooFewSamples(OneProxyError, ValueError):
    pass


class UnknownArchitecture(OneProxyError, KeyError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class OutOfRangeAccuracy(DataError):
    pass


class DuplicateGenotype(ParseError):
    pass


class NonpositiveLatency(ParseError):
    pass


class LengthMismatch(OneProxyError, ValueError):
    pass


class DegenerateInput(OneProxyError, ValueError):
    """A latency list is constant, so its ranking carries no information."""


class InfeasibleConstraint(OneProxyError):
    pass


class EmptyInput(OneProxyError, ValueError):
    pass


class PredictedLatencyRejected(OneProxyError, ValueError):
    pass


class BudgetExhausted(OneProxyError):
    pass

"""Exception types raised across the toolkit.

All of them derive from ``ValueError`` so callers that only care about
"bad input" can catch that.
"""


class TrafficVolError(ValueError):
    pass


class ParseError(TrafficVolError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoDataError(TrafficVolError):
    pass


class DomainError(TrafficVolError):
    pass


class DegenerateFitError(TrafficVolError):
    pass


class ConvergenceError(TrafficVolError):
    pass


class UndefinedCorrelationError(TrafficVolError):
    pass


class InsufficientDataError(TrafficVolError):
    pass

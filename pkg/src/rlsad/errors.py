"""Exception hierarchy shared across the package."""


class RlsadError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 1


class ConfigError(RlsadError, ValueError):
    exit_code = 2


class NonFiniteSampleError(RlsadError, ValueError):
    """A sample (or regressor) carried NaN/inf and was rejected."""


class UndefinedStatisticsError(RlsadError, ArithmeticError):
    """Z-score requested with fewer than two samples or zero variance."""


class SchemaError(RlsadError):
    exit_code = 3


class StreamError(RlsadError):
    """Time went backwards (or some other ordering violation)."""

    exit_code = 4


class RowError(RlsadError):
    """A row could not be parsed."""

    exit_code = 4

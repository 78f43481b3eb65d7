"""Exception hierarchy shared by every module."""


class InfoviewsError(Exception):
    """Base class for all errors raised by infoviews."""


class FormatError(InfoviewsError, ValueError):
    """A file does not follow the expected binary or text layout."""


class ConsistencyError(InfoviewsError, ValueError):
    """Two inputs that must agree (e.g. image and label counts) do not."""


class DomainError(InfoviewsError, ValueError):
    """A value lies outside the domain an operation is defined on."""


class SizeError(InfoviewsError, ValueError):
    """Exact enumeration requested on a problem that is too large."""


class DegenerateConditioningError(InfoviewsError, ArithmeticError):
    """Every importance weight underflowed; the conditional is undefined."""


class TrainingDivergedError(InfoviewsError, RuntimeError):
    """A trainer produced non-finite parameters or gradients."""


class ConfigError(InfoviewsError, ValueError):
    """An experiment config or command line is malformed (a usage error)."""

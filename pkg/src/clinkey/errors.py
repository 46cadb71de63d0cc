"""Exception hierarchy shared by all clinkey modules.

The CLI maps these onto exit codes: configuration errors are usage
problems (exit 2), data errors are problems with corpora or model
files (exit 3), numeric errors are floating-point failures (exit 4).
"""


class ClinkeyError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(ClinkeyError):
    """A parameter or call violates an operation's contract."""


class DataError(ClinkeyError):
    """A corpus, split, or model file is unusable as given."""


class NumericError(ClinkeyError):
    """A numeric computation produced non-finite values."""

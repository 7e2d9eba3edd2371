"""Exception hierarchy shared by the library and the CLI."""


class CosparseError(Exception):
    """Base class for all errors raised by :mod:`cosparse`."""

    exit_code = 1


class InvalidArgument(CosparseError, ValueError):
    exit_code = 2


class InvalidInput(CosparseError, ValueError):
    """A file or user-supplied operator could not be used."""

    exit_code = 2


class ConfigurationError(CosparseError, ValueError):
    exit_code = 2


class InfeasibleTarget(CosparseError):
    """The requested co-rank cannot be reached with the given rows."""

    exit_code = 3


class BudgetExceeded(CosparseError):
    """Exhaustive enumeration would exceed the configured budget."""

    exit_code = 3


class DegenerateSignal(CosparseError, ValueError):
    exit_code = 2

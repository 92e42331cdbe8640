"""Exception hierarchy shared by the library and the command line."""


class ReadoutError(Exception):
    """Base class for all errors raised by :mod:`qreadout`."""


class ConfigError(ReadoutError, ValueError):
    """Invalid parameters or configuration."""


class BudgetExceededError(ReadoutError):
    """A count grid would exceed the configured memory budget."""


class MassDeficitError(ReadoutError):
    """A truncated probability table lost more mass than allowed."""


class NotPSDError(ReadoutError, ValueError):
    """A Gram matrix has a clearly negative eigenvalue."""


class ConvergenceError(ReadoutError):
    """An iterative refinement did not reach its tolerance."""

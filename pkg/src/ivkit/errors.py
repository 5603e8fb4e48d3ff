"""Exception hierarchy shared by every ivkit module."""


class IVError(Exception):
    """Base class for all errors raised by ivkit."""


class ConfigurationError(IVError, ValueError):
    """Bad user input: unknown column, inconsistent flags, invalid option."""


class InsufficientDataError(IVError):
    """Too few complete rows to fit the requested model."""


class DesignError(IVError):
    """The exogenous design matrix is (numerically) rank deficient."""


class DomainError(IVError, ValueError):
    """An argument is outside the domain of a distribution or formula."""


class ConvergenceError(IVError, ArithmeticError):
    """An iterative routine exceeded its work limit."""


class DegenerateEstimatorError(IVError, ArithmeticError):
    """The estimator is undefined for the supplied k or design."""


class UnsupportedError(IVError, NotImplementedError):
    """The requested combination of options is not supported."""


class SearchLimitError(IVError):
    """A sample-size search could not reach its target below the cap."""

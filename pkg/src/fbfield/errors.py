"""Exception hierarchy shared by every module of the package."""


class FieldError(Exception):
    """Base class for all errors raised by ``fbfield``."""


class DomainError(FieldError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class PoleError(DomainError):
    """The gamma function was evaluated at a pole (zero or a negative integer)."""


class SingularityError(DomainError):
    """A moving-average kernel was evaluated at one of its singular points."""


class ToleranceError(FieldError, ArithmeticError):
    """An adaptive numerical routine could not reach its requested tolerance."""


class NotPositiveDefiniteError(FieldError, ArithmeticError):
    """Cholesky factorization failed even after the maximal jitter."""


class GridMismatchError(FieldError, ValueError):
    """Two ensembles or matrices that must share a grid do not."""


class SchemeError(FieldError, ValueError):
    """A moving-average discretization scheme is inconsistent."""


class InsufficientPathsError(FieldError, ValueError):
    """Too few sample paths for the requested statistic."""

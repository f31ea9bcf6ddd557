"""Exception and warning types raised by semiflow."""


class SemiflowError(Exception):
    """Base class for all semiflow errors."""


class ModelError(SemiflowError, ValueError):
    """Raised when a model descriptor or generator matrix is invalid."""


class DomainError(SemiflowError, ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class PoleError(DomainError):
    """Raised when a resolvent is requested at (or too near) an eigenvalue.

    The offending eigenvalue is kept on ``eigenvalue``.
    """

    def __init__(self, msg, eigenvalue=None):
        super().__init__(msg)
        self.eigenvalue = eigenvalue


class ExtensionPoleError(PoleError):
    """Raised when the meromorphic extension hits one of its poles."""


class SeriesDivergenceError(DomainError):
    """Raised when the Neumann series for the shifted resolvent does not converge."""


class ContourError(SemiflowError, ValueError):
    """Raised when a contour passes through (or encloses the wrong) poles."""


class StripBoundaryError(ContourError):
    """Raised when an eigenvalue sits on the boundary line Re(z) = -lambda."""


class LedgerError(SemiflowError, ValueError):
    """Raised when a constant of the ledger is undefined for the given parameters."""


class RegularityError(SemiflowError, ValueError):
    """Raised when the graded-norm order q is too small for the requested rate."""


class ConfigError(SemiflowError, ValueError):
    """Raised for invalid run configurations."""


class UnboundedSemigroupWarning(UserWarning):
    """The semigroup norm is still growing at the end of the scanned horizon."""


class FrequencyGuardWarning(UserWarning):
    """A frequency below the guard ``beta`` was used where ``|b| >= beta`` is expected."""

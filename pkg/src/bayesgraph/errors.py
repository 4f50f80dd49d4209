"""Exception types shared across the package."""


class BayesgraphError(Exception):
    """Base class for all package errors."""


class InputError(BayesgraphError):
    """Malformed user input (bad CSV, inconsistent options, invalid spec)."""


class NotPositiveDefiniteError(BayesgraphError):
    """A matrix required to be symmetric positive definite is not."""


class ConvergenceFailureError(BayesgraphError):
    """Iterative completion failed to converge within the sweep budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotDecomposableError(BayesgraphError):
    """Closed-form normalizing constant requested for a non-chordal graph."""


class UnsupportedScaleError(BayesgraphError):
    """Monte Carlo normalizing constant requested for a scale matrix that
    is not a positive multiple of the identity."""


class MalformedKeyError(BayesgraphError):
    """Graph key bytes inconsistent with the declared node count."""


class StaleCacheError(BayesgraphError):
    """Marginal cache fingerprint does not match the supplied data."""


class DegenerateColumnError(BayesgraphError):
    """A data column is constant where variation is required."""


class DegenerateRatesError(BayesgraphError):
    """All birth/death rates vanished; the jump chain cannot move."""


class DegenerateRocError(BayesgraphError):
    """ROC is undefined because the reference graph is empty or full."""


class RequiresHistoryError(BayesgraphError):
    """Operation needs the per-iteration graph history (save_all traces)."""


class NoSamplesError(BayesgraphError):
    """Summarization requested on an empty trace."""


class TruncationError(BayesgraphError):
    """Truncated normal interval collapsed to zero numerical width."""

"""Exception types shared across the package."""


class SamplerError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SamplerError, ValueError):
    """A quantity left its valid domain (non-finite weight, zero mass, bad input)."""


class QuadratureError(SamplerError, RuntimeError):
    """A quadrature routine failed to converge to the requested tolerance."""


class NullSetError(DomainError):
    """The group-weight mass diverges at this point of the augmentation space."""


class DesignError(SamplerError, ValueError):
    """A design matrix or response vector is unusable (rank deficient, bad labels)."""


class ReducibleKernelError(SamplerError, RuntimeError):
    """A transition matrix is reducible where an irreducible chain is required.

    Attributes
    ----------
    labels : numpy.ndarray of int
        Component label per state, so callers can rerun the analysis per block.
    """

    def __init__(self, message, labels=None):
        super().__init__(message)
        self.labels = labels

"""Exception hierarchy shared by all satkit modules."""


class SatkitError(Exception):
    """Base class for all satkit errors."""


class InvalidArgumentError(SatkitError, ValueError):
    """An argument is outside its documented domain (zero dimension, bad exponent, ...)."""


class DimensionMismatchError(InvalidArgumentError):
    """Vector or matrix shapes are incompatible."""


class PreconditionError(SatkitError):
    """A documented precondition was violated (e.g. a non-orthogonal rotation input)."""


class DegenerateInstanceError(SatkitError):
    """A random instance was rank deficient where generic position was required."""


class InvalidWitnessError(SatkitError):
    """Witness data for the decoupling matrix failed its sign or normalization checks."""


class HeuristicMissError(SatkitError):
    """The local search failed on an instance too large for the exhaustive fallback."""


class InternalError(SatkitError):
    """An impossibility occurred, indicating an invariant violation upstream."""


class CertificateRefusedError(SatkitError):
    """Certification exceeded its bound; carries the measured values for diagnosis."""

    def __init__(self, message: str, isomorphism: float, complementation: float):
        super().__init__(message)
        self.isomorphism = isomorphism
        self.complementation = complementation


class ConfigError(SatkitError):
    """An experiment configuration violated a module invariant; names the invariant."""

"""Exception hierarchy shared by every module of the toolkit."""


class CatSqueezeError(Exception):
    """Base class for all toolkit errors."""


class CutoffError(CatSqueezeError, ValueError):
    """A Fock index does not fit inside the requested cutoff."""


class TruncationError(CatSqueezeError):
    """Population leaked past the Fock cutoff beyond the allowed tolerance."""

    def __init__(self, message, deficit=None, required_dim=None):
        super().__init__(message)
        self.deficit = deficit
        self.required_dim = required_dim


class InvalidStateError(CatSqueezeError, ValueError):
    """A density matrix violates hermiticity, trace or positivity."""


class DegenerateStateError(CatSqueezeError, ValueError):
    """A superposition collapses to the zero vector."""


class InvalidChannelError(CatSqueezeError, ValueError):
    """Channel parameters outside their physical range."""


class NoNegativityError(CatSqueezeError):
    """The Wigner function has no negative region, so the rate of decay is undefined."""

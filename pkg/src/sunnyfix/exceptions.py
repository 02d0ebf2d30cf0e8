class SunnyfixError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SunnyfixError, ValueError):
    """A point lies outside the closed convex set C the maps act on."""


class CertificationError(SunnyfixError):
    """A generator or contraction failed a nonexpansiveness/commutativity check."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class UnsupportedGeneratorError(SunnyfixError, TypeError):
    pass


class InfeasibleError(SunnyfixError):
    """The common fixed point set is empty."""


class ConfigError(SunnyfixError, ValueError):
    pass

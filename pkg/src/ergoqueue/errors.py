"""Exception hierarchy shared by all ergoqueue modules."""


class ErgoqueueError(Exception):
    """Base class for all package errors."""


class ConfigError(ErgoqueueError):
    """Invalid model or experiment configuration."""


class DomainError(ErgoqueueError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedExactError(DomainError):
    """No exact closed form exists; a Monte Carlo route must be used."""


class StabilityError(ErgoqueueError):
    """Operation requires a subcritical queue (E[S] < E[Z])."""


class CertifyError(ErgoqueueError):
    """Certificate construction failed (no contraction, no minorization)."""


class NumericsError(ErgoqueueError):
    """Numerical routine failed to converge or overflowed."""


class FitError(ErgoqueueError):
    """Rate fit impossible (degenerate or insufficient data)."""

"""Exception hierarchy shared by every saltbio module."""


class SaltbioError(Exception):
    """Base class for all domain errors raised by saltbio."""


class ConfigurationError(SaltbioError):
    pass


class ParameterError(SaltbioError, ValueError):
    pass


class DomainError(SaltbioError, ValueError):
    pass


class FramingError(SaltbioError):
    pass


class InvalidSymbolError(SaltbioError):
    """A 5-bit group with no entry in the reverse substitution table."""

    def __init__(self, index, symbol):
        super().__init__(f"invalid symbol {symbol!r} at group index {index}")
        self.index = index
        self.symbol = symbol


class NoInverseError(SaltbioError):
    pass


class FormatError(SaltbioError):
    pass


class ComparisonError(SaltbioError):
    pass


class ConflictError(SaltbioError):
    pass


class CapacityError(SaltbioError):
    pass


class NotFoundError(SaltbioError, KeyError):
    pass


class EamDenied(SaltbioError):
    """EAM gate refusal. ``reason`` is one of the fixed denial tags."""

    def __init__(self, reason, message=""):
        super().__init__(message or reason)
        self.reason = reason


class SelfCheckError(SaltbioError):
    pass


class ReferralError(SaltbioError):
    pass


class TransportError(SaltbioError):
    pass


class BackupError(SaltbioError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class WeakKeyWarning(UserWarning):
    """RSA primes below the recommended 2048-bit size."""

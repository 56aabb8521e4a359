"""Exception types raised across the package."""


class DPDSError(Exception):
    """Base class for all library errors."""


class DisconnectedGraph(DPDSError):
    pass


class InvalidWeight(DPDSError):
    pass


class EigenFailure(DPDSError):
    pass


class UnsupportedOptSet(DPDSError):
    pass


class NotAMinimizer(DPDSError):
    pass


class ThresholdViolation(DPDSError):
    pass


class IotaOutOfRange(DPDSError):
    pass


class NonFiniteState(DPDSError):
    """Raised when a trajectory blows up; ``at`` is the time or iteration."""

    def __init__(self, message, at=None):
        super().__init__(message)
        self.at = at


class NonZeroDualInit(DPDSError):
    pass


class InsufficientData(DPDSError):
    pass


class ConfigError(DPDSError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(ConfigError):
    def __init__(self, field, message=""):
        super().__init__(f"{field}: {message}" if message else field)
        self.field = field

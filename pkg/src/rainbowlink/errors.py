"""Exception types shared across the package."""


class RainbowLinkError(Exception):
    """Base class for all package errors."""


class DomainError(RainbowLinkError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(RainbowLinkError, ValueError):
    """A parameter set violates a structural invariant."""


class CapabilityError(RainbowLinkError, RuntimeError):
    """The requested evaluation is outside what the closed form supports."""

"""Rainbow-beam grant-free multiple access: beam model, analysis, sync and MAC simulation."""

from . import analysis, beam, linkchan, mac, sync
from .errors import CapabilityError, ConfigError, DomainError, RainbowLinkError

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "ConfigError",
    "DomainError",
    "RainbowLinkError",
    "analysis",
    "beam",
    "linkchan",
    "mac",
    "sync",
]

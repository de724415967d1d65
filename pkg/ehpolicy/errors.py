"""
Exception hierarchy shared by services and commands
"""


class EhPolicyError(Exception):
    """Base class for all ehpolicy errors"""
    exit_code = 1


class ConfigError(EhPolicyError):
    """Unknown registry name, unparseable spec string or bad config file"""
    exit_code = 2


class DomainError(EhPolicyError, ValueError):
    """Argument outside the mathematical domain of an operation"""
    exit_code = 2


class UnsupportedOperationError(EhPolicyError):
    """Operation is not defined for the given utility or arrival process"""
    exit_code = 2


class NumericalError(EhPolicyError):
    """Root bracketing or iteration failed to converge"""
    exit_code = 3


class FeasibilityError(NumericalError):
    """A policy asked for more power than the battery holds"""

    def __init__(self, message: str, slot: int | None = None,
                 battery: float | None = None, power: float | None = None):
        super().__init__(message)
        self.slot = slot
        self.battery = battery
        self.power = power

    def __str__(self):
        base = super().__str__()
        if self.slot is None:
            return base
        return f"{base} (slot={self.slot}, battery={self.battery!r}, power={self.power!r})"

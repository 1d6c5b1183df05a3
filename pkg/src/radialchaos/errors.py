"""Exception hierarchy.

Input/domain problems derive from ``InputError`` (CLI exit code 1), numerical
failures from ``NumericalError`` (CLI exit code 2).
"""


class RadialChaosError(Exception):
    """Base class for all package errors."""


class InputError(RadialChaosError, ValueError):
    """Invalid argument, precondition violation or malformed input."""


class ModelError(InputError):
    """A model could not be constructed (e.g. non-positive density)."""


class UnsupportedModelError(InputError):
    """Operation requires spatial geometry the model does not provide."""


class DomainError(InputError):
    """Spectral parameter outside the strip on which a symbol is declared."""


class ThresholdError(InputError):
    """Shift parameter does not exceed the chaos threshold."""


class NonconstancyError(InputError):
    """Multiplier symbol is constant, so no mixing certificate exists."""


class StateError(InputError):
    """Operation called before a required step (e.g. calibration)."""


class NumericalError(RadialChaosError, ArithmeticError):
    """A numerical procedure failed or lost accuracy."""


class TruncationError(NumericalError):
    """Truncation of a radial or spectral integral is too large."""


class ProbeZeroError(NumericalError):
    """Probe transform vanishes at a requested spectral point."""

    def __init__(self, lam, value):
        self.lam = lam
        self.value = value
        super().__init__(f"probe transform vanishes at lambda={lam!r} (|value|={abs(value):.3e})")

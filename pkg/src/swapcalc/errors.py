class SwapcalcError(Exception):
    """Base class for library errors."""


class ValidationError(SwapcalcError, ValueError):
    """An input failed range or shape validation."""


class ChainTooLongError(SwapcalcError):
    """The exhaustive sequence sum was asked for more sources than the cap."""


class UndefinedFidelityError(SwapcalcError, ZeroDivisionError):
    """Fidelity requested for a chain whose terminated efficiency is zero."""


class UnreachableFidelityError(SwapcalcError, ValueError):
    """No positive emission probability achieves the requested fidelity."""


class TruncationError(SwapcalcError):
    """A Fock amplitude would exceed the photon-number truncation."""

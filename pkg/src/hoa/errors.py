"""Exception hierarchy shared by every part of the package."""


class HoaError(Exception):
    """Base class for all errors raised by :mod:`hoa`."""


class ResourceCeilingError(HoaError):
    """A configured size ceiling (terms, Fock dimension) would be exceeded."""


class TermCeilingExceeded(ResourceCeilingError):
    pass


class DimensionCeilingExceeded(ResourceCeilingError):
    pass


class UnknownSymbolError(HoaError, KeyError):
    pass


class DslError(HoaError):
    """Parse or validation failure in a Hamiltonian source text.

    ``line`` and ``column`` are 1-based and may be ``None`` for errors that
    are not tied to a position (for example a failed Hermiticity check).
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class UndeclaredModeError(DslError):
    pass


class NonHermitianError(DslError):
    pass


class TailLossError(HoaError):
    """Coherent-state amplitude beyond the pump cutoff exceeds the budget."""

    def __init__(self, message, suggested_cutoff):
        super().__init__(message)
        self.suggested_cutoff = suggested_cutoff


class IntegratorError(HoaError):
    pass


class UndefinedCriterion(HoaError, ZeroDivisionError):
    """A ratio criterion was evaluated where its denominator vanishes."""

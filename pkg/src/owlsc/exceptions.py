"""Exception types raised by owlsc."""


class OwlscError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(OwlscError, ValueError):
    """A parameter lies outside its admissible range."""


class DimensionError(OwlscError, ValueError):
    """Array shapes are incompatible."""


class InvalidInputError(OwlscError, ValueError):
    """Input data is malformed (non-finite entries, zero-norm points, ...)."""


class InfeasibleError(OwlscError, ValueError):
    """An equality-constrained problem has no feasible point."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ParseError(OwlscError, ValueError):
    """A data or configuration file could not be parsed."""


class OutputError(OwlscError, OSError):
    """A result file could not be written."""

"""Exception types raised across the package."""


class DfmError(Exception):
    """Base class for all package errors."""


class DimensionError(DfmError, ValueError):
    pass


class ValidationError(DfmError, ValueError):
    """An input object violates a documented invariant."""


class IntegrationError(DfmError, RuntimeError):
    """Propagation drifted past the hard tolerance; use a smaller step."""


class ClusteringError(DfmError, ValueError):
    """Eigenvalues cannot be split into well-separated blocks."""


class BlockCrossingError(DfmError, RuntimeError):
    pass


class SelectionError(DfmError, ValueError):
    pass


class ModeError(DfmError, ValueError):
    """Coordinate mode is incompatible with the model or dimension."""


class StepTooCoarseError(DfmError, RuntimeError):
    pass


class IncompatibleBasePointError(DfmError, ValueError):
    pass


class NonlinearGeneratorError(DfmError, TypeError):
    """Only linear (degree-1) vector fields are supported by the closure engine."""


class ParseError(DfmError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})" if column is not None else f" (line {line})"
        super().__init__(message + where)

"""
Curvscope Error Hierarchy

Every failure raised by the library derives from CurvscopeError so the CLI can
map it onto an exit code (2 for usage/input problems, 1 for data or numerical
failures).
"""

from typing import Optional


class CurvscopeError(Exception):
    """Base class for all library errors."""
    pass


class InputError(CurvscopeError, ValueError):
    """Raised when input data is malformed (non-finite values, bad files)."""

    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message)
        self.row = row


class CsvParseError(InputError):
    """Raised when a point file cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class ParameterError(CurvscopeError, ValueError):
    """Raised when a hyperparameter or argument is out of its valid range."""
    pass


class DegenerateInputError(CurvscopeError):
    """Raised when the data admit no meaningful answer (coincident points, zero variance)."""
    pass


class NumericalError(CurvscopeError):
    """Raised when a numerical routine fails; carries the offending residual."""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message if residual is None else f"{message} (residual={residual:.3e})")
        self.residual = residual


class DomainError(NumericalError):
    """Raised when a value falls outside a function's domain (e.g. negative eigenvalue, fractional t)."""
    pass


class ConvergenceError(NumericalError):
    """Raised when an iteration does not converge within its cap."""
    pass


class GapError(NumericalError):
    """Raised when a spectral gap is too small to separate eigenpairs."""
    pass


class StartVectorOverlapError(NumericalError):
    """Raised when a power-method start vector misses the dominant eigenvector."""
    pass


class ContractError(CurvscopeError):
    """Raised when a block-encoding precondition is violated."""
    pass


class SubnormalizationError(ContractError):
    """Raised when the encoded matrix norm exceeds its subnormalization."""
    pass


class AmplificationRangeError(ContractError):
    """Raised when amplification would push the normalized block above 1/2."""
    pass


class PolynomialBoundError(ContractError):
    """Raised when a polynomial exceeds the 1/2 bound required for an eigenvalue transform."""
    pass


class PointEstimationError(CurvscopeError):
    """Wraps a failure for a single point of the cloud."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"point {index}: {cause}")
        self.index = index
        self.cause = cause

from typing import Iterable, List, Optional


class BranchingError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(BranchingError, ValueError):
    """Argument outside the domain of an operation."""


class AssumptionViolation(BranchingError, ValueError):
    """Offspring law or model rejected at construction."""


class ModelValidationError(BranchingError, ValueError):
    """Invalid model, probe or replicate parameters."""


class InversionError(BranchingError, ArithmeticError):
    """pgf inversion did not converge within the iteration cap."""

    def __init__(self, message: str, bracket_width: float, iterations: int):
        super().__init__(f"{message} (bracket width {bracket_width:.3e} after {iterations} iterations)")
        self.bracket_width = bracket_width
        self.iterations = iterations


class UnboundedDerivativeError(BranchingError, ArithmeticError):
    """Derivative is unbounded at the requested point."""


class CompositionError(BranchingError, ArithmeticError):
    """A per-law failure inside an n-fold composition."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"composition failed at environment index {index}: {cause}")
        self.index = index
        self.cause = cause


class UnsupportedLawError(BranchingError, TypeError):
    """Operation is only defined for laws exposing a stable index."""


class TruncationError(BranchingError, RuntimeError):
    """Exact budget exceeded while the asymptotic step is disabled."""


class ConfigError(BranchingError, ValueError):
    """Configuration parsing or validation failure."""

    def __init__(self, message: str, key_paths: Optional[Iterable[str]] = None):
        self.key_paths: List[str] = list(key_paths or [])
        if self.key_paths:
            message = f"{message}: {', '.join(self.key_paths)}"
        super().__init__(message)


class StorageError(BranchingError, OSError):
    """Reading or writing a run artifact failed."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path

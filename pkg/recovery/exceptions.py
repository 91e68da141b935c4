"""
Error hierarchy shared by the numerical library and the management commands.

Management commands map NumericalError to exit code 2 and every other
MatsenseError to exit code 1.
"""

from typing import Optional


class MatsenseError(Exception):
    """Base class for all errors raised by matsense."""


class ConfigurationError(MatsenseError, ValueError):
    """Invalid solver, dataset or experiment configuration."""


class DimensionMismatchError(MatsenseError, ValueError):
    """Operands have incompatible shapes."""


class IndexRangeError(MatsenseError, IndexError):
    """A batch index or measurement range falls outside the dataset."""


class FormatError(MatsenseError, ValueError):
    """A matrix file or dataset manifest is malformed."""


class NumericalError(MatsenseError):
    """Base class for numerical failures (exit code 2 on the command line)."""


class ConvergenceError(NumericalError):
    """An iterative method stopped at max_iter without meeting its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class DivergenceError(NumericalError):
    """An iterate became non-finite."""

    def __init__(self, message: str, epoch: int, step: Optional[int] = None):
        location = f"epoch {epoch}" if step is None else f"epoch {epoch}, step {step}"
        super().__init__(f"{message} at {location}")
        self.epoch = epoch
        self.step = step


class RankDeficiencyError(NumericalError):
    """A factor that must have full column rank does not."""


class DegenerateInputError(NumericalError):
    """An input with zero norm where a normalisation is required."""

"""
Error types for the dephasing simulator
"""

from typing import Iterable, Optional


class DephasingError(Exception):
    """Base class for every error raised by the simulator"""


class ConfigurationError(DephasingError, ValueError):
    """Invalid model, state or scenario configuration

    Carries every problem found, not only the first one.
    """

    def __init__(self, problems: Iterable[str]):
        self.problems = [str(p) for p in problems] or ['invalid configuration']
        super().__init__('; '.join(self.problems))


class InvalidTemperatureError(ConfigurationError):
    """Thermal state requested at a non-normalizable temperature"""


class InvalidPhaseIndexError(ConfigurationError):
    """Phase index m outside 0..r"""


class InvalidStateError(ConfigurationError):
    """Density matrix or distribution violates its invariants"""


class PreconditionError(DephasingError, ValueError):
    """Operation called outside its domain"""


class NoDecoherenceError(DephasingError):
    """The configuration never loses purity (t_D is infinite)"""

    t_D = float('inf')


class FitError(DephasingError):
    """Short-time fit could not be performed"""


class SizeCapError(DephasingError):
    """Full product space exceeds the oracle dimension cap"""

    def __init__(self, dimension: int, cap: int):
        self.dimension = dimension
        self.cap = cap
        super().__init__(f"oracle dimension D={dimension} exceeds cap {cap}")


class ToleranceFailure(DephasingError):
    """A compared value is outside its declared tolerance"""

    def __init__(self, failures: Iterable[str], table: Optional[str] = None):
        self.failures = list(failures)
        self.table = table
        super().__init__(f"{len(self.failures)} row(s) outside tolerance")

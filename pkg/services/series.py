"""
Sampled time series shared by the engine, the oracle, the fitters and CSV output
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from services.errors import InvalidStateError


def config_digest(document: Any) -> str:
    """Stable sha256 digest of a JSON-serializable configuration"""
    canonical = json.dumps(document, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


@dataclass(frozen=True)
class TimeSeries:
    """Sampled (t, value) pairs, times strictly increasing"""

    times: np.ndarray
    values: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        problems = []
        if times.ndim != 1 or values.ndim != 1:
            problems.append('times and values must be one-dimensional')
        elif times.shape != values.shape:
            problems.append(f"length mismatch: {times.size} times vs {values.size} values")
        elif times.size > 1 and not np.all(np.diff(times) > 0):
            problems.append('times must be strictly increasing')
        if problems:
            raise InvalidStateError(problems)
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def spacing(self) -> float:
        """Sampling interval (assumes a uniform grid)"""
        if self.times.size < 2:
            return 0.0
        return float(self.times[1] - self.times[0])

    def is_uniform(self, rtol: float = 1e-9) -> bool:
        if self.times.size < 3:
            return True
        steps = np.diff(self.times)
        return bool(np.allclose(steps, steps[0], rtol=rtol, atol=0.0))

    def window(self, t_lo: float, t_hi: float, include_lo: bool = True) -> 'TimeSeries':
        """Samples with t_lo <= t <= t_hi (t_lo < t when include_lo is False)"""
        lower = self.times >= t_lo if include_lo else self.times > t_lo
        mask = lower & (self.times <= t_hi)
        return TimeSeries(self.times[mask], self.values[mask], dict(self.meta))

    def with_values(self, values: np.ndarray, **meta) -> 'TimeSeries':
        merged = dict(self.meta)
        merged.update(meta)
        return TimeSeries(self.times, values, merged)

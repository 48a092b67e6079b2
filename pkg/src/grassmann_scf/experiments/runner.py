"""Shared pieces of the experiment drivers."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientData
from ..spectral import observed_rate


@dataclass
class SweepRecord:
    """Outcome of one solver at one grid point."""

    parameter: float
    solver: str
    iterations: int
    termination: str
    observed_rate: float = float("nan")
    final_energy: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.termination == "converged"


def parallel_map(fn, tasks, jobs: int = 1):
    """``map`` over independent tasks, in order, optionally across processes."""
    tasks = list(tasks)
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def safe_rate(steps, window: int, floor: float = 1e-14, skip_last: int = 0) -> float:
    try:
        return observed_rate(steps, window, floor=floor, skip_last=skip_last)
    except InsufficientData:
        return float("nan")


def chunks(n: int, parts: int):
    """Split ``range(n)`` into ``parts`` contiguous index arrays."""
    parts = max(1, min(parts, n))
    return [a for a in np.array_split(np.arange(n), parts) if len(a)]

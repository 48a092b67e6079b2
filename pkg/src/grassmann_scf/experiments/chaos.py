"""Bifurcation diagram of the undamped SCF map on the three-site chaos model."""
from __future__ import annotations

import numpy as np

from ..models import ChaosModel
from ..solvers import SolverConfig, roothaan_scf
from .config import ExperimentConfig
from .runner import parallel_map

COLUMNS = ("c1", "tail_index", "rho1", "period")
APERIODIC = 0
FAILED = -1


def start_vector(seed: int, n: int = 3) -> np.ndarray:
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(n)
    return phi / np.linalg.norm(phi)


def detect_period(densities: np.ndarray, window: int = 40, period_max: int = 64,
                  tol: float = 1e-9) -> int:
    """Smallest ``p <= period_max`` with ``|rho^{k+p} - rho^k| < tol`` over the last ``window`` iterates.

    Returns 0 when no such period exists.
    """
    rho = np.asarray(densities, dtype=float)
    for p in range(1, period_max + 1):
        if len(rho) < window + p:
            break
        a, b = rho[-window:], rho[-window - p:-p]
        if np.max(np.linalg.norm(a - b, axis=1)) < tol:
            return p
    return APERIODIC


def density_history(model: ChaosModel, phi0: np.ndarray, iterations: int, gap_tolerance: float = 1e-12):
    """Densities of ``P^1 .. P^iterations``, or ``(None, termination)`` on breakdown.

    A run that reaches an exact fixed point early is continued with that
    fixed point, which the map leaves unchanged.
    """
    P0 = np.outer(phi0, phi0)
    cfg = SolverConfig(beta=1.0, max_iterations=iterations, tolerance=1e-15,
                       gap_tolerance=gap_tolerance)
    trace = roothaan_scf(model, P0, cfg, N=1)
    if trace.termination not in ("converged", "max_iter"):
        return None, trace.termination
    rho = [np.diag(P) for P in trace.iterates[1:]]
    while len(rho) < iterations:
        rho.append(np.diag(trace.final))
    return np.array(rho[:iterations]), trace.termination


def _task(args):
    c1, c2, scale, phi0, iterations, tail, pmax, ptol, gap_tol = args
    model = ChaosModel(c1, c2, nonlinear_scale=scale)
    rho, term = density_history(model, phi0, iterations, gap_tol)
    if rho is None:
        return np.full(tail, np.nan), FAILED, term
    return rho[-tail:, 0].copy(), detect_period(rho, tail, pmax, ptol), term


def run_chaos_bifurcation(config: ExperimentConfig, jobs: int = 1):
    """Return ``(rows, periods, summary)``; ``periods[j]`` belongs to ``c1`` grid point ``j``."""
    grid = config.grid("c1")
    phi0 = start_vector(config.seed)
    it = config["iterations"]
    tail = config["tail"]
    tasks = [
        (float(c1), config["c2"], config["nonlinear_scale"], phi0, it, tail,
         config["period_max"], config["period_tolerance"], config["gap_tolerance"])
        for c1 in grid
    ]
    results = parallel_map(_task, tasks, jobs)
    rows, periods = [], []
    first_tail = it - tail + 1
    for c1, (rho1, period, _) in zip(grid, results):
        periods.append(period)
        for t, value in enumerate(rho1):
            rows.append({"c1": float(c1), "tail_index": first_tail + t, "rho1": float(value),
                         "period": int(period)})
    return rows, np.array(periods), summarize(grid, np.array(periods))


def first_bifurcation(grid, periods):
    """Last period-1 point before the first period-2 point, and that period-2 point."""
    grid = np.asarray(grid)
    two = np.flatnonzero(periods == 2)
    if not len(two):
        return float("nan"), float("nan")
    j = two[0]
    ones = np.flatnonzero(periods[:j] == 1)
    return (float(grid[ones[-1]]) if len(ones) else float("nan")), float(grid[j])


def summarize(grid, periods) -> dict:
    low, high = first_bifurcation(grid, periods)
    above = periods[np.asarray(grid) > high] if np.isfinite(high) else np.array([], dtype=int)
    return {
        "last_period1": low,
        "first_period2": high,
        "period4_points_above": int(np.sum(above == 4)),
        "aperiodic_points": int(np.sum(periods == APERIODIC)),
        "failed_points": int(np.sum(periods == FAILED)),
        "max_period": int(periods.max()) if len(periods) else 0,
    }

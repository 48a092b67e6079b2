"""Iteration counts of gradient descent and damped SCF on the tunable-gap toy model."""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ..manifold import random_projector
from ..models import ToyGapModel, toy_analytic_minimizer, toy_target
from ..solvers import SolverConfig, damped_scf, gradient_descent
from ..spectral import build_jacobian
from .config import ExperimentConfig, make_grid
from .runner import SweepRecord, chunks, parallel_map, safe_rate

SOLVERS = ("gradient", "scf")
COLUMNS = ("epsilon", "solver", "iterations", "terminated", "observed_rate")


def critical_epsilon(beta: float) -> float:
    """Smallest gap parameter for which damped SCF with step ``beta`` is linearly stable.

    Solves ``beta * lambda_max(J_SCF) = 2`` at the analytic minimizer.
    """
    def excess(eps):
        P, _ = toy_analytic_minimizer(eps)
        return beta * build_jacobian(ToyGapModel(eps), P, "scf").lambda_max - 2.0

    lo = 0.01 * np.sqrt(beta)
    return float(brentq(excess, lo, 1.0, xtol=1e-15, rtol=1e-14))


def estimated_critical_epsilon(beta: float) -> float:
    """Small-gap estimate ``sqrt(beta/4)`` from ``J_SCF ~ 1 + 1/(2 eps^2)``."""
    return float(np.sqrt(beta / 4.0))


# ------------------------------------------------------------------ engine

def _stack_project(P, X):
    PX = P @ X
    Y = PX + np.swapaxes(PX, 1, 2) - 2.0 * (PX @ P)
    return 0.5 * (Y + np.swapaxes(Y, 1, 2))


def _stack_norm(A):
    return np.sqrt(np.sum(A * A, axis=(1, 2)))


def batched_runs(epsilons, P0, solver: str, beta: float, tolerance: float,
                 max_iterations: int, gap_tolerance: float, window: int = 20):
    """Run one solver on many toy problems at once.

    Follows the loop of :func:`gradient_descent` / :func:`damped_scf` with the
    distance-to-minimizer criterion, vectorized over ``epsilons``.  Returns
    ``(iterations, terminations, last_steps)`` where ``last_steps[j]`` holds
    the final step distances of run ``j`` in order.
    """
    eps = np.asarray(epsilons, dtype=float)
    n = len(eps)
    M = np.stack([toy_target(e) for e in eps])
    ref = np.stack([toy_analytic_minimizer(e)[0] for e in eps])
    P = np.repeat(np.asarray(P0, dtype=float)[None], n, axis=0)
    prev = P.copy()
    iterations = np.full(n, max_iterations, dtype=int)
    termination = np.array(["max_iter"] * n, dtype=object)
    ring = np.full((n, window), np.nan)
    last_k = np.full(n, max_iterations - 1, dtype=int)
    active = np.arange(n)
    for k in range(max_iterations):
        if not len(active):
            break
        Pa = P[active]
        H = 2.0 * (Pa - M[active])
        stop = np.zeros(len(active), dtype=bool)
        if solver == "scf":
            w, V = np.linalg.eigh(H)
            degenerate = (w[:, 1] - w[:, 0]) <= gap_tolerance
            v = V[:, :, 0]
            Phi = v[:, :, None] * v[:, None, :]
            D = _stack_project(Pa, Phi - Pa)
            if degenerate.any():
                j = active[degenerate]
                iterations[j] = k
                termination[j] = "aufbau_degenerate"
                last_k[j] = k - 1
                stop |= degenerate
        else:
            D = -_stack_project(Pa, H)
        if k > 0:
            ring[active, k % window] = _stack_norm(Pa - prev[active])
        dist = _stack_norm(Pa - ref[active])
        done = (dist <= tolerance) & ~stop
        if done.any():
            j = active[done]
            iterations[j] = k
            termination[j] = "converged"
            last_k[j] = k
            stop |= done
        if k == max_iterations - 1:
            break
        prev[active] = Pa
        keep = ~stop
        Pt = Pa[keep] + beta * D[keep]
        w, V = np.linalg.eigh(Pt)
        bad = ((w > 0.5).sum(axis=1) != 1) | np.any(np.abs(w - 0.5) < 1e-12, axis=1)
        top = V[:, :, 1]
        Pn = top[:, :, None] * top[:, None, :]
        Pn = 0.5 * (Pn + np.swapaxes(Pn, 1, 2))
        idx = active[keep]
        if bad.any():
            j = idx[bad]
            iterations[j] = k
            termination[j] = "retraction_failure"
            last_k[j] = k
        P[idx[~bad]] = Pn[~bad]
        active = idx[~bad]
    last_steps = []
    for j in range(n):
        K = last_k[j]
        ks = np.arange(max(1, K - window + 1), K + 1)
        last_steps.append(ring[j, ks % window] if len(ks) else np.empty(0))
    return iterations, termination, last_steps


# ------------------------------------------------------------------- sweep

def sweep_grid(config: ExperimentConfig):
    """Main grid merged with the near-threshold zoom points, sorted ascending."""
    beta = config["beta"]
    main = config.grid("epsilon")
    eps_c = critical_epsilon(beta)
    if config["zoom_count"] > 0:
        x = make_grid(config["zoom_min"], config["zoom_max"], config["zoom_count"], "log")
        zoom = eps_c * (1.0 + x)
    else:
        zoom = np.empty(0)
    return np.unique(np.concatenate([main, zoom])), eps_c


def _generic_task(args):
    eps, P0, solver, beta, tol, max_it, gap_tol, window = args
    P_ref, _ = toy_analytic_minimizer(eps)
    cfg = SolverConfig(
        beta=beta, max_iterations=max_it, tolerance=tol,
        convergence_criterion="distance_to_reference", reference=P_ref,
        gap_tolerance=gap_tol,
    )
    run = gradient_descent if solver == "gradient" else damped_scf
    trace = run(ToyGapModel(eps), P0, cfg, N=1)
    steps = trace.step_array()[-window:]
    return trace.iterations, trace.termination, steps, trace.energies[-1] if trace.energies else np.nan


def _batched_task(args):
    eps, P0, solver, beta, tol, max_it, gap_tol, window = args
    its, terms, steps = batched_runs(eps, P0, solver, beta, tol, max_it, gap_tol, window)
    return list(zip(its, terms, steps))


def run_toy_sweep(config: ExperimentConfig, jobs: int = 1):
    """Return ``(records, summary)``; records ordered by epsilon then solver."""
    beta = config["beta"]
    tol = config["tolerance"]
    max_it = config["max_iterations"]
    gap_tol = config["gap_tolerance"]
    window = config["rate_window"]
    grid, eps_c = sweep_grid(config)
    P0 = random_projector(2, 1, config.seed)
    results = {}
    for solver in SOLVERS:
        if config["engine"] == "batched":
            parts = chunks(len(grid), jobs)
            tasks = [(grid[p], P0, solver, beta, tol, max_it, gap_tol, window) for p in parts]
            out = [r for chunk in parallel_map(_batched_task, tasks, jobs) for r in chunk]
            results[solver] = [(its, term, st, np.nan) for its, term, st in out]
        elif config["engine"] == "generic":
            tasks = [(e, P0, solver, beta, tol, max_it, gap_tol, window) for e in grid]
            results[solver] = parallel_map(_generic_task, tasks, jobs)
        else:
            raise ValueError(f"unknown engine {config['engine']!r}")
    records = []
    for j, eps in enumerate(grid):
        for solver in SOLVERS:
            its, term, steps, energy = results[solver][j]
            records.append(
                SweepRecord(float(eps), solver, int(its), str(term),
                            safe_rate(steps, min(window, len(steps))) if len(steps) >= 2 else np.nan,
                            float(energy))
            )
    return records, summarize(records, beta, eps_c)


def threshold_bracket(records, solver: str = "scf"):
    """Largest non-converged epsilon and the next converged one."""
    pts = sorted((r.parameter, r.converged) for r in records if r.solver == solver)
    failed = [e for e, ok in pts if not ok]
    if not failed:
        return float("nan"), pts[0][0] if pts else float("nan")
    low = max(failed)
    above = [e for e, ok in pts if ok and e > low]
    return low, (min(above) if above else float("nan"))


def loglog_slope(eps, counts, eps_c):
    x = np.log(np.asarray(eps) - eps_c)
    y = np.log(np.asarray(counts, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def offset_power_fit(eps, counts, eps_c):
    """Fit ``counts ~ A + B (eps - eps_c)^s`` in relative least squares; returns ``(s, A, B)``."""
    d = np.asarray(eps) - eps_c
    y = np.asarray(counts, dtype=float)

    def solve(s):
        X = np.stack([np.ones_like(d), d**s], axis=1) / y[:, None]
        coef, *_ = np.linalg.lstsq(X, np.ones_like(y), rcond=None)
        r = X @ coef - 1.0
        return float(r @ r), coef

    res = minimize_scalar(lambda s: solve(s)[0], bounds=(-3.0, -0.05), method="bounded",
                          options={"xatol": 1e-8})
    s = float(res.x)
    A, B = solve(s)[1]
    return s, float(A), float(B)


def summarize(records, beta: float, eps_c: float) -> dict:
    low, high = threshold_bracket(records, "scf")
    grad = [r for r in records if r.solver == "gradient"]
    scf_near = sorted(
        (r.parameter, r.iterations) for r in records
        if r.solver == "scf" and r.converged and eps_c < r.parameter <= 2.0 * eps_c
    )
    summary = {
        "eps_c_exact": eps_c,
        "eps_c_estimate": estimated_critical_epsilon(beta),
        "scf_threshold_low": low,
        "scf_threshold_high": high,
        "gradient_all_converged": all(r.converged for r in grad),
        "gradient_iterations_min": min(r.iterations for r in grad),
        "gradient_iterations_max": max(r.iterations for r in grad),
        "near_threshold_points": len(scf_near),
    }
    if len(scf_near) >= 3:
        e, c = zip(*scf_near)
        summary["near_threshold_loglog_slope"] = loglog_slope(e, c, eps_c)
        s, A, B = offset_power_fit(e, c, eps_c)
        summary["near_threshold_offset_exponent"] = s
        summary["near_threshold_offset_baseline"] = A
    return summary


def csv_rows(records):
    return [
        {"epsilon": r.parameter, "solver": r.solver, "iterations": r.iterations,
         "terminated": r.termination, "observed_rate": r.observed_rate}
        for r in records
    ]

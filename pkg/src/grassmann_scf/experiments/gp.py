"""Experiments on the periodic Gross-Pitaevskii lattice: rates, bifurcation, solver limits."""
from __future__ import annotations

import numpy as np

from ..manifold import fix_signs, manifold_distance, random_projector, random_tangent, retract
from ..models import GrossPitaevskii1D
from ..solvers import (
    SolverConfig,
    aufbau_projector,
    damped_scf,
    gradient_descent,
    gradient_step,
    oda,
    scf_diagnostics,
    scf_step,
)
from ..spectral import build_jacobian, jacobian_fd, spectral_radius
from .config import ExperimentConfig, task_seed
from .runner import SweepRecord, parallel_map, safe_rate

RATE_COLUMNS = ("start_kind", "solver", "observed_rate", "predicted_rate_fd", "predicted_rate_analytic")
BIFURCATION_COLUMNS = ("alpha", "solver", "energy", "rho7", "eps1", "eps2", "eps3", "max_fractional")
COMPARE_COLUMNS = ("solver", "quantity", "index", "value")


def core_ground_state(model: GrossPitaevskii1D, N: int) -> np.ndarray:
    """Aufbau projector of the interaction-free Hamiltonian."""
    return aufbau_projector(model.h, N)


def occupied_ranks(P: np.ndarray, H: np.ndarray) -> list[int]:
    """1-based eigenvalue ranks (in ``H``) of the eigenvectors spanning ``Ran P``."""
    w, V = np.linalg.eigh(H)
    overlap = np.einsum("ij,ik,kj->j", V, P, V)
    N = int(round(float(np.trace(P))))
    return sorted(int(k) + 1 for k in np.argsort(-overlap, kind="stable")[:N])


def fractional_distance(occupations) -> float:
    f = np.asarray(occupations, dtype=float)
    return float(np.max(np.minimum(np.abs(f), np.abs(1.0 - f))))


# ------------------------------------------------------------------- rates

def run_gp_rate(config: ExperimentConfig, jobs: int = 1):
    """Observed vs predicted linear rates for N = 1.  Returns ``(rows, summary, extras)``."""
    model = GrossPitaevskii1D(config["n_b"], config["alpha"])
    N = 1
    Pc = core_ground_state(model, N)
    rng = np.random.default_rng(task_seed(config.seed, 1))
    Pp = retract(Pc + random_tangent(Pc, rng, config["perturbation"]), N)

    # minimizer used for the linearization
    ref = damped_scf(model, Pc, SolverConfig(beta=config["beta_scf"], max_iterations=config["max_iterations"],
                                               tolerance=config["scf_tolerance"]), N=N)
    P_star = ref.final
    betas = {"gradient": config["beta_gradient"], "scf": config["beta_scf"]}
    reports = {"gradient": build_jacobian(model, P_star, "grad"), "scf": build_jacobian(model, P_star, "scf")}
    maps = {"gradient": gradient_step(model, betas["gradient"], N), "scf": scf_step(model, betas["scf"], N)}
    predicted_fd, predicted = {}, {}
    for name, rep in reports.items():
        A = jacobian_fd(maps[name], P_star, rep.basis, config["h_fd"])
        predicted_fd[name] = spectral_radius(A)
        predicted[name] = rep.rate_at(betas[name])

    runs = {
        "gradient": (gradient_descent, config["gradient_tolerance"], config["rate_window_gradient"]),
        "scf": (damped_scf, config["scf_tolerance"], config["rate_window_scf"]),
    }
    rows, traces = [], {}
    for start_kind, P0 in (("core", Pc), ("perturbed", Pp)):
        for name, (solver, tol, window) in runs.items():
            cfg = SolverConfig(beta=betas[name], max_iterations=config["max_iterations"], tolerance=tol)
            trace = solver(model, P0, cfg, N=N)
            traces[start_kind, name] = trace
            rows.append({
                "start_kind": start_kind,
                "solver": name,
                "observed_rate": safe_rate(trace, window, floor=config["rate_floor"]),
                "predicted_rate_fd": predicted_fd[name],
                "predicted_rate_analytic": predicted[name],
            })

    def rel(row):
        return abs(row["observed_rate"] - row["predicted_rate_analytic"]) / abs(1.0 - row["predicted_rate_analytic"])

    by = {(r["start_kind"], r["solver"]): r for r in rows}
    w, V = np.linalg.eigh(P_star)
    orbital = fix_signs(V[:, -1:])[:, 0]
    oda_gap = _oda_uniqueness(config)
    summary = {
        "gradient_lambda_min": reports["gradient"].lambda_min,
        "gradient_lambda_max": reports["gradient"].lambda_max,
        "scf_lambda_min": reports["scf"].lambda_min,
        "scf_lambda_max": reports["scf"].lambda_max,
        "gap": reports["scf"].gap,
        "coercivity": reports["gradient"].coercivity,
        "coercivity_scaled": reports["gradient"].coercivity_scaled,
        "optimal_beta_gradient": reports["gradient"].optimal_beta,
        "optimal_beta_scf": reports["scf"].optimal_beta,
        "perturbed_gradient_relative_error": rel(by["perturbed", "gradient"]),
        "perturbed_scf_relative_error": rel(by["perturbed", "scf"]),
        "core_gradient_relative_error": rel(by["core", "gradient"]),
        "fd_vs_analytic_gradient": abs(predicted_fd["gradient"] - predicted["gradient"]) / predicted["gradient"],
        "fd_vs_analytic_scf": abs(predicted_fd["scf"] - predicted["scf"]) / predicted["scf"],
        "core_scf_anomaly": bool(by["core", "scf"]["observed_rate"] < predicted["scf"] - config["anomaly_margin"]),
        "ground_state_single_signed": bool(np.all(orbital > 0)),
        "oda_density_difference": oda_gap,
    }
    extras = {"traces": traces, "minimizer": P_star, "reports": reports}
    return rows, summary, extras


def _oda_uniqueness(config: ExperimentConfig) -> float:
    """Max density difference between ODA runs from two random starts."""
    model = GrossPitaevskii1D(config["oda_check_n_b"], config["oda_check_alpha"])
    N = config["oda_check_N"]
    cfg = SolverConfig(max_iterations=config["max_iterations"], tolerance=1e-11)
    dens = []
    for k in (2, 3):
        P0 = random_projector(model.n_b, N, task_seed(config.seed, k))
        state, _ = oda(model, P0, cfg, N=N)
        dens.append(model.density(state.assemble()))
    return float(np.max(np.abs(dens[0] - dens[1])))


# ------------------------------------------------------------ bifurcation

def _bifurcation_task(args):
    n_b, N, alpha, beta, grad_tol, oda_tol, max_it, density_index = args
    model = GrossPitaevskii1D(n_b, alpha)
    P0 = core_ground_state(model, N)
    state, t_oda = oda(model, P0, SolverConfig(max_iterations=max_it, tolerance=oda_tol), N=N)
    t_grad = gradient_descent(model, P0, SolverConfig(beta=beta, max_iterations=max_it, tolerance=grad_tol), N=N)
    out = []
    finals = {"oda": state.assemble(), "gradient": t_grad.final}
    for name, trace in (("oda", t_oda), ("gradient", t_grad)):
        P = finals[name]
        eps = np.linalg.eigvalsh(model.gradient(P))
        occ = state.occupations if name == "oda" else np.linalg.eigvalsh(P)[::-1]
        out.append(SweepRecord(
            alpha, name, trace.iterations, trace.termination,
            final_energy=model.energy(P),
            diagnostics={
                "rho": float(model.density(P)[density_index - 1]),
                "eps": eps[:3].copy(),
                "occupations": np.asarray(occ).copy(),
                "max_fractional": fractional_distance(occ),
                "P": P,
            },
        ))
    out[0].diagnostics["distance_to_gradient"] = manifold_distance(finals["oda"], finals["gradient"])
    return out


def run_gp_bifurcation(config: ExperimentConfig, jobs: int = 1):
    """ODA and gradient descent across the interaction strength.  Returns ``(records, summary)``."""
    grid = config.grid("alpha")
    tasks = [
        (config["n_b"], config["N"], float(a), config["beta_gradient"], config["gradient_tolerance"],
         config["oda_tolerance"], config["max_iterations"], config["density_index"])
        for a in grid
    ]
    records = [r for pair in parallel_map(_bifurcation_task, tasks, jobs) for r in pair]
    return records, summarize_bifurcation(records, config["fractional_threshold"])


def summarize_bifurcation(records, threshold: float = 1e-6) -> dict:
    oda_recs = [r for r in records if r.solver == "oda"]
    frac = np.array([r.diagnostics["max_fractional"] for r in oda_recs])
    alphas = np.array([r.parameter for r in oda_recs])
    above = np.flatnonzero(frac > threshold)
    first = int(above[0]) if len(above) else len(alphas)
    below_recs = oda_recs[:first]
    above_recs = oda_recs[first:]
    summary = {
        "alpha_c_low": float(alphas[first - 1]) if first > 0 else float("nan"),
        "alpha_c_high": float(alphas[first]) if first < len(alphas) else float("nan"),
        "below_max_fractional": max((r.diagnostics["max_fractional"] for r in below_recs), default=float("nan")),
        "below_max_oda_gradient_distance": max(
            (r.diagnostics["distance_to_gradient"] for r in below_recs), default=float("nan")),
        "above_min_fractional": min((r.diagnostics["max_fractional"] for r in above_recs), default=float("nan")),
        "above_max_eps23_split": max(
            (abs(r.diagnostics["eps"][2] - r.diagnostics["eps"][1]) for r in above_recs), default=float("nan")),
        "gradient_all_converged": all(r.converged for r in records if r.solver == "gradient"),
        "oda_converged": sum(r.termination == "converged" for r in oda_recs),
        "oda_stationary": sum(r.termination == "stationary" for r in oda_recs),
        "oda_failed": sum(r.termination not in ("converged", "stationary") for r in oda_recs),
    }
    return summary


def bifurcation_rows(records):
    return [
        {"alpha": r.parameter, "solver": r.solver, "energy": r.final_energy,
         "rho7": r.diagnostics["rho"], "eps1": r.diagnostics["eps"][0], "eps2": r.diagnostics["eps"][1],
         "eps3": r.diagnostics["eps"][2], "max_fractional": r.diagnostics["max_fractional"]}
        for r in records
    ]


# ---------------------------------------------------------------- compare

def run_gp_compare(config: ExperimentConfig, jobs: int = 1):
    """Limits of gradient descent, damped SCF and ODA from the same start.  Returns ``(rows, summary, limits)``."""
    model = GrossPitaevskii1D(config["n_b"], config["alpha"])
    N = config["N"]
    P0 = core_ground_state(model, N)
    max_it = config["max_iterations"]
    t_grad = gradient_descent(model, P0, SolverConfig(beta=config["beta_gradient"], max_iterations=max_it,
                                                      tolerance=config["gradient_tolerance"]), N=N)
    t_scf = damped_scf(model, P0, SolverConfig(beta=config["beta_scf"], max_iterations=max_it,
                                               tolerance=config["scf_tolerance"],
                                               aufbau_mode=config["scf_aufbau_mode"]), N=N)
    state, t_oda = oda(model, P0, SolverConfig(max_iterations=max_it, tolerance=config["oda_tolerance"]), N=N)
    limits = {"gradient": t_grad.final, "scf": t_scf.final, "oda": state.assemble()}
    traces = {"gradient": t_grad, "scf": t_scf, "oda": t_oda}
    rows = []

    def emit(solver, quantity, values):
        for i, v in enumerate(np.atleast_1d(values)):
            rows.append({"solver": solver, "quantity": quantity, "index": i, "value": float(v)})

    info = {}
    for name, P in limits.items():
        H = model.gradient(P)
        eps = np.linalg.eigvalsh(H)
        diag = scf_diagnostics(model, P, N, gap_tolerance=None)
        occ = state.occupations if name == "oda" else np.linalg.eigvalsh(P)[::-1]
        ranks = occupied_ranks(P, H) if name != "oda" else []
        emit(name, "density", model.density(P))
        emit(name, "effective_potential", model.effective_potential(P))
        emit(name, "eigenvalue", eps[: max(6, N + 2)])
        emit(name, "occupation", occ[: max(6, N + 2)])
        emit(name, "energy", model.energy(P))
        emit(name, "iterations", traces[name].iterations)
        emit(name, "converged", float(traces[name].converged))
        for key in ("gradient_residual", "projected_residual", "fixed_point_residual", "commutator"):
            emit(name, key, diag[key])
        emit(name, "projector_defect", np.linalg.norm(P @ P - P))
        emit(name, "max_fractional", fractional_distance(occ))
        if ranks:
            emit(name, "occupied_rank", ranks)
        info[name] = {**diag, "ranks": ranks, "max_fractional": fractional_distance(occ),
                      "energy": model.energy(P), "termination": traces[name].termination,
                      "iterations": traces[name].iterations}
    names = list(limits)
    distances = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            d = manifold_distance(limits[a], limits[b])
            distances[f"{a}_{b}"] = d
            emit(a, f"distance_to_{b}", d)
    summary = {
        "gradient_termination": info["gradient"]["termination"],
        "scf_termination": info["scf"]["termination"],
        "oda_termination": info["oda"]["termination"],
        "gradient_residual": info["gradient"]["gradient_residual"],
        "gradient_occupied_ranks": " ".join(map(str, info["gradient"]["ranks"])),
        "scf_projected_residual": info["scf"]["projected_residual"],
        "scf_fixed_point_residual": info["scf"]["fixed_point_residual"],
        "scf_commutator": info["scf"]["commutator"],
        "oda_max_fractional": info["oda"]["max_fractional"],
        "min_pairwise_distance": min(distances.values()),
        **{f"distance_{k}": v for k, v in distances.items()},
        "energy_gradient": info["gradient"]["energy"],
        "energy_scf": info["scf"]["energy"],
        "energy_oda": info["oda"]["energy"],
    }
    return rows, summary, {"limits": limits, "traces": traces, "state": state, "info": info}

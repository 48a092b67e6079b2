"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records one ``criterion k: PASS|FAIL`` line, listed in the
terminal summary under "acceptance criteria".  Run alone with
``pytest tests/test_acceptance.py -m slow``.
"""
import numpy as np
import pytest

from grassmann_scf.experiments import chaos, gp, toy
from grassmann_scf.experiments.config import build_config
from grassmann_scf.manifold import (
    is_on_manifold,
    projector_defect,
    random_projector,
    random_tangent,
    retract,
    tangent_project,
)
from grassmann_scf.models import (
    ChaosModel,
    GrossPitaevskii1D,
    LinearModel,
    ToyGapModel,
    toy_analytic_minimizer,
)
from grassmann_scf.solvers import (
    SolverConfig,
    aufbau_projector,
    damped_scf,
    damped_scf_nonretracted,
    gradient_descent,
    roothaan_scf,
)
from grassmann_scf.spectral import build_jacobian

from conftest import ACCEPTANCE_LINES, random_symmetric

pytestmark = pytest.mark.slow


def report(k, checks):
    """Record the criterion line and fail with the unmet parts."""
    ok = all(c[1] for c in checks)
    parts = "; ".join(f"{'ok' if good else 'NO'} {label} [{detail}]" for label, good, detail in checks)
    ACCEPTANCE_LINES.append(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {parts}")
    print(ACCEPTANCE_LINES[-1])
    failed = [label for label, good, _ in checks if not good]
    assert not failed, f"criterion {k} unmet: {failed}"


def by_solver(records, solver):
    return sorted((r for r in records if r.solver == solver), key=lambda r: r.parameter)


def test_criterion_1_toy_sweep_beta_1e_1():
    records, s = toy.run_toy_sweep(build_config("toy_sweep", {"beta": "0.1"}))
    scf = by_solver(records, "scf")
    grad = by_solver(records, "gradient")
    low = [r for r in scf if r.parameter <= 0.14]
    high = [r for r in scf if r.parameter >= 0.18]
    low_terms = sorted({r.termination for r in low})
    iters = [r.iterations for r in grad]
    report(1, [
        ("scf at cap for eps<=0.14", all(r.termination == "max_iter" and r.iterations == 50000 for r in low),
         f"terminations {low_terms}"),
        ("scf converges for eps>=0.18", all(r.converged for r in high), f"{sum(r.converged for r in high)}/{len(high)}"),
        ("threshold in [0.14, 0.18]", 0.14 <= s["scf_threshold_low"] and s["scf_threshold_high"] <= 0.18,
         f"{s['scf_threshold_low']:.5f}..{s['scf_threshold_high']:.5f}"),
        ("gradient converges on [0,1]", all(r.converged for r in grad), f"{sum(r.converged for r in grad)}/{len(grad)}"),
        ("gradient iterations 124+-15", all(109 <= n <= 139 for n in iters), f"{min(iters)}..{max(iters)}"),
    ])


def test_criterion_2_toy_sweep_beta_1e_3():
    records, s = toy.run_toy_sweep(build_config("toy_sweep", {"beta": "1e-3"}))
    grad = by_solver(records, "gradient")
    # the 1.3e4 count is the small-gap prediction 1-2*beta; nu(eps) <= 0.04 on this range
    small = [r.iterations for r in grad if r.parameter <= 0.1]
    slope = s.get("near_threshold_offset_exponent", float("nan"))
    report(2, [
        ("threshold in [0.014, 0.018]", 0.014 <= s["scf_threshold_low"] and s["scf_threshold_high"] <= 0.018,
         f"{s['scf_threshold_low']:.5f}..{s['scf_threshold_high']:.5f}"),
        ("gradient iterations 1.3e4+-10% (eps<=0.1)", all(11700 <= n <= 14300 for n in small),
         f"{min(small)}..{max(small)}, all eps {s['gradient_iterations_min']}..{s['gradient_iterations_max']}"),
        ("near-threshold exponent -1+-0.15", abs(slope + 1.0) <= 0.15,
         f"offset fit {slope:.3f}, plain log-log {s.get('near_threshold_loglog_slope', float('nan')):.3f}"),
    ])


def test_criterion_3_toy_analytic_jacobians():
    checks = []
    for eps in (0.05, 0.1, 0.5):
        P, nu = toy_analytic_minimizer(eps)
        m = ToyGapModel(eps)
        e_scf = build_jacobian(m, P, "scf").eigenvalues[0]
        e_grad = build_jacobian(m, P, "grad").eigenvalues[0]
        d_scf, d_grad = abs(e_scf - (1 + 2 / nu)), abs(e_grad - (nu + 2))
        checks.append((f"eps={eps} J_SCF", d_scf <= 1e-8, f"{d_scf:.1e}"))
        checks.append((f"eps={eps} J_grad", d_grad <= 1e-8, f"{d_grad:.1e}"))
    report(3, checks)


def test_criterion_4_chaos_bifurcation():
    _, _, s0 = chaos.run_chaos_bifurcation(build_config("chaos_bifurcation", {"c2": "0"}))
    _, _, s1 = chaos.run_chaos_bifurcation(build_config("chaos_bifurcation", {"c2": "1"}))
    report(4, [
        ("c2=0 brackets 0.28+-0.03", 0.25 <= s0["last_period1"] < s0["first_period2"] <= 0.31,
         f"{s0['last_period1']:.4f}/{s0['first_period2']:.4f}"),
        ("c2=1 brackets 1.38+-0.05", 1.33 <= s1["last_period1"] < s1["first_period2"] <= 1.43,
         f"{s1['last_period1']:.4f}/{s1['first_period2']:.4f}"),
        ("c2=1 period-4 window", s1["period4_points_above"] > 0, f"{s1['period4_points_above']} points"),
        ("c2=1 aperiodic point", s1["aperiodic_points"] >= 1, f"{s1['aperiodic_points']} points"),
    ])


def test_criterion_5_gp_rate():
    _, s, _ = gp.run_gp_rate(build_config("gp_rate"))
    report(5, [
        ("perturbed gradient rate within 5%", s["perturbed_gradient_relative_error"] <= 0.05,
         f"{s['perturbed_gradient_relative_error']:.4f}"),
        ("perturbed scf rate within 5%", s["perturbed_scf_relative_error"] <= 0.05,
         f"{s['perturbed_scf_relative_error']:.4f}"),
        ("FD vs analytic radius within 1%",
         max(s["fd_vs_analytic_gradient"], s["fd_vs_analytic_scf"]) <= 0.01,
         f"{s['fd_vs_analytic_gradient']:.1e}, {s['fd_vs_analytic_scf']:.1e}"),
        ("core-start scf faster than predicted", bool(s["core_scf_anomaly"]), str(s["core_scf_anomaly"])),
    ])


def test_criterion_6_gp_bifurcation():
    # integer alpha grid 0, 1, ..., 30
    _, s = gp.run_gp_bifurcation(build_config("gp_bifurcation", {"alpha_count": "31"}))
    report(6, [
        ("alpha_c in [9, 11]", 9.0 <= s["alpha_c_low"] and s["alpha_c_high"] <= 11.0,
         f"{s['alpha_c_low']}..{s['alpha_c_high']}"),
        ("below: occupations 0/1 to 1e-8", s["below_max_fractional"] <= 1e-8, f"{s['below_max_fractional']:.1e}"),
        ("below: ODA = gradient to 1e-8", s["below_max_oda_gradient_distance"] <= 1e-8,
         f"{s['below_max_oda_gradient_distance']:.1e}"),
        ("above: 0<f<1", s["above_min_fractional"] > 0.0, f"min {s['above_min_fractional']:.3f}"),
        ("above: eps2=eps3 to 1e-6", s["above_max_eps23_split"] <= 1e-6, f"{s['above_max_eps23_split']:.1e}"),
        ("gradient converged everywhere", bool(s["gradient_all_converged"]), str(s["gradient_all_converged"])),
    ])


def test_criterion_7_gp_compare():
    _, s, _ = gp.run_gp_compare(build_config("gp_compare"))
    report(7, [
        ("limits pairwise > 1e-3", s["min_pairwise_distance"] > 1e-3, f"min {s['min_pairwise_distance']:.3f}"),
        ("gradient converged", s["gradient_termination"] == "converged", s["gradient_termination"]),
        ("gradient occupies ranks 1,3", s["gradient_occupied_ranks"] == "1 3", s["gradient_occupied_ranks"]),
        ("scf converged", s["scf_termination"] == "converged", s["scf_termination"]),
        ("scf projected residual <= 1e-8", s["scf_projected_residual"] <= 1e-8, f"{s['scf_projected_residual']:.1e}"),
        ("scf fixed-point residual > 1e-3", s["scf_fixed_point_residual"] > 1e-3,
         f"{s['scf_fixed_point_residual']:.3f}"),
    ])


def _fd_errors(model, n, N, draws=10, t=1e-5):
    rng = np.random.default_rng(11)
    worst = 0.0
    for k in range(draws):
        P = random_projector(n, N, 500 + k)
        X = random_symmetric(rng, n)
        X /= np.linalg.norm(X)
        if isinstance(model, ChaosModel) and model.c2 > 0 and np.min(np.diag(P)) < 1e-3:
            # rho^(4/3) is not smooth at zero density
            continue
        fd = (model.energy(P + t * X) - model.energy(P - t * X)) / (2 * t)
        exact = np.sum(model.gradient(P) * X)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1.0))
        fdh = (model.gradient(P + t * X) - model.gradient(P - t * X)) / (2 * t)
        HX = model.hessian_apply(P, X)
        worst = max(worst, np.linalg.norm(fdh - HX) / max(np.linalg.norm(HX), 1.0))
    return worst


def test_criterion_8_property_suites():
    rng = np.random.default_rng(8)
    checks = []

    zoo = [
        (LinearModel(random_symmetric(rng, 5)), 5, 2),
        (ToyGapModel(0.3), 2, 1),
        (ChaosModel(0.7, 0.0), 3, 1),
        (ChaosModel(0.5, 1.0, nonlinear_scale=2.0), 3, 1),
        (GrossPitaevskii1D(40, 10.0), 40, 2),
        (GrossPitaevskii1D(100, 50.0), 100, 1),
    ]
    fd = max(_fd_errors(m, n, N) for m, n, N in zoo)
    checks.append(("FD gradient/Hessian < 1e-6", fd < 1e-6, f"{fd:.1e}"))

    proj = 0.0
    for k in range(20):
        P = random_projector(7, 3, k)
        A, B = random_symmetric(rng, 7), random_symmetric(rng, 7)
        PA, PB = tangent_project(P, A), tangent_project(P, B)
        proj = max(proj, np.linalg.norm(tangent_project(P, PA) - PA), abs(np.sum(PA * B) - np.sum(A * PB)))
    checks.append(("projection idempotent/self-adjoint", proj <= 1e-12, f"{proj:.1e}"))

    P = random_projector(6, 2, 11)
    X = random_tangent(P, np.random.default_rng(5))
    ts = np.logspace(-4, -2, 9)
    rem = [np.linalg.norm(retract(P + t * X, 2) - P - t * tangent_project(P, X)) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(rem), 1)[0]
    checks.append(("retraction slope 2+-0.1", abs(slope - 2.0) <= 0.1, f"{slope:.3f}"))

    limits, rises = [], []
    for model, P0, beta, N in (
        (ToyGapModel(0.3), random_projector(2, 1, 0), 0.1, 1),
        (GrossPitaevskii1D(40, 10.0), random_projector(40, 2, 1), 5e-4, 2),
    ):
        t = gradient_descent(model, P0, SolverConfig(beta=beta, tolerance=1e-10, max_iterations=100000), N=N)
        E = np.asarray(t.energies)
        rises.append(float(np.max(np.diff(E) / np.maximum(1.0, np.abs(E[1:])))))
        limits.append(t)
    checks.append(("gradient energy monotone", max(rises) <= 1e-13, f"max rise {max(rises):.1e}"))

    gpm = GrossPitaevskii1D(30, 2.0)
    limits.append(damped_scf(gpm, aufbau_projector(gpm.h, 1), SolverConfig(beta=0.3, tolerance=1e-11), N=1))
    limits.append(roothaan_scf(gpm, aufbau_projector(gpm.h, 1), SolverConfig(tolerance=1e-11), N=1))
    converged = [t for t in limits if t.converged]
    defect = max(projector_defect(t.final) for t in converged)
    checks.append(("converged limits are projectors", len(converged) == len(limits) and defect <= 1e-8,
                   f"{len(converged)}/{len(limits)}, defect {defect:.1e}"))

    H = random_symmetric(rng, 6)
    lin = LinearModel(H)
    P0 = random_projector(6, 2, 3)
    t_r = roothaan_scf(lin, P0, SolverConfig(tolerance=1e-12), N=2)
    t_m = damped_scf_nonretracted(lin, P0, SolverConfig(beta=1.0, tolerance=1e-12), N=2)
    one = all(t.converged and t.iterations == 1 and is_on_manifold(t.final, 2) for t in (t_r, t_m))
    checks.append(("LinearModel SCF in one iteration", one, f"roothaan {t_r.iterations}, undamped mixing {t_m.iterations}"))

    split = 0.0
    for model, N, P in (
        (ToyGapModel(0.2), 1, toy_analytic_minimizer(0.2)[0]),
        (gpm, 1, limits[2].final),
    ):
        scf, grad = build_jacobian(model, P, "scf"), build_jacobian(model, P, "grad")
        split = max(split, np.abs(np.diag(1.0 / scf.omega) @ grad.jacobian - scf.jacobian).max())
    checks.append(("J_SCF = I + inv(Omega) K to 1e-10", split <= 1e-10, f"{split:.1e}"))
    report(8, checks)

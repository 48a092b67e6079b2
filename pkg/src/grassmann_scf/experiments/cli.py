"""Command-line entry point: one subcommand per experiment, CSV output."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .. import __version__
from ..errors import ConfigError, GrassmannError
from ..models import ChaosModel, GrossPitaevskii1D, ToyGapModel, toy_analytic_minimizer
from ..solvers import SolverConfig, aufbau_projector, damped_scf, gradient_descent
from ..spectral import build_jacobian
from . import chaos, gp, toy
from .config import load_config
from .output import write_csv

SUBCOMMANDS = {
    "toy-sweep": "toy_sweep",
    "chaos": "chaos_bifurcation",
    "gp-rate": "gp_rate",
    "gp-bifurcation": "gp_bifurcation",
    "gp-compare": "gp_compare",
    "analyze": "analyze",
}

ANALYZE_COLUMNS = ("kind", "quantity", "index", "value")


def _toy(cfg, jobs):
    records, summary = toy.run_toy_sweep(cfg, jobs)
    return toy.COLUMNS, toy.csv_rows(records), summary


def _chaos(cfg, jobs):
    rows, _, summary = chaos.run_chaos_bifurcation(cfg, jobs)
    return chaos.COLUMNS, rows, summary


def _gp_rate(cfg, jobs):
    rows, summary, _ = gp.run_gp_rate(cfg, jobs)
    return gp.RATE_COLUMNS, rows, summary


def _gp_bifurcation(cfg, jobs):
    records, summary = gp.run_gp_bifurcation(cfg, jobs)
    return gp.BIFURCATION_COLUMNS, gp.bifurcation_rows(records), summary


def _gp_compare(cfg, jobs):
    rows, summary, _ = gp.run_gp_compare(cfg, jobs)
    return gp.COMPARE_COLUMNS, rows, summary


def analysis_point(cfg):
    """Model and critical point for the ``analyze`` subcommand."""
    kind = cfg["model"]
    if kind == "toy":
        model = ToyGapModel(cfg["epsilon"])
        return model, toy_analytic_minimizer(cfg["epsilon"])[0], {}
    if kind == "gp":
        model = GrossPitaevskii1D(cfg["n_b"], cfg["alpha"])
        P0 = gp.core_ground_state(model, cfg["N"])
        solver = gradient_descent if cfg["point"] == "minimize" else damped_scf
        beta = cfg["beta_gradient"] if cfg["point"] == "minimize" else 0.2
    elif kind == "chaos":
        model = ChaosModel(cfg["c1"], cfg["c2"], cfg["nonlinear_scale"])
        P0 = aufbau_projector(model.h, cfg["N"])
        solver, beta = damped_scf, 0.2
    else:
        raise ConfigError(f"unknown model {kind!r}; expected toy, gp or chaos")
    trace = solver(model, P0, SolverConfig(beta=beta, max_iterations=cfg["max_iterations"],
                                           tolerance=cfg["tolerance"]), N=cfg["N"])
    return model, trace.final, {"iterations": trace.iterations, "termination": trace.termination}


def _analyze(cfg, jobs):
    model, P, meta = analysis_point(cfg)
    rows, summary = [], dict(meta)
    for kind in ("grad", "scf"):
        try:
            rep = build_jacobian(model, P, kind)
        except GrassmannError as exc:
            summary[f"{kind}_error"] = type(exc).__name__
            continue
        scalars = {
            "lambda_min": rep.lambda_min, "lambda_max": rep.lambda_max,
            "optimal_beta": rep.optimal_beta, "condition_number": rep.condition_number,
            "predicted_rate": rep.predicted_rate, "gap": rep.gap,
            "coercivity": rep.coercivity, "coercivity_scaled": rep.coercivity_scaled,
            "spectral_radius": rep.spectral_radius,
        }
        for q, v in scalars.items():
            rows.append({"kind": kind, "quantity": q, "index": 0, "value": float(v)})
            summary[f"{kind}_{q}"] = float(v)
        for i, v in enumerate(rep.eigenvalues):
            rows.append({"kind": kind, "quantity": "eigenvalue", "index": i, "value": float(v)})
    return ANALYZE_COLUMNS, rows, summary


RUNNERS = {
    "toy_sweep": _toy,
    "chaos_bifurcation": _chaos,
    "gp_rate": _gp_rate,
    "gp_bifurcation": _gp_bifurcation,
    "gp_compare": _gp_compare,
    "analyze": _analyze,
}


def _parse_sets(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output CSV path (default: <subcommand>.csv)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for grid sweeps")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                        help="override one config key (repeatable)")
    parser = argparse.ArgumentParser(
        prog="grassmann-scf",
        description="Solver experiments on the manifold of rank-N projectors.",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "toy-sweep": "iteration counts vs gap parameter on the 2x2 toy model",
        "chaos": "bifurcation diagram of undamped SCF on the 3-site model",
        "gp-rate": "observed vs predicted rates on the lattice model, N=1",
        "gp-bifurcation": "ODA and gradient limits across alpha, N=2",
        "gp-compare": "gradient, damped SCF and ODA limits at one alpha, N=2",
        "analyze": "Jacobian and rate report at a critical point",
    }
    for name, text in helps.items():
        sub.add_parser(name, help=text, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    experiment = SUBCOMMANDS[args.command]
    try:
        cfg = load_config(experiment, args.config, _parse_sets(args.set), args.seed)
        columns, rows, summary = RUNNERS[experiment](cfg, args.jobs)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out or f"{args.command}.csv"
    write_csv(out, experiment, cfg.items(), columns, rows, summary, __version__)
    print(f"wrote {len(rows)} rows to {out}")
    for key, value in summary.items():
        if isinstance(value, (float, np.floating)):
            value = f"{float(value):.10g}"
        print(f"{key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

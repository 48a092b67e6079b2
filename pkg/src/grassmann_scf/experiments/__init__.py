"""Experiment drivers behind the ``grassmann-scf`` command."""
from .chaos import run_chaos_bifurcation
from .config import ExperimentConfig, build_config, load_config
from .gp import run_gp_bifurcation, run_gp_compare, run_gp_rate
from .runner import SweepRecord
from .toy import run_toy_sweep

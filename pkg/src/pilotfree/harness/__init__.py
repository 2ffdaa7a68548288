"""Experiment orchestration: configs, seeded sweeps, CSV output and the CLI."""

from .config import SimConfig, SweepPoint, load_config, parse_config, sir_to_alpha
from .results import write_csv
from .sim import Row, SimResult, per_seed_ser, run_point, sweep

__all__ = [
    "SimConfig", "SweepPoint", "load_config", "parse_config", "sir_to_alpha",
    "write_csv", "Row", "SimResult", "run_point", "per_seed_ser", "sweep",
]

"""Simulation and finite-key analysis of a modular decoy-state BB84 polarization source."""
__version__ = "0.1.0"

from .config import ExperimentConfig, load_config  # noqa: E402
from .engine import CountTable, run_aggregate, run_montecarlo  # noqa: E402

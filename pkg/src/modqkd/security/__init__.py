"""Finite-key security analysis for the 1-decoy protocol."""
from .decoy import BasisBounds, DecoyBounds, SourceParams, basis_bounds, decoy_bounds_analytic
from .keyrate import (
    FiniteKeyReport,
    finite_key_report,
    lambda_c,
    lambda_ec,
    lambda_sec,
    phase_error_bound,
    sampling_correction,
    skr_asymptotic,
    skr_finite,
)
from .lp import LpBounds, decoy_bounds_lp
from .params import N_EPSILON_TERMS, SecurityParams
from .stats import binary_entropy, hoeffding_delta, tau_n

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from modqkd.config import ExperimentConfig
from modqkd.engine import CountTable, run_aggregate, run_montecarlo, expected_counts, symbol_probabilities
from modqkd.errors import DegenerateBoundError, InfeasibleProgramError, InsufficientDataError
from modqkd.security import (
    SecurityParams,
    SourceParams,
    basis_bounds,
    binary_entropy,
    decoy_bounds_analytic,
    decoy_bounds_lp,
    finite_key_report,
    hoeffding_delta,
    lambda_sec,
    phase_error_bound,
    sampling_correction,
    skr_asymptotic,
    skr_finite,
    tau_n,
)
from modqkd.security.lp import basis_lp
from modqkd.security.optimize import DecoyGrid, block_skr, optimize_decoy, with_total_loss

import oracles

SRC = SourceParams(0.6, 0.2, 0.7)
NOISELESS = {"dark_rate": 0.0, "misalign_z": 0.0, "misalign_x": 0.0}


# -- statistics ------------------------------------------------------------------


def test_binary_entropy_examples():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-4)
    for bad in (-0.1, 1.1):
        with pytest.raises(ValueError):
            binary_entropy(bad)


def test_tau_examples():
    assert tau_n(1.0, 0.0, 0.0, 0) == 1.0
    assert tau_n(1.0, 0.0, 0.0, 3) == 0.0
    assert tau_n(0.7, 0.6, 0.2, 0) == pytest.approx(oracles.TAU0_DEFAULT, rel=1e-14)
    assert tau_n(0.7, 0.6, 0.2, 0) == pytest.approx(0.6298, abs=5e-5)


@given(st.floats(0, 1), st.floats(0, 3), st.floats(0, 3))
def test_tau_normalization(p, mu, nu):
    assert sum(tau_n(p, mu, nu, n) for n in range(51)) == pytest.approx(1.0, abs=1e-9)


def test_hoeffding_examples():
    assert hoeffding_delta(0, 1e-10) == 0.0
    assert hoeffding_delta(6.59e6, 1e-10) == pytest.approx(oracles.HOEFFDING_DEFAULT_BLOCK, abs=1)
    assert hoeffding_delta(1e6, 1.0) == 0.0
    with pytest.raises(ValueError):
        hoeffding_delta(10, 0.0)


@given(st.floats(0, 1e12), st.floats(1e-15, 0.99))
def test_hoeffding_square_root_scaling(n, eps):
    assert hoeffding_delta(4 * n, eps) == pytest.approx(2 * hoeffding_delta(n, eps), rel=1e-12)


# -- decoy bounds ----------------------------------------------------------------


def synthetic_counts(n_pulses, eta, y0, e_det, source=SRC, n_max=60):
    """Exact expected detections and errors per intensity for yields ``1-(1-eta)^n + y0``."""
    n_k, m_k = np.zeros(2), np.zeros(2)
    s_true, e_true = np.zeros(n_max), np.zeros(n_max)
    for i, (p, k) in enumerate(((source.p_mu, source.mu), (source.p_nu, source.nu))):
        for n in range(n_max):
            w = n_pulses * p * math.exp(-k) * k**n / math.factorial(n)
            y = min(1.0, 1 - (1 - eta) ** n + y0)
            err = 0.5 * y0 + e_det * (y - y0)
            n_k[i] += w * y
            m_k[i] += w * err
            s_true[n] += w * y
            e_true[n] += w * err
    return n_k, m_k, s_true, e_true


def test_lp_recovers_interval_around_true_yields():
    n_k, m_k, s, e = synthetic_counts(1e10, 0.01, 1e-5, 0.01)
    lp = basis_lp(n_k, m_k, SRC, 1e-10, 10)
    for (lo, hi), truth in ((lp.s0, s[0]), (lp.s1, s[1]), (lp.v1, e[1])):
        assert lo <= truth * (1 + 1e-7) and truth <= hi * (1 + 1e-7)


def test_lp_needs_two_intensities():
    table = run_aggregate(ExperimentConfig(), 1.0, 0)
    with pytest.raises(InsufficientDataError):
        decoy_bounds_lp(table, SecurityParams(), SourceParams(0.6, 0.2, 1.0))
    table.sent[1] = 0
    with pytest.raises(InsufficientDataError):
        decoy_bounds_lp(table, SecurityParams(), SRC)
    with pytest.raises(InsufficientDataError):
        decoy_bounds_analytic(table, SecurityParams(), SRC)


def test_lp_flags_inconsistent_counts():
    with pytest.raises(InfeasibleProgramError):
        basis_lp([100.0, 50.0], [500.0, 10.0], SRC, 0.5, 10)


def test_lp_intervals_widen_with_smaller_eps():
    n_k, m_k, *_ = synthetic_counts(1e9, 0.01, 2e-5, 0.01)
    prev = None
    for eps in (0.9, 1e-2, 1e-6, 1e-12):
        cur = basis_lp(n_k, m_k, SRC, eps, 10)
        if prev is not None:
            for a, b in ((prev.s0, cur.s0), (prev.s1, cur.s1), (prev.v1, cur.v1)):
                assert b[0] <= a[0] * (1 + 1e-7) + 1e-6 and b[1] >= a[1] * (1 - 1e-7) - 1e-6
        prev = cur


@settings(max_examples=40)
@given(
    st.floats(6, 11),
    st.floats(1e-3, 0.3),
    st.floats(0, 1e-4),
    st.floats(0, 0.05),
    st.floats(0.3, 1.0),
    st.floats(0.05, 0.8),
    st.floats(0.3, 0.9),
    st.floats(-12, 0),
)
def test_analytic_bounds_never_beat_the_lp(log_n, eta, y0, e_det, mu, ratio, p_mu, log_eps):
    src = SourceParams(mu, mu * ratio, p_mu)
    n_k, m_k, s, e = synthetic_counts(10**log_n, eta, y0, e_det, src)
    assume(m_k.sum() > 0)
    eps = 10**log_eps
    an = basis_bounds(n_k, m_k, src, eps)
    lp = basis_lp(n_k, m_k, src, eps, 10)
    tol = 1e-6 * n_k.sum()
    assert an.s0_lower <= lp.s0[0] + tol
    assert an.s1_lower <= lp.s1[0] + tol
    assert an.v1_upper >= lp.v1[1] - tol
    # exact expectations: the truth is always inside
    assert an.s1_lower <= s[1] + tol and an.v1_upper >= e[1] - tol


def test_all_zero_counts_give_zero_bounds():
    table = CountTable.zeros(1.0, 50e6)
    table.sent[:] = 1e6
    b = decoy_bounds_analytic(table, SecurityParams(), SRC)
    assert b.as_tuple() == (0.0, 0.0, 0.0)


def _s1_tightness(nu, seed):
    # balanced intensities and a Z-heavy basis choice keep the decoy counts large
    cfg = ExperimentConfig().with_updates(transmitter={"nu": nu, "p_z": 0.9, "p_mu": 0.5}, receiver=NOISELESS)
    res = run_montecarlo(cfg, 2 * 10**7, seed, keep_records=False)
    src = SourceParams.from_transmitter(cfg.transmitter)
    b = decoy_bounds_analytic(res.table, cfg.security, src, asymptotic=True)
    return b.z.s1_lower, res.true_counts("Z", 1)


def test_asymptotic_s1_bound_is_tight_for_weak_decoys():
    bound, truth = _s1_tightness(0.1, 3)
    assert bound <= truth
    assert bound >= 0.95 * truth


def test_asymptotic_s1_gap_for_default_intensities():
    # with nu = mu/3 the neglected multi-photon terms cost ~8% even without noise
    bound, truth = _s1_tightness(0.2, 4)
    assert 0.85 * truth <= bound <= truth


# -- phase error and key rate ---------------------------------------------------


def test_lambda_sec_is_exact():
    assert lambda_sec(1e-10) == oracles.LAMBDA_SEC_DEFAULT
    assert abs(lambda_sec(1e-10) / 224.8 - 1) < 2e-5


def test_zero_inputs_give_zero_rate():
    r = skr_finite(0.0, 0.0, 0.0, 1.0, 0, 0.0, SecurityParams())
    assert r.skr == 0.0
    assert r.lambda_sec == pytest.approx(224.8032507739, rel=1e-12)


def test_phase_error_limits():
    assert phase_error_bound(1e9, 1e9, 0.0, None) == 0.0
    assert phase_error_bound(1e9, 1e9, 0.0, 1e-10) == 0.0
    corr = [sampling_correction(1e-10, 0.01, n, n) for n in (1e4, 1e6, 1e8, 1e10)]
    assert all(a > b for a, b in zip(corr, corr[1:])) and corr[-1] < 1e-3
    with pytest.raises(DegenerateBoundError):
        phase_error_bound(1e6, 0.0, 0.0, 1e-10)


@given(st.floats(0, 1e9), st.floats(1e-3, 1e9), st.floats(0, 1e9), st.floats(1e-15, 1))
def test_phase_error_clamped(s1z, s1x, v1, eps):
    phi = phase_error_bound(s1z + 1, s1x, v1, eps)
    assert 0.0 <= phi <= 0.5


@given(
    st.floats(0, 1e8), st.floats(0, 1e8), st.floats(0, 0.5), st.floats(1e-3, 1e4), st.floats(0, 1e8), st.floats(0, 1)
)
def test_rate_never_negative(s0, s1, phi, t, n, q):
    assert skr_finite(s0, s1, phi, t, n, q, SecurityParams()).skr >= 0.0


@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_rate_non_increasing_in_qber(q1, q2):
    lo, hi = sorted((q1, q2))
    a = skr_finite(1e4, 4e6, 0.02, 900.0, 6.59e6, lo, SecurityParams())
    b = skr_finite(1e4, 4e6, 0.02, 900.0, 6.59e6, hi, SecurityParams())
    assert b.skr <= a.skr


@pytest.fixture(scope="module")
def full_block():
    cfg = ExperimentConfig()
    from modqkd.security.optimize import block_table

    return cfg, block_table(cfg)


def test_full_block_phase_error_allows_key(full_block):
    cfg, table = full_block
    r = finite_key_report(table, SourceParams.from_transmitter(cfg.transmitter), cfg.security)
    assert binary_entropy(r.phi_z) < binary_entropy(0.11)
    assert r.skr > 0


@pytest.mark.parametrize("eps_sec", [1e-6, 1e-10, 1e-14, 1e-18])
def test_tighter_secrecy_costs_key(full_block, eps_sec):
    cfg, table = full_block
    src = SourceParams.from_transmitter(cfg.transmitter)
    loose = finite_key_report(table, src, SecurityParams(eps_sec=eps_sec))
    tight = finite_key_report(table, src, SecurityParams(eps_sec=eps_sec / 100))
    assert tight.skr <= loose.skr


@settings(max_examples=15)
@given(st.floats(5.0, 900.0), st.integers(0, 2**32 - 1), st.floats(0.05, 0.9))
def test_finite_rate_never_exceeds_asymptotic(duration, seed, p_z):
    cfg = ExperimentConfig().with_updates(transmitter={"p_z": p_z})
    table = run_aggregate(cfg, duration, seed)
    r = finite_key_report(table, SourceParams.from_transmitter(cfg.transmitter), cfg.security)
    assert r.skr <= r.skr_asymptotic
    assert 0 <= r.phi_z <= 0.5


def test_lossless_noiseless_rate_tracks_single_photon_fraction():
    cfg = ExperimentConfig().with_updates(
        channel={"loss_db": 0.0}, receiver={**NOISELESS, "receiver_loss_db": 0.0, "det_efficiency": 1.0}
    )
    tx = cfg.transmitter
    table = CountTable(expected_counts(cfg, 1.0), tx.rep_rate * symbol_probabilities(cfg), 1.0, tx.rep_rate)
    src = SourceParams.from_transmitter(tx)
    rate = skr_asymptotic(table, src, cfg.security) / tx.rep_rate
    assert rate == pytest.approx(tx.p_z * cfg.receiver.split_z * src.tau(1), rel=0.05)


def test_asymptotic_rate_rejects_zero_duration():
    with pytest.raises(ValueError):
        skr_asymptotic(CountTable.zeros(), SRC, SecurityParams())


# -- optimizer -------------------------------------------------------------------

SMALL = DecoyGrid(mu=(0.4, 0.6), nu_ratio=(0.2, 0.3, 0.4), p_mu=(0.7,), p_z=(0.5, 0.9))
QUIET = ExperimentConfig().with_updates(receiver={"dark_rate": 0.1})


def test_optimizer_is_deterministic():
    a = optimize_decoy([30, 40], QUIET, SMALL)
    b = optimize_decoy([30, 40], QUIET, SMALL)
    assert a.surface == b.surface


def test_surface_decreases_with_loss():
    res = optimize_decoy([30, 40, 50, 60], QUIET, SMALL)
    by_params = {}
    for p in res.surface:
        by_params.setdefault((p.mu, p.nu_ratio, p.p_mu, p.p_z), []).append((p.loss_db, p.skr))
    for series in by_params.values():
        rates = [r for _, r in sorted(series)]
        assert all(b <= a for a, b in zip(rates, rates[1:]))


def test_ratio_030_is_near_optimal_on_small_grid():
    res = optimize_decoy([30, 40, 50, 60], QUIET, SMALL)
    for loss in res.losses:
        assert res.best(loss, 0.3).skr >= 0.9 * res.best(loss).skr > 0


def test_total_loss_conversion():
    cfg = with_total_loss(ExperimentConfig(), 19.5)
    assert cfg.channel.loss_db == pytest.approx(15.0, abs=2e-3)
    with pytest.raises(ValueError):
        with_total_loss(ExperimentConfig(), 3.0)
    with pytest.raises(ValueError):
        optimize_decoy([], QUIET, SMALL)
    assert block_skr(cfg) > 0

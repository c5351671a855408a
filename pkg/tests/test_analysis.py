import math

import numpy as np
import pytest

from modqkd.analysis import (
    default_sweep_angles,
    malus_sweep,
    pattern_stream,
    patterning_stats,
    slot_histogram,
)
from modqkd.engine import DetectionRecords, run_montecarlo
from modqkd.errors import MissingTransitionError
from modqkd.optics import PoleError, theta_for_ratio

IDEAL_030 = {"theta": theta_for_ratio(0.30)}


def synthetic(classes, detected):
    n = len(classes)
    return DetectionRecords(
        np.asarray(classes, dtype=np.int8),
        np.full(n, 2, dtype=np.int8),
        np.where(np.asarray(detected, bool), 2, -1).astype(np.int8),
        np.zeros(n, np.float32),
        np.zeros(n, np.int16),
    )


@pytest.fixture(scope="module")
def ideal_records():
    from modqkd.config import ExperimentConfig

    cfg = ExperimentConfig().with_updates(transmitter=IDEAL_030)
    pattern = pattern_stream(1024, cfg, 1)
    return run_montecarlo(cfg, 10**7, 2, pattern=pattern).records


def test_ideal_driver_levels_and_null_deviations(ideal_records):
    rep = patterning_stats(ideal_records)
    expected = {"mu->mu": 1.0, "nu->mu": 1.0, "nu->nu": 0.30, "mu->nu": 0.30}
    for label, c in expected.items():
        e = rep[label]
        assert abs(e.c - c) < 0.04
        assert abs(e.d) <= 3 * e.d_err
    assert {e.label for e in rep.entries} == set(expected)


def test_c_and_d_are_consistent_and_cover_all_pairs(ideal_records):
    rep = patterning_stats(ideal_records)
    mu_mean = rep.class_mean[0]
    for e in rep.entries:
        assert e.c * mu_mean == pytest.approx((1 + e.d) * rep.class_mean[e.cur], rel=1e-12)
        assert e.d_percent == pytest.approx(100 * e.d)
    assert sum(e.n_slots for e in rep.entries) == len(ideal_records) - 1


def test_constant_signal_level_normalizes_to_one():
    classes = [0] * 50 + [1, 1, 0, 0, 1, 0]
    rec = synthetic(classes, [1] * 50 + [0, 0, 1, 1, 0, 1])
    rep = patterning_stats(rec)
    assert rep["mu->mu"].c == 1.0
    assert rep["nu->mu"].c == 1.0


def test_missing_transition():
    with pytest.raises(MissingTransitionError):
        patterning_stats(synthetic([0] * 20 + [1] + [0] * 5, [1] * 26))


def test_quadrature_settling_shows_patterning(config):
    cfg = config.with_updates(transmitter={**IDEAL_030, "modulator_mode": "quadrature", "driver": {"settle_fraction": 0.1}})
    rec = run_montecarlo(cfg, 2 * 10**6, 3, pattern=pattern_stream(1024, cfg, 3)).records
    assert patterning_stats(rec).max_abs_d > 0.05


def test_null_hypothesis_holds_across_seeds(config):
    cfg = config.with_updates(transmitter=IDEAL_030)
    inside = total = 0
    for seed in range(100):
        rec = run_montecarlo(cfg, 200_000, 1000 + seed, pattern=pattern_stream(1024, cfg, seed)).records
        for e in patterning_stats(rec).entries:
            inside += abs(e.d) <= 2 * e.d_err
            total += 1
    assert inside / total >= 0.95


def test_sweep_at_extinction_is_consistent_with_zero(config):
    res = malus_sweep([math.pi / 4], 200_000, config, seed=3)
    p = res.points[0]
    assert p.predicted == pytest.approx(0.0, abs=1e-30)
    assert abs(p.ratio) < 3 * p.ratio_err
    assert p.raw_ratio > 0  # dark floor in the uncorrected ratio


def test_sweep_statistics_scale_with_pulses(config):
    angles = [0.2, 0.5]
    a = malus_sweep(angles, 10**6, config, seed=5)
    b = malus_sweep(angles, 2 * 10**6, config, seed=5)
    for pa, pb in zip(a.points, b.points):
        # the error estimate itself carries the ~5% noise of the decoy detection count
        assert (pb.ratio_err / pa.ratio_err) ** 2 == pytest.approx(0.5, rel=0.25)


def test_sweep_is_deterministic_and_ordered(config):
    a = malus_sweep(default_sweep_angles(3), 50_000, config, seed=8)
    b = malus_sweep(default_sweep_angles(3), 50_000, config, seed=8)
    assert a == b
    assert np.all(np.diff(a.angles) > 0)
    with pytest.raises(ValueError):
        malus_sweep([0.3, 0.2], 1000, config)


def test_sweep_rejects_pole(config):
    with pytest.raises((PoleError, ValueError)):
        malus_sweep([3 * math.pi / 4], 1000, config)


def test_default_angles_span_open_interval():
    a = default_sweep_angles()
    assert len(a) == 12 and 0 < a[0] and a[-1] < math.pi / 4


def test_histogram_two_levels(config):
    cfg = config.with_updates(transmitter=IDEAL_030)
    rec = run_montecarlo(cfg, 2 * 10**6, 4, pattern=pattern_stream(1024, cfg, 4)).records
    h = slot_histogram(rec, window=50, period=1024)
    assert h.repetitions == 2 * 10**6 // 1024
    assert h.level[1] / h.level[0] == pytest.approx(0.31, abs=0.03)
    assert len(h.mean) == 50 and np.all(h.sigma > 0)


def test_histogram_single_level_and_empty():
    h = slot_histogram(synthetic([0] * 100, [1, 1, 0, 1, 1] * 20), window=10, period=10)
    assert h.level == (0.8, 0.0) and np.allclose(h.mean, [1, 1, 0, 1, 1] * 2)
    e = slot_histogram(synthetic([0, 1] * 50, [0] * 100), window=20)
    assert np.all(e.mean == 0) and np.all(e.sigma == 0) and e.band == (0.0, 0.0)
    with pytest.raises(ValueError):
        slot_histogram(synthetic([0] * 10, [0] * 10), window=11)

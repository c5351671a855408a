"""Reductions over detection records: patterning, intensity-ratio sweep, slot histograms."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .engine import DetectionRecords, run_montecarlo
from .errors import InsufficientDataError, MissingTransitionError
from .link import dark_probability
from .optics import intensity_ratio
from .transmitter import IntensityClass, SymbolStream, draw_symbols

TRANSITIONS = (
    (IntensityClass.SIGNAL, IntensityClass.SIGNAL),
    (IntensityClass.DECOY, IntensityClass.SIGNAL),
    (IntensityClass.DECOY, IntensityClass.DECOY),
    (IntensityClass.SIGNAL, IntensityClass.DECOY),
)
_LABEL = {IntensityClass.SIGNAL: "mu", IntensityClass.DECOY: "nu"}


def transition_label(prev: IntensityClass, cur: IntensityClass) -> str:
    return f"{_LABEL[prev]}->{_LABEL[cur]}"


@dataclass(frozen=True)
class TransitionStats:
    prev: IntensityClass
    cur: IntensityClass
    n_slots: int
    mean: float
    c: float
    c_err: float
    d: float
    d_err: float

    @property
    def label(self) -> str:
        return transition_label(self.prev, self.cur)

    @property
    def d_percent(self) -> float:
        return 100.0 * self.d

    @property
    def d_err_percent(self) -> float:
        return 100.0 * self.d_err


@dataclass(frozen=True)
class PatterningReport:
    entries: tuple[TransitionStats, ...]
    class_mean: tuple[float, float]  # mean detections per slot of each IntensityClass

    def __getitem__(self, key) -> TransitionStats:
        for e in self.entries:
            if key in (e.label, (e.prev, e.cur)):
                return e
        raise KeyError(key)

    @property
    def max_abs_d(self) -> float:
        return max(abs(e.d) for e in self.entries)


def patterning_stats(records: DetectionRecords) -> PatterningReport:
    """Normalized intensity ``c`` and relative deviation ``d`` per ordered intensity pair.

    The per-slot detection indicator stands in for the pulse intensity.
    """
    if len(records) < 2:
        raise InsufficientDataError("need at least two slots")
    k = np.asarray(records.intensity)
    s = records.detected.astype(float)
    class_mean = []
    for cls in IntensityClass:
        sel = k == cls
        if not sel.any():
            raise MissingTransitionError(f"no {_LABEL[cls]} slots in the record")
        class_mean.append(float(s[sel].mean()))
    mu_mean = class_mean[IntensityClass.SIGNAL]
    if mu_mean == 0:
        raise InsufficientDataError("no detections in signal slots")

    prev, cur, s_cur = k[:-1], k[1:], s[1:]
    entries = []
    for a, b in TRANSITIONS:
        group = s_cur[(prev == a) & (cur == b)]
        n = len(group)
        if n == 0:
            raise MissingTransitionError(f"transition {transition_label(a, b)} never occurs")
        m = float(group.mean())
        se = float(group.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        ref = class_mean[b]
        d = (m - ref) / ref if ref > 0 else 0.0
        d_err = se / ref if ref > 0 else 0.0
        entries.append(TransitionStats(a, b, n, m, m / mu_mean, se / mu_mean, d, d_err))
    return PatterningReport(tuple(entries), (class_mean[0], class_mean[1]))


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    predicted: float
    ratio: float
    ratio_err: float
    raw_ratio: float
    detections: int

    @property
    def deviation(self) -> float:
        return self.ratio - self.predicted

    @property
    def z_score(self) -> float:
        return self.deviation / self.ratio_err if self.ratio_err > 0 else (0.0 if self.deviation == 0 else math.inf)


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]

    @property
    def angles(self) -> np.ndarray:
        return np.array([p.theta for p in self.points])


def default_sweep_angles(n: int = 12) -> list[float]:
    """``n`` equally spaced angles strictly inside (0, pi/4)."""
    return [i * math.pi / (4 * (n + 1)) for i in range(1, n + 1)]


def _photon_yield(no_click: int, slots: int, p_dark: float) -> tuple[float, float]:
    """Signal-only mean detected photons per slot and its standard error.

    Uses P(no click) = exp(-x) * (1 - p_dark)^4, so dark counts drop out.
    """
    if slots == 0:
        return math.nan, math.nan
    f = no_click / slots
    if f == 0:
        return math.inf, math.inf
    x = -math.log(f) + 4.0 * math.log1p(-p_dark)
    err = math.sqrt((1.0 - f) / (f * slots))
    return x, err


def malus_sweep(
    angles,
    pulses_per_angle: int,
    config: ExperimentConfig | None = None,
    seed: int = 0,
    *,
    pattern_length: int = 1024,
    signal_fraction: float = 0.5,
) -> SweepResult:
    """Measured decoy/signal ratio at each polarizer angle next to ``tan^2(theta - pi/4)``.

    Each angle replays one pseudorandom intensity pattern; the ratio uses
    dark-corrected photon yields so that it estimates the optical ratio.
    """
    angles = [float(a) for a in angles]
    if any(b <= a for a, b in zip(angles, angles[1:])):
        raise ValueError("angles must be strictly increasing")
    config = ExperimentConfig() if config is None else config
    rng = np.random.default_rng(seed)
    pattern_rng, run_rng = rng.spawn(2)
    pattern = draw_symbols(pattern_length, signal_fraction, config.transmitter.p_z, pattern_rng)
    seeds = run_rng.integers(0, 2**63, size=len(angles))
    p_dark = dark_probability(config.channel, config.receiver, config.transmitter.rep_rate)
    points = []
    for theta, run_seed in zip(angles, seeds):
        predicted = intensity_ratio(theta)
        cfg = config.with_updates(transmitter={"theta": theta})
        rec = run_montecarlo(cfg, pulses_per_angle, int(run_seed), pattern=pattern).records
        det = rec.detected
        y, raw = [], []
        for cls in IntensityClass:
            sel = rec.intensity == cls
            n_sel = int(sel.sum())
            hits = int(det[sel].sum())
            y.append(_photon_yield(n_sel - hits, n_sel, p_dark))
            raw.append(hits / n_sel if n_sel else math.nan)
        (x_mu, e_mu), (x_nu, e_nu) = y
        ratio = x_nu / x_mu
        err = math.sqrt((e_nu / x_mu) ** 2 + (ratio * e_mu / x_mu) ** 2)
        points.append(SweepPoint(theta, predicted, ratio, err, raw[1] / raw[0], int(det.sum())))
    return SweepResult(tuple(points))


@dataclass(frozen=True)
class SlotHistogram:
    position: np.ndarray  # slot index (within the period when folded)
    intensity: np.ndarray
    mean: np.ndarray  # detections per repetition
    sigma: np.ndarray
    repetitions: int
    level: tuple[float, float]  # class-average of ``mean``
    band: tuple[float, float]  # 2 sigma spread of ``mean`` within each class

    def rows(self):
        for i in range(len(self.position)):
            yield int(self.position[i]), int(self.intensity[i]), float(self.mean[i]), float(self.sigma[i])


def slot_histogram(records: DetectionRecords, window: int = 50, period: int | None = None, start: int = 0) -> SlotHistogram:
    """Detections per slot over ``window`` slots starting at ``start``.

    With ``period`` (a repeated pattern) every repetition is folded onto the
    pattern positions, so the means are per-repetition detection probabilities.
    """
    n = len(records)
    span = n if period is None else period
    if window < 1 or start < 0 or start + window > span or window > n:
        raise ValueError("window does not fit in the record")
    det = records.detected.astype(float)
    if period is None:
        reps = 1
        mean = det[start : start + window]
        sigma = np.sqrt(mean * (1.0 - mean))
        k = np.asarray(records.intensity[start : start + window])
    else:
        reps = n // period
        if reps == 0:
            raise ValueError("record shorter than one period")
        folded = det[: reps * period].reshape(reps, period)[:, start : start + window]
        mean = folded.mean(axis=0)
        sigma = np.sqrt(mean * (1.0 - mean) / reps)
        k = np.asarray(records.intensity[start : start + window])
    level, band = [], []
    for cls in IntensityClass:
        sel = k == cls
        if sel.any():
            level.append(float(mean[sel].mean()))
            band.append(float(2.0 * mean[sel].std()))
        else:
            level.append(0.0)
            band.append(0.0)
    return SlotHistogram(
        np.arange(start, start + window), k.copy(), np.asarray(mean, dtype=float), sigma, reps, tuple(level), tuple(band)
    )


def pattern_stream(length: int, config: ExperimentConfig, seed: int) -> SymbolStream:
    """Pseudorandom intensity/state pattern with the configured probabilities."""
    rng = np.random.default_rng(seed)
    return draw_symbols(length, config.transmitter.p_mu, config.transmitter.p_z, rng)

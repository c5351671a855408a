"""End-to-end runs: per-pulse Monte Carlo and aggregate (expected-count) mode."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, validate
from .errors import EmptyBasisError
from .link import (
    NO_DETECTION,
    DetectorId,
    click_probabilities,
    dark_probability,
    dead_time_slots,
    detector_weights,
    outcome_probabilities,
    sample_clicks,
    squash_clicks,
    transmittance,
)
from .optics import sop_vector
from .transmitter import (
    IntensityClass,
    LogicalState,
    SymbolStream,
    draw_symbols,
    driver_phase_trace,
    encode_polarization,
    mean_photons_from_phase,
)

log = logging.getLogger(__name__)

N_CLASSES = 2
N_STATES = 3
N_DETECTORS = 4
Z_DETECTORS = (DetectorId.Z0, DetectorId.Z1)
X_DETECTORS = (DetectorId.XPLUS, DetectorId.XMINUS)


@dataclass
class CountTable:
    """Detections ``counts[k, a, d]`` and emitted pulses ``sent[k, a]``.

    ``k`` is the IntensityClass, ``a`` the LogicalState and ``d`` the DetectorId.
    """

    counts: np.ndarray
    sent: np.ndarray
    duration: float
    rep_rate: float

    @classmethod
    def zeros(cls, duration: float = 0.0, rep_rate: float = 1.0) -> "CountTable":
        return cls(
            np.zeros((N_CLASSES, N_STATES, N_DETECTORS), dtype=np.int64),
            np.zeros((N_CLASSES, N_STATES)),
            duration,
            rep_rate,
        )

    def __add__(self, other: "CountTable") -> "CountTable":
        return CountTable(
            self.counts + other.counts, self.sent + other.sent, self.duration + other.duration, self.rep_rate
        )

    @property
    def total_detections(self) -> int:
        return int(self.counts.sum())

    def basis_counts(self, basis: str) -> tuple[np.ndarray, np.ndarray]:
        """Sifted detections and errors per intensity class for ``basis`` in {"Z", "X"}.

        Cross-basis events (Z-alphabet sender, X detector and vice versa) are dropped.
        """
        c = self.counts
        if basis == "Z":
            n = c[:, :2, :2].sum(axis=(1, 2))
            m = c[:, LogicalState.KET0, DetectorId.Z1] + c[:, LogicalState.KET1, DetectorId.Z0]
        elif basis == "X":
            n = c[:, LogicalState.PLUS, 2:].sum(axis=1)
            m = c[:, LogicalState.PLUS, DetectorId.XMINUS]
        else:
            raise ValueError(f"unknown basis {basis!r}")
        return n, m

    def sifted_z(self) -> int:
        return int(self.basis_counts("Z")[0].sum())

    def to_dict(self) -> dict:
        return {
            "counts": self.counts.tolist(),
            "sent": self.sent.tolist(),
            "duration": self.duration,
            "rep_rate": self.rep_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CountTable":
        return cls(
            np.asarray(d["counts"], dtype=np.int64),
            np.asarray(d["sent"], dtype=float),
            float(d["duration"]),
            float(d["rep_rate"]),
        )


@dataclass
class DetectionRecords:
    """Per-slot records in slot order; the slot index is the array position."""

    intensity: np.ndarray
    state: np.ndarray
    outcome: np.ndarray  # DetectorId value or NO_DETECTION
    mean_photons: np.ndarray
    photons: np.ndarray  # emitted photon number (simulation ground truth)

    def __len__(self) -> int:
        return len(self.intensity)

    @property
    def slot(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def detected(self) -> np.ndarray:
        return self.outcome != NO_DETECTION

    @classmethod
    def concat(cls, parts: list["DetectionRecords"]) -> "DetectionRecords":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in cls.__dataclass_fields__))


@dataclass
class MonteCarloResult:
    table: CountTable
    records: DetectionRecords | None
    # detections by (class, state, detector, photon number 0 / 1 / >=2)
    photon_tally: np.ndarray
    squash_events: int = 0

    def true_counts(self, basis: str, photons: int) -> int:
        """Ground-truth sifted detections in ``basis`` from pulses with exactly ``photons``."""
        t = self.photon_tally[..., photons]
        if basis == "Z":
            return int(t[:, :2, :2].sum())
        return int(t[:, LogicalState.PLUS, 2:].sum())

    def true_errors(self, basis: str, photons: int) -> int:
        t = self.photon_tally[..., photons]
        if basis == "Z":
            return int(t[:, LogicalState.KET0, DetectorId.Z1].sum() + t[:, LogicalState.KET1, DetectorId.Z0].sum())
        return int(t[:, LogicalState.PLUS, DetectorId.XMINUS].sum())


def _routing_matrix(config: ExperimentConfig) -> np.ndarray:
    """Per-state probability that a photon reaches (and fires) each detector."""
    eta = transmittance(config.channel, config.receiver)
    rows = [detector_weights(sop_vector(encode_polarization(a)), config.receiver) * eta for a in LogicalState]
    return np.array(rows)


def _route_photons(photons: np.ndarray, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Split each pulse's photons over the detectors (independent survival)."""
    hits = np.zeros(q.shape, dtype=np.int64)
    remaining = photons.astype(np.int64)
    left = np.ones(len(photons))
    for d in range(q.shape[1]):
        p = np.clip(q[:, d] / np.maximum(left, 1e-300), 0.0, 1.0)
        hits[:, d] = rng.binomial(remaining, p)
        remaining = remaining - hits[:, d]
        left = left - q[:, d]
    return hits


def _apply_dead_time(clicks: np.ndarray, dead_slots: int, blind_until: np.ndarray, offset: int) -> None:
    """Suppress clicks within ``dead_slots`` after a registered click (in place)."""
    for d in range(clicks.shape[1]):
        idx = np.flatnonzero(clicks[:, d])
        keep_until = blind_until[d]
        for i in idx:
            slot = offset + i
            if slot <= keep_until:
                clicks[i, d] = False
            else:
                keep_until = slot + dead_slots
        blind_until[d] = keep_until


def run_montecarlo(
    config: ExperimentConfig,
    n_pulses: int,
    seed: int,
    *,
    pattern: SymbolStream | None = None,
    keep_records: bool = True,
    chunk: int = 1 << 20,
) -> MonteCarloResult:
    """Per-pulse simulation of transmitter, link and receiver.

    ``pattern`` (if given) is repeated to fill ``n_pulses`` slots; otherwise
    symbols are drawn i.i.d. from the transmitter probabilities. Slots are
    processed in order so that driver settling carries across chunks.
    """
    validate(config)
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    tx = config.transmitter
    rng = np.random.default_rng(seed)
    q_state = _routing_matrix(config)
    p_dark = dark_probability(config.channel, config.receiver, tx.rep_rate)
    dead_slots = dead_time_slots(config.receiver, tx.rep_rate)
    blind_until = np.full(N_DETECTORS, -1, dtype=np.int64)

    counts = np.zeros(N_CLASSES * N_STATES * (N_DETECTORS + 1), dtype=np.int64)
    tally = np.zeros(N_CLASSES * N_STATES * N_DETECTORS * 3, dtype=np.int64)
    sent = np.zeros(N_CLASSES * N_STATES, dtype=np.int64)
    parts: list[DetectionRecords] = []
    squashed = 0
    previous = None

    for start in range(0, n_pulses, chunk):
        n = min(chunk, n_pulses - start)
        if pattern is None:
            sym = draw_symbols(n, tx.p_mu, tx.p_z, rng)
        else:
            idx = (np.arange(start, start + n)) % len(pattern)
            sym = pattern[idx]
        applied = driver_phase_trace(sym, tx, previous)
        previous = float(applied[-1])
        means = mean_photons_from_phase(applied, tx)
        photons = rng.poisson(means)

        hits = np.zeros((n, N_DETECTORS), dtype=np.int64)
        lit = np.flatnonzero(photons)
        if len(lit):
            hits[lit] = _route_photons(photons[lit], q_state[sym.state[lit]], rng)
        clicks = hits > 0
        if p_dark > 0:
            clicks |= sample_clicks(np.full((n, N_DETECTORS), p_dark), rng)
        if dead_slots:
            _apply_dead_time(clicks, dead_slots, blind_until, start)
        outcome, n_multi = squash_clicks(clicks, rng)
        squashed += n_multi

        cell = sym.intensity.astype(np.int64) * N_STATES + sym.state
        sent += np.bincount(cell, minlength=N_CLASSES * N_STATES)
        counts += np.bincount(cell * (N_DETECTORS + 1) + (outcome + 1), minlength=counts.size)
        det = outcome != NO_DETECTION
        pclass = np.minimum(photons[det], 2)
        tally += np.bincount((cell[det] * N_DETECTORS + outcome[det]) * 3 + pclass, minlength=tally.size)
        if keep_records:
            parts.append(
                DetectionRecords(
                    sym.intensity.copy(), sym.state.copy(), outcome, means.astype(np.float32), photons.astype(np.int16)
                )
            )

    counts = counts.reshape(N_CLASSES, N_STATES, N_DETECTORS + 1)[..., 1:]
    table = CountTable(counts, sent.reshape(N_CLASSES, N_STATES).astype(float), n_pulses / tx.rep_rate, tx.rep_rate)
    records = DetectionRecords.concat(parts) if keep_records else None
    return MonteCarloResult(table, records, tally.reshape(N_CLASSES, N_STATES, N_DETECTORS, 3), squashed)


def class_means(config: ExperimentConfig) -> np.ndarray:
    """Ideal-driver mean photon number per IntensityClass."""
    tx = config.transmitter
    return np.array([tx.mu, tx.decoy_mean])


def symbol_probabilities(config: ExperimentConfig) -> np.ndarray:
    tx = config.transmitter
    pk = np.array([tx.p_mu, tx.p_nu])
    pa = np.array([tx.p_z / 2, tx.p_z / 2, 1.0 - tx.p_z])
    return np.outer(pk, pa)


def slot_outcome_probabilities(config: ExperimentConfig) -> np.ndarray:
    """Post-squash outcome probabilities per (class, state); last index is no detection."""
    tx = config.transmitter
    out = np.empty((N_CLASSES, N_STATES, N_DETECTORS + 1))
    for a in LogicalState:
        sop = sop_vector(encode_polarization(a))
        probs = click_probabilities(sop, class_means(config), config.channel, config.receiver, tx.rep_rate)
        out[:, a, :] = outcome_probabilities(probs)
    return out


def expected_counts(config: ExperimentConfig, duration: float) -> np.ndarray:
    """Mean detections per (class, state, detector) for an ideal driver."""
    n_slots = duration * config.transmitter.rep_rate
    return n_slots * symbol_probabilities(config)[..., None] * slot_outcome_probabilities(config)[..., :N_DETECTORS]


def run_aggregate(config: ExperimentConfig, duration: float, seed: int) -> CountTable:
    """Poisson-sampled count table for ``duration`` seconds; driver settling is ignored."""
    validate(config)
    if not duration > 0:
        raise ValueError("duration must be > 0")
    rng = np.random.default_rng(seed)
    return _aggregate_draw(config, duration, rng)


def _aggregate_draw(config: ExperimentConfig, duration: float, rng: np.random.Generator) -> CountTable:
    means = expected_counts(config, duration)
    sent = duration * config.transmitter.rep_rate * symbol_probabilities(config)
    return CountTable(rng.poisson(means).astype(np.int64), sent, duration, config.transmitter.rep_rate)


def run_windows(config: ExperimentConfig, duration: float, window: float, seed: int) -> list[CountTable]:
    """Aggregate run split into consecutive windows (last one may be shorter)."""
    validate(config)
    if not (duration > 0 and window > 0):
        raise ValueError("duration and window must be > 0")
    rng = np.random.default_rng(seed)
    n_full = int(math.floor(duration / window + 1e-9))
    spans = [window] * n_full
    rest = duration - n_full * window
    if rest > 1e-9 * window:
        spans.append(rest)
    return [_aggregate_draw(config, span, rng) for span in spans]


_Z_CELLS = np.zeros((N_CLASSES, N_STATES, N_DETECTORS), dtype=bool)
_Z_CELLS[:, :2, :2] = True


def _split_window(table: CountTable, need: int, rng: np.random.Generator) -> tuple[CountTable, CountTable]:
    """Cut a window right after its ``need``-th sifted Z event.

    Events are uniform in time within the window, so the cut time is the
    ``need``-th order statistic of the Z events; other cells are thinned
    binomially by the elapsed fraction.
    """
    z_counts = table.counts[_Z_CELLS]
    z = int(z_counts.sum())
    frac = rng.beta(need, z - need + 1)
    head_z = rng.multivariate_hypergeometric(z_counts, need)
    head = np.zeros_like(table.counts)
    head[_Z_CELLS] = head_z
    other = ~_Z_CELLS
    head[other] = rng.binomial(table.counts[other], frac)
    first = CountTable(head, table.sent * frac, table.duration * frac, table.rep_rate)
    second = CountTable(table.counts - head, table.sent * (1 - frac), table.duration * (1 - frac), table.rep_rate)
    return first, second


def segment_blocks(windows: list[CountTable], block_bits: int, seed: int) -> list[CountTable]:
    """Group consecutive windows into blocks of exactly ``block_bits`` sifted Z detections.

    The trailing partial block is discarded.
    """
    rng = np.random.default_rng(seed)
    blocks: list[CountTable] = []
    acc: CountTable | None = None
    queue = list(windows)
    while queue:
        w = queue.pop(0)
        have = 0 if acc is None else acc.sifted_z()
        need = block_bits - have
        if w.sifted_z() < need:
            acc = w if acc is None else acc + w
            continue
        head, tail = _split_window(w, need, rng)
        blocks.append(head if acc is None else acc + head)
        acc = None
        if tail.duration > 0:
            queue.insert(0, tail)
    return blocks


@dataclass(frozen=True)
class QberEstimate:
    q_z: float
    q_z_err: float
    q_x: float
    q_x_err: float


def _ratio(m: int, n: int, basis: str) -> tuple[float, float]:
    if n == 0:
        raise EmptyBasisError(f"no sifted detections in the {basis} basis")
    q = m / n
    return q, math.sqrt(q * (1 - q) / n)


def qber_from_table(table: CountTable) -> QberEstimate:
    nz, mz = table.basis_counts("Z")
    nx, mx = table.basis_counts("X")
    qz, ez = _ratio(int(mz.sum()), int(nz.sum()), "Z")
    qx, ex = _ratio(int(mx.sum()), int(nx.sum()), "X")
    return QberEstimate(qz, ez, qx, ex)


def expected_qber(config: ExperimentConfig) -> tuple[float, float]:
    """Noise-free (Q_Z, Q_X) implied by the configuration."""
    e = expected_counts(config, 1.0)
    nz = e[:, :2, :2].sum()
    mz = e[:, LogicalState.KET0, DetectorId.Z1].sum() + e[:, LogicalState.KET1, DetectorId.Z0].sum()
    nx = e[:, LogicalState.PLUS, 2:].sum()
    mx = e[:, LogicalState.PLUS, DetectorId.XMINUS].sum()
    return float(mz / nz), float(mx / nx)

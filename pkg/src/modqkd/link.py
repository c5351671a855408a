"""Free-space channel and passive four-detector polarization receiver."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .optics import JonesVector, NamedSOP, sop_vector, waveplate


class DetectorId(IntEnum):
    Z0 = 0
    Z1 = 1
    XPLUS = 2
    XMINUS = 3


NO_DETECTION = -1

_PROJECTIONS = {
    DetectorId.Z0: NamedSOP.L,
    DetectorId.Z1: NamedSOP.R,
    DetectorId.XPLUS: NamedSOP.D,
    DetectorId.XMINUS: NamedSOP.A,
}


@dataclass(frozen=True)
class ChannelConfig:
    loss_db: float = 15.0
    background_rate: float = 0.0  # counts/s per detector

    def problems(self, path: str = "channel") -> list[tuple[str, str]]:
        out = []
        if not self.loss_db >= 0:
            out.append((f"{path}.loss_db", "must be >= 0"))
        if not self.background_rate >= 0:
            out.append((f"{path}.background_rate", "must be >= 0"))
        return out


@dataclass(frozen=True)
class ReceiverConfig:
    split_z: float = 0.6
    split_x: float = 0.4
    det_efficiency: float = 0.68
    dark_rate: float = 1000.0
    # 19.5 dB end-to-end with the 15 dB channel and 68% detectors
    receiver_loss_db: float = 2.825
    # retardance errors (rad) ahead of each arm's projection
    misalign_z: float = 0.018456
    misalign_x: float = 0.098553
    dead_time: float = 0.0  # seconds, non-paralyzable; 0 disables

    def problems(self, path: str = "receiver") -> list[tuple[str, str]]:
        out = []
        for name in ("split_z", "split_x", "det_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                out.append((f"{path}.{name}", "must lie in [0, 1]"))
        if abs(self.split_z + self.split_x - 1.0) > 1e-12:
            out.append((f"{path}.split_x", "split_z + split_x must equal 1"))
        for name in ("dark_rate", "receiver_loss_db", "dead_time"):
            if not getattr(self, name) >= 0:
                out.append((f"{path}.{name}", "must be >= 0"))
        for name in ("misalign_z", "misalign_x"):
            if not math.isfinite(getattr(self, name)):
                out.append((f"{path}.{name}", "must be finite"))
        return out


def transmittance(channel: ChannelConfig, receiver: ReceiverConfig) -> float:
    """End-to-end photon survival including detector efficiency."""
    total_db = channel.loss_db + receiver.receiver_loss_db
    if math.isinf(total_db):
        return 0.0
    return 10.0 ** (-total_db / 10.0) * receiver.det_efficiency


def dark_probability(channel: ChannelConfig, receiver: ReceiverConfig, rep_rate: float) -> float:
    """Per-detector, per-slot probability of a noise click."""
    return min(1.0, (receiver.dark_rate + channel.background_rate) / rep_rate)


def detector_weights(sop: JonesVector, receiver: ReceiverConfig) -> np.ndarray:
    """Arm probability times projection probability, indexed by DetectorId."""
    w = np.empty(4)
    arms = (
        (receiver.split_z, receiver.misalign_z, (DetectorId.Z0, DetectorId.Z1)),
        (receiver.split_x, receiver.misalign_x, (DetectorId.XPLUS, DetectorId.XMINUS)),
    )
    for split, err, dets in arms:
        rotated = sop.apply(waveplate(err, 0.0))
        for d in dets:
            w[d] = split * sop_vector(_PROJECTIONS[d]).overlap(rotated)
    return w


def click_probabilities(
    sop: JonesVector,
    mean_photons,
    channel: ChannelConfig,
    receiver: ReceiverConfig,
    rep_rate: float,
) -> np.ndarray:
    """Click probability per detector; trailing axis is DetectorId.

    ``mean_photons`` may be an array, in which case the result has shape
    ``mean_photons.shape + (4,)``.
    """
    mean_photons = np.asarray(mean_photons, dtype=float)
    if np.any(mean_photons < 0):
        raise ValueError("mean_photons must be >= 0")
    eta = transmittance(channel, receiver)
    w = detector_weights(sop, receiver)
    p_sig = -np.expm1(-mean_photons[..., None] * eta * w)
    p_dark = dark_probability(channel, receiver, rep_rate)
    return 1.0 - (1.0 - p_sig) * (1.0 - p_dark)


def sample_clicks(probabilities, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli click per detector."""
    probabilities = np.asarray(probabilities, dtype=float)
    if np.any((probabilities < 0) | (probabilities > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    return rng.random(probabilities.shape) < probabilities


def squash_clicks(clicks, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Reduce click patterns to one detector per slot.

    Multiple clicks pick uniformly among the clicked detectors. Returns the
    outcome (DetectorId value or NO_DETECTION) per row and the number of
    multi-click rows.
    """
    clicks = np.atleast_2d(np.asarray(clicks, dtype=bool))
    n_clicked = clicks.sum(axis=1)
    out = np.full(len(clicks), NO_DETECTION, dtype=np.int8)
    single = n_clicked == 1
    out[single] = np.argmax(clicks[single], axis=1)
    multi = np.flatnonzero(n_clicked > 1)
    if len(multi):
        keys = rng.random((len(multi), clicks.shape[1]))
        keys[~clicks[multi]] = -1.0
        out[multi] = np.argmax(keys, axis=1)
    return out, int(len(multi))


def outcome_probabilities(click_probs) -> np.ndarray:
    """Exact post-squash outcome distribution from independent click probabilities.

    Returns ``shape[:-1] + (5,)``: index 0..3 is DetectorId, index 4 is no detection.
    """
    p = np.asarray(click_probs, dtype=float)
    n = p.shape[-1]
    out = np.zeros(p.shape[:-1] + (n + 1,))
    for pattern in itertools.product((False, True), repeat=n):
        prob = np.ones(p.shape[:-1])
        for d, hit in enumerate(pattern):
            prob = prob * (p[..., d] if hit else 1.0 - p[..., d])
        k = sum(pattern)
        if k == 0:
            out[..., n] += prob
        else:
            for d, hit in enumerate(pattern):
                if hit:
                    out[..., d] += prob / k
    return out


def dead_time_slots(receiver: ReceiverConfig, rep_rate: float) -> int:
    return int(math.ceil(receiver.dead_time * rep_rate - 1e-9)) if receiver.dead_time > 0 else 0

"""Grid search over source parameters for the block key rate at each total loss."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..config import ExperimentConfig
from ..engine import CountTable, expected_counts, symbol_probabilities
from .decoy import SourceParams
from .keyrate import finite_key_report


@dataclass(frozen=True)
class DecoyGrid:
    mu: tuple[float, ...] = tuple(np.round(np.arange(0.2, 1.01, 0.05), 4))
    nu_ratio: tuple[float, ...] = tuple(np.round(np.arange(0.1, 0.61, 0.05), 4))
    p_mu: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    p_z: tuple[float, ...] = (0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9)

    def points(self):
        return itertools.product(self.mu, self.nu_ratio, self.p_mu, self.p_z)


@dataclass(frozen=True)
class SurfacePoint:
    loss_db: float
    mu: float
    nu_ratio: float
    p_mu: float
    p_z: float
    skr: float


@dataclass
class OptimizeResult:
    losses: list[float]
    surface: list[SurfacePoint] = field(default_factory=list)

    def best(self, loss_db: float, nu_ratio: float | None = None) -> SurfacePoint:
        """Highest-rate point at ``loss_db``, optionally restricted to one decoy ratio."""
        pts = [p for p in self.surface if p.loss_db == loss_db]
        if nu_ratio is not None:
            pts = [p for p in pts if math.isclose(p.nu_ratio, nu_ratio, abs_tol=1e-9)]
        if not pts:
            raise KeyError(f"no surface points at loss {loss_db} dB")
        return max(pts, key=lambda p: (p.skr, -p.mu, -p.nu_ratio, -p.p_mu, -p.p_z))


def with_total_loss(config: ExperimentConfig, total_db: float) -> ExperimentConfig:
    """Set the channel loss so channel + receiver loss + detector efficiency equal ``total_db``."""
    rx = config.receiver
    fixed = rx.receiver_loss_db - 10.0 * math.log10(rx.det_efficiency)
    channel_db = total_db - fixed
    if channel_db < 0:
        raise ValueError(f"total loss {total_db} dB is below the receiver's own {fixed:.3f} dB")
    return config.with_updates(channel={"loss_db": channel_db})


def block_table(config: ExperimentConfig, block_bits: int | None = None) -> CountTable | None:
    """Expected counts over the time needed to collect one block of sifted Z detections."""
    block_bits = config.security.block_bits if block_bits is None else block_bits
    per_second = expected_counts(config, 1.0)
    z_rate = per_second[:, :2, :2].sum()
    if z_rate <= 0:
        return None
    t = block_bits / z_rate
    rate = config.transmitter.rep_rate
    return CountTable(per_second * t, t * rate * symbol_probabilities(config), t, rate)


def block_skr(config: ExperimentConfig) -> float:
    table = block_table(config)
    if table is None:
        return 0.0
    return finite_key_report(table, SourceParams.from_transmitter(config.transmitter), config.security).skr


def optimize_decoy(losses, config: ExperimentConfig | None = None, grid: DecoyGrid | None = None) -> OptimizeResult:
    """Finite-key rate over ``grid`` at every total loss in ``losses`` (dB)."""
    losses = [float(x) for x in losses]
    if not losses:
        raise ValueError("loss grid is empty")
    config = ExperimentConfig() if config is None else config
    grid = DecoyGrid() if grid is None else grid
    result = OptimizeResult(losses)
    for loss in losses:
        base = with_total_loss(config, loss)
        for mu, ratio, p_mu, p_z in grid.points():
            cfg = base.with_updates(
                transmitter={"mu": mu, "nu": mu * ratio, "theta": None, "p_mu": p_mu, "p_z": p_z}
            )
            result.surface.append(SurfacePoint(loss, mu, ratio, p_mu, p_z, block_skr(cfg)))
    return result

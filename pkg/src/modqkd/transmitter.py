"""Transmitter model: symbol draws, intensity-modulator driver and encoder."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np
from scipy.signal import lfilter

from .optics import NamedSOP, intensity_ratio, optical_response, theta_for_ratio


class IntensityClass(IntEnum):
    SIGNAL = 0
    DECOY = 1


class LogicalState(IntEnum):
    KET0 = 0
    KET1 = 1
    PLUS = 2


class ModulatorMode(str, Enum):
    STATIONARY = "stationary"
    QUADRATURE = "quadrature"


_ENCODING = {
    LogicalState.KET0: NamedSOP.L,
    LogicalState.KET1: NamedSOP.R,
    LogicalState.PLUS: NamedSOP.D,
}


@dataclass(frozen=True)
class PulseSymbol:
    intensity: IntensityClass
    state: LogicalState


@dataclass(frozen=True)
class DriverModel:
    """First-order settling of the phase-modulator drive.

    ``settle_fraction`` is the residual fraction of the previous applied
    phase still present when the next slot is sampled.
    """

    settle_fraction: float = 0.0
    swing: float = math.pi

    def problems(self, path: str = "driver") -> list[tuple[str, str]]:
        out = []
        if not 0.0 <= self.settle_fraction < 1.0:
            out.append((f"{path}.settle_fraction", "must lie in [0, 1)"))
        if not 0.0 < self.swing <= math.pi:
            out.append((f"{path}.swing", "must lie in (0, pi]"))
        return out


@dataclass(frozen=True)
class TransmitterConfig:
    rep_rate: float = 50e6
    mu: float = 0.6
    nu: float = 0.2
    p_mu: float = 0.7
    p_z: float = 0.046
    # None: derived from nu/mu. When set, the decoy level follows the polarizer.
    theta: float | None = None
    driver: DriverModel = field(default_factory=DriverModel)
    modulator_mode: ModulatorMode = ModulatorMode.STATIONARY
    pulse_fwhm: float = 575e-12

    def __post_init__(self):
        if not isinstance(self.modulator_mode, ModulatorMode):
            try:
                object.__setattr__(self, "modulator_mode", ModulatorMode(self.modulator_mode))
            except ValueError:
                pass  # reported by problems()

    @property
    def effective_theta(self) -> float:
        if self.theta is not None:
            return float(self.theta)
        return theta_for_ratio(self.nu / self.mu)

    @property
    def decoy_mean(self) -> float:
        """Mean photon number of an ideally driven decoy pulse."""
        return self.mu * intensity_ratio(self.effective_theta)

    @property
    def p_nu(self) -> float:
        return 1.0 - self.p_mu

    def problems(self, path: str = "transmitter") -> list[tuple[str, str]]:
        out = []
        if not (self.rep_rate > 0 and math.isfinite(self.rep_rate)):
            out.append((f"{path}.rep_rate", "must be a positive finite frequency"))
        if not self.mu > 0:
            out.append((f"{path}.mu", "must be > 0"))
        for name in ("p_mu", "p_z"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                out.append((f"{path}.{name}", "must lie in (0, 1)"))
        if self.theta is None:
            if not 0.0 < self.nu < self.mu:
                out.append((f"{path}.nu", "must satisfy 0 < nu < mu"))
        else:
            if not math.isfinite(self.theta):
                out.append((f"{path}.theta", "must be finite"))
            elif abs(math.cos(self.theta - math.pi / 4)) < 1e-12:
                out.append((f"{path}.theta", "signal transmission vanishes (pole)"))
            elif self.mu > 0 and not self.decoy_mean < self.mu:
                out.append((f"{path}.theta", "decoy level must stay below the signal level"))
        if not isinstance(self.modulator_mode, ModulatorMode):
            out.append((f"{path}.modulator_mode", f"must be one of {[m.value for m in ModulatorMode]}"))
        out.extend(self.driver.problems(f"{path}.driver"))
        return out


@dataclass
class SymbolStream:
    """Column-wise storage of a symbol sequence."""

    intensity: np.ndarray  # int8, IntensityClass values
    state: np.ndarray  # int8, LogicalState values

    def __len__(self) -> int:
        return len(self.intensity)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return PulseSymbol(IntensityClass(int(self.intensity[idx])), LogicalState(int(self.state[idx])))
        return SymbolStream(self.intensity[idx], self.state[idx])

    @classmethod
    def from_symbols(cls, symbols) -> "SymbolStream":
        symbols = list(symbols)
        return cls(
            np.array([int(s.intensity) for s in symbols], dtype=np.int8),
            np.array([int(s.state) for s in symbols], dtype=np.int8),
        )

    def tile(self, n: int) -> "SymbolStream":
        reps = -(-n // len(self))
        return SymbolStream(np.tile(self.intensity, reps)[:n], np.tile(self.state, reps)[:n])


def draw_symbols(n: int, p_mu: float, p_z: float, rng: np.random.Generator) -> SymbolStream:
    u = rng.random((2, n))
    intensity = np.where(u[0] < p_mu, IntensityClass.SIGNAL, IntensityClass.DECOY).astype(np.int8)
    state = np.full(n, LogicalState.PLUS, dtype=np.int8)
    state[u[1] < p_z / 2] = LogicalState.KET0
    state[(u[1] >= p_z / 2) & (u[1] < p_z)] = LogicalState.KET1
    return SymbolStream(intensity, state)


def generate_sequence(n: int, config: TransmitterConfig, rng: np.random.Generator) -> SymbolStream:
    """Draw ``n`` i.i.d. symbols: intensity with ``p_mu``, Z states with ``p_z/2`` each."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return draw_symbols(n, config.p_mu, config.p_z, rng)


def _quadrature_swing(ratio: float) -> float:
    # full-contrast response around pi/2: (1 -+ sin(s/2))/2 must give the same ratio
    return 2.0 * math.asin((1.0 - ratio) / (1.0 + ratio))


def phase_targets(config: TransmitterConfig) -> tuple[float, float]:
    """Target phase for (signal, decoy) slots."""
    if config.modulator_mode is ModulatorMode.STATIONARY:
        return 0.0, config.driver.swing
    swing = _quadrature_swing(intensity_ratio(config.effective_theta))
    return math.pi / 2 - swing / 2, math.pi / 2 + swing / 2


def response_theta(config: TransmitterConfig) -> float:
    """Polarizer angle used in the response; quadrature mode emulates a full-contrast modulator."""
    if config.modulator_mode is ModulatorMode.STATIONARY:
        return config.effective_theta
    return math.pi / 4


def settle(targets: np.ndarray, settle_fraction: float, previous: float | None = None) -> np.ndarray:
    """Apply ``y[i] = t[i] + s*(y[i-1] - t[i])``; ``y[0] = t[0]`` unless ``previous`` is given."""
    targets = np.asarray(targets, dtype=float)
    if settle_fraction == 0.0 or len(targets) == 0:
        return targets.copy()
    s = settle_fraction
    prev = targets[0] if previous is None else previous
    y, _ = lfilter([1.0 - s], [1.0, -s], targets, zi=[s * prev])
    return y


def driver_phase_trace(symbols: SymbolStream, config: TransmitterConfig, previous: float | None = None) -> np.ndarray:
    sig, dec = phase_targets(config)
    targets = np.where(np.asarray(symbols.intensity) == IntensityClass.SIGNAL, sig, dec)
    return settle(targets, config.driver.settle_fraction, previous)


def voa_scale(config: TransmitterConfig) -> float:
    """Multiplier mapping relative transmission to mean photon number."""
    sig, _ = phase_targets(config)
    ideal = float(optical_response(sig, response_theta(config)))
    if ideal <= 0.0:
        raise ValueError("signal slot has zero transmission")
    return config.mu / ideal


def mean_photons_from_phase(applied: np.ndarray, config: TransmitterConfig) -> np.ndarray:
    return voa_scale(config) * optical_response(applied, response_theta(config))


def pulse_mean_photons(symbols: SymbolStream, config: TransmitterConfig) -> np.ndarray:
    intensity_ratio(config.effective_theta)  # surfaces the pole error
    return mean_photons_from_phase(driver_phase_trace(symbols, config), config)


def encode_polarization(symbol: PulseSymbol | LogicalState) -> NamedSOP:
    state = symbol.state if isinstance(symbol, PulseSymbol) else LogicalState(symbol)
    return _ENCODING[state]

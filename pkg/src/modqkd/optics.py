"""Jones-calculus helpers for the Sagnac-loop modulators.

Angles are in radians. A linear polarizer at angle ``theta`` projects onto
``cos(theta)|H> + sin(theta)|V>``, with ``theta`` measured from ``|H>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "JonesVector",
    "NamedSOP",
    "PoleError",
    "sop_vector",
    "ipognac_state",
    "waveplate",
    "polarizer",
    "polarizer_transmission",
    "optical_response",
    "intensity_ratio",
    "theta_for_ratio",
]

_SQRT_HALF = 1.0 / np.sqrt(2.0)


class PoleError(ValueError):
    """Raised when the intensity ratio is evaluated where the signal level vanishes."""


@dataclass(frozen=True)
class JonesVector:
    a_h: complex
    a_v: complex

    @classmethod
    def from_array(cls, arr) -> "JonesVector":
        arr = np.asarray(arr, dtype=complex)
        return cls(complex(arr[0]), complex(arr[1]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.a_h, self.a_v], dtype=complex)

    @property
    def norm2(self) -> float:
        return abs(self.a_h) ** 2 + abs(self.a_v) ** 2

    def inner(self, other: "JonesVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.array, other.array))

    def apply(self, op: np.ndarray) -> "JonesVector":
        return JonesVector.from_array(np.asarray(op) @ self.array)

    def overlap(self, other: "JonesVector") -> float:
        """|<self|other>|^2."""
        return abs(self.inner(other)) ** 2

    def same_state(self, other: "JonesVector", tol: float = 1e-9) -> bool:
        """Equality up to a global phase."""
        return abs(abs(self.inner(other)) - 1.0) < tol


class NamedSOP(Enum):
    H = "H"
    V = "V"
    D = "D"
    A = "A"
    L = "L"
    R = "R"


_SOP_TABLE = {
    NamedSOP.H: (1.0, 0.0),
    NamedSOP.V: (0.0, 1.0),
    NamedSOP.D: (_SQRT_HALF, _SQRT_HALF),
    NamedSOP.A: (_SQRT_HALF, -_SQRT_HALF),
    NamedSOP.L: (_SQRT_HALF, 1j * _SQRT_HALF),
    NamedSOP.R: (_SQRT_HALF, -1j * _SQRT_HALF),
}


def sop_vector(name: NamedSOP | str) -> JonesVector:
    name = NamedSOP(name)
    a_h, a_v = _SOP_TABLE[name]
    return JonesVector(complex(a_h), complex(a_v))


def ipognac_state(delta_phi: float) -> JonesVector:
    """Output of the Sagnac-loop modulator for a CW/CCW phase difference."""
    if not np.isfinite(delta_phi):
        raise ValueError(f"delta_phi must be finite, got {delta_phi!r}")
    return JonesVector(complex(_SQRT_HALF), _SQRT_HALF * np.exp(1j * delta_phi))


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]], dtype=complex)


def waveplate(retardance: float, angle: float) -> np.ndarray:
    """Retarder with its fast axis at ``angle``; ``retardance=pi`` is a HWP."""
    core = np.array([[1.0, 0.0], [0.0, np.exp(1j * retardance)]], dtype=complex)
    return _rotation(-angle) @ core @ _rotation(angle)


def polarizer(theta: float) -> np.ndarray:
    """Rank-1 projector onto the linear state at ``theta``."""
    v = np.array([np.cos(theta), np.sin(theta)], dtype=complex)
    return np.outer(v, v.conj())


def polarizer_transmission(state: JonesVector, theta: float) -> float:
    amp = np.cos(theta) * state.a_h + np.sin(theta) * state.a_v
    return float(min(1.0, abs(amp) ** 2))


def optical_response(delta_phi, theta):
    """Fraction of the modulator output transmitted by the polarizer.

    Closed form of ``|<theta|delta_phi>|^2``; broadcasts over numpy arrays.
    """
    return 0.5 * (1.0 + np.sin(2.0 * np.asarray(theta)) * np.cos(delta_phi))


def intensity_ratio(theta: float) -> float:
    """Decoy-to-signal ratio ``tan^2(theta - pi/4)`` of the intensity modulator."""
    c = np.cos(theta - np.pi / 4)
    if abs(c) < 1e-12:
        raise PoleError(f"signal transmission vanishes at theta={theta!r}")
    return float(np.tan(theta - np.pi / 4) ** 2)


def theta_for_ratio(ratio: float) -> float:
    """Polarizer angle in (0, pi/4] giving the requested intensity ratio (<= 1)."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio!r}")
    return float(np.pi / 4 - np.arctan(np.sqrt(ratio)))

"""Finite-size 1-decoy estimates of vacuum and single-photon contributions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDataError
from .params import SecurityParams
from .stats import hoeffding_delta, tau_n


@dataclass(frozen=True)
class SourceParams:
    mu: float
    nu: float
    p_mu: float

    @property
    def p_nu(self) -> float:
        return 1.0 - self.p_mu

    @classmethod
    def from_transmitter(cls, tx) -> "SourceParams":
        return cls(tx.mu, tx.decoy_mean, tx.p_mu)

    def tau(self, n: int) -> float:
        return tau_n(self.p_mu, self.mu, self.nu, n)

    def check(self) -> None:
        if not (self.mu > self.nu > 0):
            raise InsufficientDataError("decoy estimation needs mu > nu > 0")
        if not 0.0 < self.p_mu < 1.0:
            raise InsufficientDataError("decoy estimation needs both intensities to be sent")


@dataclass(frozen=True)
class BasisBounds:
    s0_lower: float
    s0_upper: float
    s1_lower: float
    v1_upper: float
    n_total: int
    m_total: int


@dataclass(frozen=True)
class DecoyBounds:
    z: BasisBounds
    x: BasisBounds

    @property
    def s0(self) -> float:
        return self.z.s0_lower

    @property
    def s1(self) -> float:
        return self.z.s1_lower

    @property
    def v1_x(self) -> float:
        return self.x.v1_upper

    def as_tuple(self) -> tuple[float, float, float]:
        return self.z.s0_lower, self.z.s1_lower, self.x.v1_upper


def _clamp(v: float, hi: float) -> float:
    return min(max(v, 0.0), hi)


def basis_bounds(n_k, m_k, source: SourceParams, eps: float) -> BasisBounds:
    """Bounds from per-intensity detections ``n_k`` and errors ``m_k`` (index 0 = signal).

    ``eps`` is the failure probability of each Hoeffding deviation; ``eps=1``
    gives the deviation-free (asymptotic) estimates.
    """
    mu, nu = source.mu, source.nu
    p = (source.p_mu, source.p_nu)
    k = (mu, nu)
    n_tot = float(np.sum(n_k))
    m_tot = float(np.sum(m_k))
    dn = hoeffding_delta(n_tot, eps)
    dm = hoeffding_delta(m_tot, eps)

    def scaled(counts, i, dev):
        return math.exp(k[i]) / p[i] * (counts[i] + dev)

    n_hi_mu, n_lo_nu = scaled(n_k, 0, dn), scaled(n_k, 1, -dn)
    m_hi_mu, m_lo_nu, m_hi_nu = scaled(m_k, 0, dm), scaled(m_k, 1, -dm), scaled(m_k, 1, dm)
    tau0, tau1 = source.tau(0), source.tau(1)

    s0_lower = tau0 * (mu * n_lo_nu - nu * n_hi_mu) / (mu - nu)
    # vacuum detections land in either detector with equal probability
    s0_upper = 2.0 * (tau0 * m_hi_nu + dm)
    s1_lower = (
        tau1
        * mu
        * (n_lo_nu - nu**2 / mu**2 * n_hi_mu - (mu**2 - nu**2) / mu**2 * s0_upper / tau0)
        / (mu * nu - nu**2)
    )
    v1_upper = tau1 * (m_hi_mu - m_lo_nu) / (mu - nu)
    return BasisBounds(
        float(_clamp(s0_lower, n_tot)),
        float(_clamp(s0_upper, n_tot)),
        float(_clamp(s1_lower, n_tot)),
        float(_clamp(v1_upper, n_tot)),
        int(n_tot),
        int(m_tot),
    )


def decoy_bounds_analytic(table, params: SecurityParams, source: SourceParams, *, asymptotic: bool = False) -> DecoyBounds:
    """Lower bounds on Z-basis vacuum/single-photon detections and the X-basis single-photon error bound."""
    source.check()
    if np.any(np.asarray(table.sent).sum(axis=1) <= 0):
        raise InsufficientDataError("both intensity classes must have been sent")
    eps = 1.0 if asymptotic else params.eps_concentration
    nz, mz = table.basis_counts("Z")
    nx, mx = table.basis_counts("X")
    return DecoyBounds(basis_bounds(nz, mz, source, eps), basis_bounds(nx, mx, source, eps))

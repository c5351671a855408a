"""Linear-program oracle for the decoy estimation problem.

Works in the count domain: the unknowns are the numbers of detections
(and errors) caused by pulses with exactly ``n`` photons, ``n <= cap``,
plus a lumped tail for ``n > cap``. Each intensity's observed counts must
match the photon-number mixture within the same Hoeffding deviations the
analytic bounds use, so its optimum is at least as tight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..errors import InfeasibleProgramError, InsufficientDataError
from .decoy import SourceParams
from .params import SecurityParams
from .stats import hoeffding_delta


@dataclass(frozen=True)
class LpBounds:
    s0: tuple[float, float]
    s1: tuple[float, float]
    v1: tuple[float, float]


def _conditional_intensity(source: SourceParams, n_max: int) -> np.ndarray:
    """``P(intensity k | n photons)`` for n = 0..n_max; rows are (signal, decoy)."""
    ks = (source.mu, source.nu)
    ps = (source.p_mu, source.p_nu)
    joint = np.array(
        [[p * math.exp(-k) * k**n / math.factorial(n) for n in range(n_max + 1)] for p, k in zip(ps, ks)]
    )
    return joint / joint.sum(axis=0)


def _solve(c, A_ub, b_ub, A_eq, b_eq) -> float:
    # presolve mis-flags these badly scaled programs (tail terms ~1e-15) as infeasible
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs", options={"presolve": False}
    )
    if res.status == 2:
        raise InfeasibleProgramError("decoy linear program is infeasible")
    if res.status != 0:
        raise InfeasibleProgramError(f"linear program failed: {res.message}")
    return float(res.fun)


def basis_lp(n_k, m_k, source: SourceParams, eps: float, cap: int) -> LpBounds:
    n_k = np.asarray(n_k, dtype=float)
    m_k = np.asarray(m_k, dtype=float)
    n_tot, m_tot = n_k.sum(), m_k.sum()
    if n_tot == 0:
        return LpBounds((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
    dn = hoeffding_delta(n_tot, eps) / n_tot
    dm = hoeffding_delta(m_tot, eps) / n_tot
    n_k, m_k = n_k / n_tot, m_k / n_tot

    cond = _conditional_intensity(source, cap + 1)
    p_in = cond[:, : cap + 1]
    # decoy/signal odds fall with n, so the first tail term bounds the whole tail
    tail_odds = cond[1, cap + 1] / cond[0, cap + 1]

    ns = cap + 1
    S, E = 0, ns
    XS, XE = 2 * ns, 2 * ns + 2
    nvar = 2 * ns + 4

    A_eq = np.zeros((2, nvar))
    A_eq[0, S : S + ns] = 1
    A_eq[0, XS : XS + 2] = 1
    A_eq[1, E : E + ns] = 1
    A_eq[1, XE : XE + 2] = 1
    b_eq = np.array([1.0, m_tot / n_tot])

    rows, rhs = [], []

    def add(row, b):
        rows.append(row)
        rhs.append(b)

    for k in range(2):
        for base, tail, obs, dev in ((S, XS, n_k, dn), (E, XE, m_k, dm)):
            row = np.zeros(nvar)
            row[base : base + ns] = p_in[k]
            row[tail + k] = 1
            add(row, obs[k] + dev)
            add(-row, -(obs[k] - dev))
    for n in range(ns):
        row = np.zeros(nvar)
        row[E + n], row[S + n] = 1, -1
        add(row, 0.0)
    for k in range(2):
        row = np.zeros(nvar)
        row[XE + k], row[XS + k] = 1, -1
        add(row, 0.0)
    for tail in (XS, XE):
        row = np.zeros(nvar)
        row[tail + 1], row[tail] = 1, -tail_odds
        add(row, 0.0)
    # vacuum errors are half the vacuum detections, up to a deviation
    row = np.zeros(nvar)
    row[S], row[E] = 0.5, -1
    add(row, dm)
    add(-row, dm)

    A_ub, b_ub = np.array(rows), np.array(rhs)

    def extent(idx):
        c = np.zeros(nvar)
        c[idx] = 1
        lo = _solve(c, A_ub, b_ub, A_eq, b_eq)
        hi = -_solve(-c, A_ub, b_ub, A_eq, b_eq)
        return float(max(lo, 0.0) * n_tot), float(max(hi, 0.0) * n_tot)

    return LpBounds(extent(S), extent(S + 1), extent(E + 1))


def decoy_bounds_lp(table, params: SecurityParams, source: SourceParams, basis: str = "Z", *, asymptotic: bool = False) -> LpBounds:
    """Exact extremes of vacuum/single-photon detections and single-photon errors in ``basis``."""
    source.check()
    if np.any(np.asarray(table.sent).sum(axis=1) <= 0):
        raise InsufficientDataError("both intensity classes must have been sent")
    eps = 1.0 if asymptotic else params.eps_concentration
    n_k, m_k = table.basis_counts(basis)
    return basis_lp(n_k, m_k, source, eps, params.lp_photon_cap)

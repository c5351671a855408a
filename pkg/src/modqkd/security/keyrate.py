"""Phase-error bound, leak terms and the finite/asymptotic secret key rate."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ..errors import DegenerateBoundError
from .decoy import DecoyBounds, SourceParams, decoy_bounds_analytic
from .params import N_EPSILON_TERMS, SecurityParams
from .stats import binary_entropy


def lambda_sec(eps_sec: float) -> float:
    return 6.0 * math.log2(N_EPSILON_TERMS / eps_sec)


def lambda_c(eps_cor: float) -> float:
    return math.log2(1.0 / eps_cor)


def lambda_ec(n_z: float, qber_z: float, f_ec: float) -> float:
    return f_ec * n_z * binary_entropy(qber_z)


def sampling_correction(eps: float, ratio: float, n_a: float, n_b: float) -> float:
    """Random-sampling deviation between the error rates of two subsets of sizes ``n_a``, ``n_b``."""
    if ratio <= 0.0 or ratio >= 1.0:
        return 0.0
    # log domain: the product underflows for tiny ratios
    log_inner = (
        math.log2(n_a + n_b)
        - math.log2(n_a)
        - math.log2(n_b)
        - math.log2(ratio)
        - math.log2(1.0 - ratio)
        + 2.0 * math.log2(21.0 / eps)
    )
    scale = (n_a + n_b) / (n_a * n_b) * ratio * (1.0 - ratio) / math.log(2)
    return math.sqrt(scale * max(log_inner, 0.0))


def phase_error_bound(s1_z: float, s1_x: float, v1_x: float, eps: float | None) -> float:
    """Upper bound on the single-photon phase error rate in Z; ``eps=None`` drops the sampling term."""
    if s1_x <= 0:
        raise DegenerateBoundError("no single-photon events in the X basis")
    ratio = min(v1_x / s1_x, 1.0)
    if eps is None:
        phi = ratio
    else:
        if s1_z <= 0:
            raise DegenerateBoundError("no single-photon events in the Z basis")
        phi = ratio + sampling_correction(eps, ratio, s1_z, s1_x)
    return min(max(phi, 0.0), 0.5)


@dataclass(frozen=True)
class FiniteKeyReport:
    s0: float
    s1: float
    phi_z: float
    lambda_ec: float
    lambda_c: float
    lambda_sec: float
    t: float
    skr: float
    skr_asymptotic: float
    n_z: int = 0
    qber_z: float = 0.0
    qber_x: float = 0.0
    s1_x: float = 0.0
    v1_x: float = 0.0

    @property
    def secret_bits(self) -> float:
        return self.skr * self.t

    def to_dict(self) -> dict:
        return asdict(self)


def skr_finite(
    s0: float,
    s1: float,
    phi_z: float,
    t: float,
    n_z_sifted: float,
    qber_z: float,
    params: SecurityParams,
    *,
    skr_asymptotic: float = math.nan,
) -> FiniteKeyReport:
    if not t > 0:
        raise ValueError("t must be > 0")
    if not 0.0 <= phi_z <= 0.5:
        raise ValueError("phi_z must lie in [0, 1/2]")
    lec = lambda_ec(n_z_sifted, qber_z, params.f_ec)
    lc = lambda_c(params.eps_cor)
    ls = lambda_sec(params.eps_sec)
    bits = s0 + s1 * (1.0 - binary_entropy(phi_z)) - lec - lc - ls
    return FiniteKeyReport(
        s0=s0,
        s1=s1,
        phi_z=phi_z,
        lambda_ec=lec,
        lambda_c=lc,
        lambda_sec=ls,
        t=t,
        skr=max(0.0, bits / t),
        skr_asymptotic=skr_asymptotic,
        n_z=int(n_z_sifted),
        qber_z=qber_z,
    )


def _qber(table, basis: str) -> tuple[int, float]:
    n, m = table.basis_counts(basis)
    n, m = int(n.sum()), int(m.sum())
    return n, (m / n if n else 0.0)


def _phase(bounds: DecoyBounds, eps: float | None) -> float:
    try:
        return phase_error_bound(bounds.z.s1_lower, bounds.x.s1_lower, bounds.x.v1_upper, eps)
    except DegenerateBoundError:
        return 0.5


def skr_asymptotic(table, source: SourceParams, params: SecurityParams) -> float:
    """Key rate with every statistical deviation and the correctness/secrecy leaks removed."""
    if not table.duration > 0:
        raise ValueError("table duration must be > 0")
    bounds = decoy_bounds_analytic(table, params, source, asymptotic=True)
    n_z, q_z = _qber(table, "Z")
    phi = _phase(bounds, None)
    bits = bounds.z.s0_lower + bounds.z.s1_lower * (1.0 - binary_entropy(phi)) - lambda_ec(n_z, q_z, params.f_ec)
    return max(0.0, bits / table.duration)


def finite_key_report(table, source: SourceParams, params: SecurityParams) -> FiniteKeyReport:
    """Full finite-key evaluation of one block (``table.duration`` is the transmission time)."""
    bounds = decoy_bounds_analytic(table, params, source)
    n_z, q_z = _qber(table, "Z")
    _, q_x = _qber(table, "X")
    phi = _phase(bounds, params.eps_sec)
    report = skr_finite(
        bounds.z.s0_lower,
        bounds.z.s1_lower,
        phi,
        table.duration,
        n_z,
        q_z,
        params,
        skr_asymptotic=skr_asymptotic(table, source, params),
    )
    return FiniteKeyReport(
        **{**report.to_dict(), "qber_x": q_x, "s1_x": bounds.x.s1_lower, "v1_x": bounds.x.v1_upper}
    )

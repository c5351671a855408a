from __future__ import annotations

import math


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"binary entropy needs p in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def tau_n(p_mu: float, mu: float, nu: float, n: int) -> float:
    """Probability that a pulse carries exactly ``n`` photons, averaged over both intensities."""
    if n < 0:
        raise ValueError("n must be >= 0")
    total = 0.0
    for p_k, k in ((p_mu, mu), (1.0 - p_mu, nu)):
        if p_k == 0.0:
            continue
        # k**0 == 1 also for k == 0
        total += p_k * math.exp(-k) * k**n / math.factorial(n)
    return total


def hoeffding_delta(n: float, eps: float) -> float:
    """Deviation ``sqrt(n/2 * ln(1/eps))`` of a sum of ``n`` bounded trials."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    return math.sqrt(n / 2.0 * math.log(1.0 / eps))

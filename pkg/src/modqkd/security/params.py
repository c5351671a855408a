from __future__ import annotations

import math
from dataclasses import dataclass

# number of failure events in the secrecy union bound; also fixes lambda_sec
N_EPSILON_TERMS = 19


@dataclass(frozen=True)
class SecurityParams:
    eps_sec: float = 1e-10
    eps_cor: float = 1e-15
    f_ec: float = 1.16
    lp_photon_cap: int = 10
    # failure probability of each concentration bound; None -> eps_sec / 19
    eps_pe: float | None = None
    block_bits: int = 6_590_000

    @property
    def eps_concentration(self) -> float:
        return self.eps_sec / N_EPSILON_TERMS if self.eps_pe is None else self.eps_pe

    def problems(self, path: str = "security") -> list[tuple[str, str]]:
        out = []
        for name in ("eps_sec", "eps_cor"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                out.append((f"{path}.{name}", "must lie in (0, 1)"))
        if self.eps_pe is not None and not 0.0 < self.eps_pe < 1.0:
            out.append((f"{path}.eps_pe", "must lie in (0, 1)"))
        if not (self.f_ec >= 1.0 and math.isfinite(self.f_ec)):
            out.append((f"{path}.f_ec", "must be >= 1"))
        if not (isinstance(self.lp_photon_cap, int) and self.lp_photon_cap >= 2):
            out.append((f"{path}.lp_photon_cap", "must be an integer >= 2"))
        if not (isinstance(self.block_bits, int) and self.block_bits >= 1):
            out.append((f"{path}.block_bits", "must be an integer >= 1"))
        return out

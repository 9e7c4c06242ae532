"""有限原子 Lévy 测度 Π = Σ w_k δ_{r_k}"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from levytree.errors import DomainError
from levytree.mechanism.base import Capability, LevyMeasure
from levytree.util import format_float


@dataclass(frozen=True)
class AtomsMeasure(LevyMeasure):
    atoms: tuple[tuple[float, float], ...]  # (r_k, w_k)

    def __post_init__(self) -> None:
        if not self.atoms:
            raise DomainError("atoms measure needs at least one atom")
        for r, w in self.atoms:
            if r <= 0.0 or w <= 0.0:
                raise DomainError(f"atom ({r}, {w}) must have positive location and weight")

    @property
    def name(self) -> str:
        return "atoms"

    @property
    def capabilities(self) -> set[Capability]:
        return {Capability.TILT_BELOW_ZERO}

    @property
    def theta_inf(self) -> float:
        # 支撑有界，任意倾斜都可积
        return float("-inf")

    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        arr = np.asarray(self.atoms, dtype=float)
        return arr[:, 0], arr[:, 1]

    def integral(self, lam: float, order: int = 0) -> float:
        r, w = self._arrays()
        small = r < 1.0
        if order == 0:
            return float(np.sum(w * (np.expm1(-lam * r) + lam * r * small)))
        if order == 1:
            return float(np.sum(w * r * (small - np.exp(-lam * r))))
        if order == 2:
            return float(np.sum(w * r * r * np.exp(-lam * r)))
        raise ValueError(f"order must be 0, 1 or 2, got {order}")

    def tilt(self, theta: float) -> AtomsMeasure:
        if theta == 0.0:
            return self
        return AtomsMeasure(tuple((r, w * float(np.exp(-theta * r))) for r, w in self.atoms))

    def boundary_conservative(self) -> bool:
        return True

    def small_jumps_unbounded(self) -> bool:
        return False

    def fields(self) -> dict[str, str]:
        return {"atoms": ",".join(f"{format_float(r)}:{format_float(w)}" for r, w in self.atoms)}

    @classmethod
    def from_fields(cls, fields: dict[str, str]) -> AtomsMeasure:
        pairs = []
        for item in fields["atoms"].split(","):
            r, w = item.split(":")
            pairs.append((float(r), float(w)))
        return cls(tuple(pairs))

"""（调和）稳定 Lévy 测度 Π(dr) = c·r^{−1−a}·e^{−κr}dr，a ∈ (1,2)

积分项闭式：

    I(λ) = cΓ(−a)[(λ+κ)^a − κ^a − aκ^{a−1}λ] − λ·C₁,
    C₁ = c∫_1^∞ r^{−a}e^{−κr}dr = c(e^{−κ} − κ^{a−1}Γ(2−a,κ))/(a−1).

κ = 0 时即纯稳定测度。对其按 θ ≥ −κ 倾斜得到参数 κ+θ 的同一变体，
所以 θ_∞ = −κ。
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from scipy import special

from levytree.errors import DomainError
from levytree.mechanism.base import Capability, LevyMeasure
from levytree.util import format_float


@dataclass(frozen=True)
class StableMeasure(LevyMeasure):
    index: float  # a
    scale: float  # c
    tempering: float = 0.0  # κ

    def __post_init__(self) -> None:
        if not 1.0 < self.index < 2.0:
            raise DomainError(f"stable index must lie in (1,2), got {self.index}")
        if self.scale <= 0.0:
            raise DomainError(f"stable scale must be positive, got {self.scale}")
        if self.tempering < 0.0:
            raise DomainError(f"tempering must be non-negative, got {self.tempering}")

    @property
    def name(self) -> str:
        return "stable"

    @property
    def capabilities(self) -> set[Capability]:
        return {Capability.TILT_BELOW_ZERO} if self.tempering > 0.0 else set()

    @property
    def theta_inf(self) -> float:
        return -self.tempering

    @cached_property
    def _gamma_neg(self) -> float:
        return float(special.gamma(-self.index))

    @cached_property
    def compensator(self) -> float:
        a, c, k = self.index, self.scale, self.tempering
        if k == 0.0:
            return c / (a - 1.0)
        upper = float(special.gammaincc(2.0 - a, k) * special.gamma(2.0 - a))
        return c * (math.exp(-k) - k ** (a - 1.0) * upper) / (a - 1.0)

    def integral(self, lam: float, order: int = 0) -> float:
        a, c, k = self.index, self.scale, self.tempering
        base = lam + k
        if base < 0.0 or (order == 2 and base == 0.0):
            raise DomainError(f"λ={lam} outside the stable domain (θ_∞={-k})")
        g = self._gamma_neg
        if order == 0:
            return c * g * (base**a - k**a - a * k ** (a - 1.0) * lam) - lam * self.compensator
        if order == 1:
            return c * a * g * (base ** (a - 1.0) - k ** (a - 1.0)) - self.compensator
        if order == 2:
            return c * a * (a - 1.0) * g * base ** (a - 2.0)
        raise ValueError(f"order must be 0, 1 or 2, got {order}")

    def tilt(self, theta: float) -> StableMeasure:
        if theta == 0.0:
            return self
        if self.tempering + theta < 0.0:
            raise DomainError(f"tilt θ={theta} below θ_∞={-self.tempering}")
        return StableMeasure(self.index, self.scale, self.tempering + theta)

    def boundary_conservative(self) -> bool:
        # ∫_1^∞ r·r^{−1−a}dr < ∞ 对 a > 1 恒成立
        return True

    def small_jumps_unbounded(self) -> bool:
        return True

    def growth_index(self) -> float:
        return self.index

    def leading_coefficient(self) -> float:
        return self.scale * self._gamma_neg

    def fields(self) -> dict[str, str]:
        out = {"index": format_float(self.index), "scale": format_float(self.scale)}
        if self.tempering:
            out["tempering"] = format_float(self.tempering)
        return out

    @classmethod
    def from_fields(cls, fields: dict[str, str]) -> StableMeasure:
        index = float(fields["index"])
        tempering = float(fields.get("tempering", 0.0))
        if fields["scale"] == "calibrated":
            return cls.calibrated(index, tempering)
        return cls(index=index, scale=float(fields["scale"]), tempering=tempering)

    @classmethod
    def calibrated(cls, index: float, tempering: float = 0.0) -> StableMeasure:
        """c = 1/Γ(−a)，使纯稳定部分为 λ^a"""
        return cls(index=index, scale=1.0 / float(special.gamma(-index)), tempering=tempering)

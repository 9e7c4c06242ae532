"""Π = 0：二次（布朗）分支机制"""

from __future__ import annotations

from dataclasses import dataclass

from levytree.mechanism.base import Capability, LevyMeasure


@dataclass(frozen=True)
class ZeroMeasure(LevyMeasure):
    """零测度，ψ(λ) = αλ + βλ²"""

    @property
    def name(self) -> str:
        return "quadratic"

    @property
    def capabilities(self) -> set[Capability]:
        return {Capability.TILT_BELOW_ZERO, Capability.SAMPLER_EXACT}

    @property
    def theta_inf(self) -> float:
        return float("-inf")

    def integral(self, lam: float, order: int = 0) -> float:
        del lam, order
        return 0.0

    def tilt(self, theta: float) -> ZeroMeasure:
        del theta
        return self

    def boundary_conservative(self) -> bool:
        return True

    def small_jumps_unbounded(self) -> bool:
        return False

    def fields(self) -> dict[str, str]:
        return {}

    @classmethod
    def from_fields(cls, fields: dict[str, str]) -> ZeroMeasure:
        del fields
        return cls()

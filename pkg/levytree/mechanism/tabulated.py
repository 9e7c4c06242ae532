"""表格化 Lévy 测度

密度在对数网格 r_0 < … < r_n 上给出，格点之间按对数-对数线性插值（分段幂律），
两端用幂律尾补全：

    r < r_0:  p_0·(r/r_0)^{−1−a_L}
    r > r_n:  p_n·(r/r_n)^{−1−a_R}·e^{−κ_R(r−r_n)}

所有分段都用自适应积分计算；倾斜只记录累计的 θ。
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from levytree.errors import DomainError, QuadratureError
from levytree.mechanism.base import Capability, LevyMeasure
from levytree.util import format_float

EPS_REL = 1e-11
TOLERANCE = 1e-9


def _kernel(order: int, lam: float, r: float) -> float:
    """积分核（未除以 r²），r ≥ 1 时不含补偿项"""
    below = 1.0 if r < 1.0 else 0.0
    if order == 0:
        return math.expm1(-lam * r) + lam * r * below
    if order == 1:
        return r * (below - math.exp(-lam * r))
    return r * r * math.exp(-lam * r)


def _scaled_kernel(order: int, lam: float, r: float) -> float:
    """r < 1 时的积分核除以 r²，在 r→0 处有界"""
    x = lam * r
    if order == 0:
        if abs(x) < 1e-3:
            return lam * lam * (0.5 - x / 6.0 + x * x / 24.0)
        return (math.expm1(-x) + x) / (r * r)
    if order == 1:
        if abs(x) < 1e-8:
            return lam * (1.0 - 0.5 * x)
        return -math.expm1(-x) / r
    return math.exp(-x)


@dataclass(frozen=True)
class TabulatedMeasure(LevyMeasure):
    grid: tuple[tuple[float, float], ...]  # (r_j, p_j)
    left_index: float  # a_L
    right_index: float  # a_R
    right_rate: float = 0.0  # κ_R
    shift: float = 0.0  # 累计倾斜 θ

    def __post_init__(self) -> None:
        if len(self.grid) < 2:
            raise DomainError("tabulated measure needs at least two grid points")
        rs = [r for r, _ in self.grid]
        if any(r <= 0.0 for r in rs) or any(b <= a for a, b in zip(rs, rs[1:])):
            raise DomainError("tabulated grid must be positive and strictly increasing")
        if any(p <= 0.0 for _, p in self.grid):
            raise DomainError("tabulated density values must be positive")
        if not 0.0 < self.left_index < 2.0:
            raise DomainError(f"left tail index must lie in (0,2), got {self.left_index}")
        if self.right_index <= 0.0:
            raise DomainError(f"right tail index must be positive, got {self.right_index}")
        if self.right_rate < 0.0:
            raise DomainError(f"right tail rate must be non-negative, got {self.right_rate}")
        if self.shift < -self.right_rate:
            raise DomainError(f"tilt {self.shift} below θ_∞={-self.right_rate}")

    @property
    def name(self) -> str:
        return "tabulated"

    @property
    def capabilities(self) -> set[Capability]:
        return {Capability.TILT_BELOW_ZERO} if self.theta_inf < 0.0 else set()

    @property
    def theta_inf(self) -> float:
        return -self.right_rate - self.shift

    def density(self, r: float) -> float:
        """倾斜后的密度"""
        r0, p0 = self.grid[0]
        rn, pn = self.grid[-1]
        tilt = math.exp(-self.shift * r)
        if r < r0:
            return p0 * (r / r0) ** (-1.0 - self.left_index) * tilt
        if r > rn:
            return pn * (r / rn) ** (-1.0 - self.right_index) * math.exp(-self.right_rate * (r - rn)) * tilt
        j = int(np.searchsorted([g[0] for g in self.grid], r, side="right")) - 1
        j = min(j, len(self.grid) - 2)
        (ra, pa), (rb, pb) = self.grid[j], self.grid[j + 1]
        slope = math.log(pb / pa) / math.log(rb / ra)
        return pa * (r / ra) ** slope * tilt

    def _cuts(self, start: float) -> list[float]:
        """从 start 开始的分段点：格点与 1"""
        cuts = sorted({r for r, _ in self.grid} | {1.0, start})
        return [c for c in cuts if c >= start]

    def integral(self, lam: float, order: int = 0) -> float:
        if lam < self.theta_inf or (lam == self.theta_inf and self.right_index <= order):
            raise DomainError(f"λ={lam} outside the tabulated domain (θ_∞={self.theta_inf})")
        r0, p0 = self.grid[0]
        total = 0.0
        err = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            # 左尾在 0 处的奇性交给代数权重 r^{1−a_L}
            lo_end = min(r0, 1.0)
            k_left = p0 * r0 ** (1.0 + self.left_index)
            val, e = integrate.quad(
                lambda r: k_left * math.exp(-self.shift * r) * _scaled_kernel(order, lam, r),
                0.0,
                lo_end,
                weight="alg",
                wvar=(1.0 - self.left_index, 0.0),
                epsrel=EPS_REL,
                epsabs=0.0,
            )
            total += val
            err += e
            cuts = self._cuts(lo_end)
            for a, b in zip(cuts, cuts[1:]):
                val, e = self._piece(order, lam, a, b)
                total += val
                err += e
            val, e = self._piece(order, lam, cuts[-1], math.inf)
            total += val
            err += e
        if err > TOLERANCE * max(abs(total), 1e-300) + 1e-13:
            raise QuadratureError(f"tabulated integral at λ={lam}: error {err:.3e} for value {total:.6e}")
        return total

    def _piece(self, order: int, lam: float, a: float, b: float) -> tuple[float, float]:
        if b <= a:
            return 0.0, 0.0
        func: Callable[[float], float] = lambda r: _kernel(order, lam, r) * self.density(r)  # noqa: E731
        val, e = integrate.quad(func, a, b, epsrel=EPS_REL, epsabs=0.0, limit=200)
        return val, e

    def tilt(self, theta: float) -> TabulatedMeasure:
        if theta == 0.0:
            return self
        if theta < self.theta_inf:
            raise DomainError(f"tilt θ={theta} below θ_∞={self.theta_inf}")
        return TabulatedMeasure(self.grid, self.left_index, self.right_index, self.right_rate, self.shift + theta)

    def boundary_conservative(self) -> bool:
        # 边界处指数因子抵消，只剩幂律尾 r·r^{−1−a_R}
        return self.right_index > 1.0

    def small_jumps_unbounded(self) -> bool:
        return self.left_index >= 1.0

    def growth_index(self) -> float | None:
        return self.left_index if self.left_index > 1.0 else None

    def leading_coefficient(self) -> float:
        r0, p0 = self.grid[0]
        return p0 * r0 ** (1.0 + self.left_index) * float(special.gamma(-self.left_index))

    def fields(self) -> dict[str, str]:
        out = {
            "grid": ",".join(f"{format_float(r)}:{format_float(p)}" for r, p in self.grid),
            "left": format_float(self.left_index),
            "right": format_float(self.right_index),
        }
        if self.right_rate:
            out["rate"] = format_float(self.right_rate)
        if self.shift:
            out["shift"] = format_float(self.shift)
        return out

    @classmethod
    def from_fields(cls, fields: dict[str, str]) -> TabulatedMeasure:
        pairs = []
        for item in fields["grid"].split(","):
            r, p = item.split(":")
            pairs.append((float(r), float(p)))
        return cls(
            grid=tuple(pairs),
            left_index=float(fields["left"]),
            right_index=float(fields["right"]),
            right_rate=float(fields.get("rate", 0.0)),
            shift=float(fields.get("shift", 0.0)),
        )

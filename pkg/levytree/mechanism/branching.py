"""分支机制 ψ(λ) = αλ + βλ² + I(λ) 及其导出的标量函数

包括求值、指数倾斜（ψ_θ）、反函数与共轭 θ̄、累积量 u(a,λ)、
灭绝函数 b(h) 以及 γ_θ。所有函数都是不可变机制值上的纯函数。
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

from scipy import integrate, optimize

from levytree.errors import DomainError, NoRootError, QuadratureError
from levytree.logger import logger
from levytree.mechanism.base import Capability, LevyMeasure
from levytree.mechanism.stable import StableMeasure
from levytree.mechanism.zero import ZeroMeasure
from levytree.types import InvertResult

ROOT_XTOL = 1e-14
ROOT_RTOL = 4.5e-16
TAIL_EPSREL = 1e-12
TAIL_TOLERANCE = 1e-10
CRITICAL_TOL = 1e-13


@dataclass(frozen=True)
class ThetaWindow:
    """Θ^ψ = {θ : ψ_θ 保守}，即 (θ_∞, ∞)，边界点视可积性决定是否属于"""

    theta_inf: float
    boundary_member: bool

    def member(self, theta: float) -> bool:
        if theta > self.theta_inf:
            return True
        return theta == self.theta_inf and self.boundary_member and math.isfinite(theta)


@dataclass(frozen=True)
class BranchingMechanism:
    """三元组 (α, β, Π)

    构造时检查保守性、β>0 或小跳无界可积，以及 Grey 条件 ∫^∞ du/ψ(u) < ∞，
    不满足时抛出 DomainError。
    """

    alpha: float
    beta: float
    levy: LevyMeasure = field(default_factory=ZeroMeasure)

    def __post_init__(self) -> None:
        if not math.isfinite(self.alpha):
            raise DomainError(f"alpha must be finite, got {self.alpha}")
        if not self.beta >= 0.0:
            raise DomainError(f"beta must be non-negative, got {self.beta}")
        growth = self.levy.growth_index()
        if not (self.beta > 0.0 or (growth is not None and growth > 1.0)):
            raise DomainError("Grey condition fails: need beta > 0 or a Lévy part growing faster than λ")
        if not (self.beta > 0.0 or self.levy.small_jumps_unbounded()):
            raise DomainError("mechanism needs beta > 0 or ∫_(0,1) r Π(dr) = ∞")
        if not self.window.member(0.0):
            raise DomainError("mechanism is not conservative: ψ'(0+) = −∞")

    # ==================== 基本量 ====================

    @property
    def theta_inf(self) -> float:
        return self.levy.theta_inf

    @cached_property
    def window(self) -> ThetaWindow:
        return ThetaWindow(self.theta_inf, self.levy.boundary_conservative())

    @property
    def is_quadratic(self) -> bool:
        return self.levy.has_capability(Capability.SAMPLER_EXACT)

    def psi(self, lam: float, order: int = 0) -> float:
        """ψ(λ)、ψ'(λ) 或 ψ''(λ)"""
        if order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        if lam < self.theta_inf or math.isnan(lam):
            raise DomainError(f"λ={lam} below θ_∞={self.theta_inf}")
        if lam == self.theta_inf and (order == 2 or (order == 1 and not self.window.boundary_member)):
            raise DomainError(f"derivative of order {order} undefined at θ_∞={lam}")
        levy = self.levy.integral(lam, order)
        if order == 0:
            return self.alpha * lam + self.beta * lam * lam + levy
        if order == 1:
            return self.alpha + 2.0 * self.beta * lam + levy
        return 2.0 * self.beta + levy

    @property
    def decay(self) -> float:
        """ψ(λ) ~ lead·λ^decay（λ→∞）的指数"""
        if self.beta > 0.0:
            return 2.0
        growth = self.levy.growth_index()
        assert growth is not None
        return growth

    @property
    def lead(self) -> float:
        return self.beta if self.beta > 0.0 else self.levy.leading_coefficient()

    @cached_property
    def critical(self) -> bool:
        return abs(self.psi(0.0, 1)) <= CRITICAL_TOL * max(1.0, abs(self.alpha))

    @cached_property
    def subcritical(self) -> bool:
        return not self.critical and self.psi(0.0, 1) > 0.0

    # ==================== 最小点与反函数 ====================

    @cached_property
    def lambda_min(self) -> float:
        """ψ 在 Θ^ψ 上的最小点（ψ' 的根，或 θ_∞）"""

        def dpsi(x: float) -> float:
            return self.psi(x, 1)

        slope = dpsi(0.0)
        if slope == 0.0 or self.critical:
            return 0.0
        if slope < 0.0:
            hi = 1.0
            while dpsi(hi) <= 0.0:
                hi = 2.0 * hi + 1.0
            return float(optimize.brentq(dpsi, 0.0, hi, xtol=ROOT_XTOL, rtol=ROOT_RTOL))
        edge = self._inner_inf()
        lo = max(-1.0, edge)
        while dpsi(lo) > 0.0:
            if lo == edge:
                return self.theta_inf
            lo = max(2.0 * lo - 1.0, edge)
        return float(optimize.brentq(dpsi, lo, 0.0, xtol=ROOT_XTOL, rtol=ROOT_RTOL))

    def _inner_inf(self) -> float:
        """θ_∞ 处（或刚好在其右侧）可以计算 ψ' 的点"""
        if not math.isfinite(self.theta_inf):
            return -math.inf
        if self.window.boundary_member:
            return self.theta_inf
        return self.theta_inf + 1e-12 * max(1.0, abs(self.theta_inf))

    def largest_root(self, v: float) -> float:
        """ψ(q) = v 在 [λ_min, ∞) 上的最大根"""
        if v == 0.0 and self.lambda_min <= 0.0:
            return 0.0
        base = self.lambda_min
        floor = self.psi(base)
        if v < floor:
            if floor - v <= 1e-14 * max(1.0, abs(v)):
                return base
            raise NoRootError(f"ψ(q) = {v} has no root: min ψ = {floor}")
        if v == floor:
            return base
        step = 1.0
        hi = base + step
        while self.psi(hi) <= v:
            step *= 2.0
            hi = base + step
            logger.debug(f"扩大求根区间: [{base}, {hi}]")
        return float(optimize.brentq(lambda q: self.psi(q) - v, base, hi, xtol=ROOT_XTOL, rtol=ROOT_RTOL))

    @cached_property
    def conservative_root(self) -> float:
        """ψ⁻¹(0)：ψ 的最大根（(次)临界时为 0）"""
        return 0.0 if self.lambda_min <= 0.0 else self.largest_root(0.0)


def evaluate(m: BranchingMechanism, lam: float, order: int = 0) -> float:
    """ψ(λ) 及其导数"""
    return m.psi(lam, order)


def theta_window(m: BranchingMechanism) -> ThetaWindow:
    return m.window


def shift(m: BranchingMechanism, theta: float) -> BranchingMechanism:
    """ψ_θ(λ) = ψ(λ+θ) − ψ(θ)

    倾斜后的积分项按同一截断 1{r<1} 计算，因此 α_θ = ψ'(θ) − I_θ'(0)。
    """
    if theta == 0.0:
        return m
    if not m.window.member(theta):
        raise DomainError(f"θ={theta} is not in Θ^ψ (θ_∞={m.theta_inf})")
    levy = m.levy.tilt(theta)
    alpha = m.psi(theta, 1) - levy.integral(0.0, 1)
    return BranchingMechanism(alpha=alpha, beta=m.beta, levy=levy)


def invert(m: BranchingMechanism, v: float) -> InvertResult:
    """ψ(q) = v 在 [λ_min, ∞) 上的最大根，以及 ψ' 的非负根 θ*

    Raises:
        NoRootError: v < min ψ
    """
    if m.critical:
        theta_star: float | None = 0.0
    elif m.subcritical:
        theta_star = None
    else:
        theta_star = m.lambda_min
    return {"psi_inverse": m.largest_root(v), "theta_star": theta_star}


def theta_bar(m: BranchingMechanism, theta: float) -> float:
    """共轭 θ̄ = max{q : ψ(q) = ψ(θ)}；ψ_θ (次)临界时 θ̄ = θ"""
    if not m.window.member(theta):
        raise DomainError(f"θ={theta} is not in Θ^ψ")
    if theta >= m.lambda_min:
        return theta
    return m.largest_root(m.psi(theta))


def sigma_laplace(m: BranchingMechanism, lam: float) -> float:
    """N^ψ[1 − e^{−λσ}] = ψ⁻¹(λ)"""
    if lam < 0.0:
        raise DomainError(f"λ must be non-negative, got {lam}")
    return m.largest_root(lam)


def sigma_mean(m: BranchingMechanism) -> float:
    """N^ψ[σ 1{σ<∞}] = 1/ψ'(ψ⁻¹(0))"""
    slope = m.psi(m.conservative_root, 1)
    if slope <= 0.0:
        return math.inf
    return 1.0 / slope


def cumulant(m: BranchingMechanism, a: float, lam: float) -> float:
    """u(a,λ)：∂_a u = −ψ(u)，u(0,λ) = λ"""
    if a < 0.0:
        raise DomainError(f"a must be non-negative, got {a}")
    if a == 0.0:
        return lam
    return _cumulant(m, a, lam)


@lru_cache(maxsize=4096)
def _cumulant(m: BranchingMechanism, a: float, lam: float) -> float:
    sol = integrate.solve_ivp(
        lambda _a, u: [-m.psi(float(u[0]))],
        (0.0, a),
        [lam],
        method="DOP853",
        rtol=1e-12,
        atol=1e-16,
    )
    if not sol.success:
        raise QuadratureError(f"cumulant ODE failed at a={a}, λ={lam}: {sol.message}")
    return float(sol.y[0, -1])


def tail_integral(func: Callable[[float], float], start: float, decay: float, limit: float) -> float:
    """∫_start^∞ func(r) dr，其中 func(r)·r^decay → limit（decay > 1）

    [start, R] 上直接积分；[R, ∞) 换元 r = 1/s，decay < 2 时奇性交给代数权重。

    Raises:
        QuadratureError: 误差估计超过 TAIL_TOLERANCE
    """
    cut = max(start + 1.0, 2.0 * abs(start), 1.0)
    with warnings.catch_warnings():
        # 舍入告警只说明已到机器精度，是否可用由误差估计决定
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, head_err = integrate.quad(func, start, cut, epsrel=TAIL_EPSREL, epsabs=0.0, limit=200)
        if decay < 2.0:

            def weighted(s: float) -> float:
                if s == 0.0 or 1.0 / s > 1e150:
                    return limit
                return func(1.0 / s) * s ** (-decay)

            tail, tail_err = integrate.quad(
                weighted, 0.0, 1.0 / cut, weight="alg", wvar=(decay - 2.0, 0.0), epsrel=TAIL_EPSREL, epsabs=0.0
            )
        else:
            at_zero = limit if decay == 2.0 else 0.0

            def plain(s: float) -> float:
                if s == 0.0 or 1.0 / s > 1e150:
                    return at_zero
                return func(1.0 / s) / (s * s)

            tail, tail_err = integrate.quad(plain, 0.0, 1.0 / cut, epsrel=TAIL_EPSREL, epsabs=0.0, limit=200)
    total = head + tail
    if not math.isfinite(total) or head_err + tail_err > TAIL_TOLERANCE * abs(total) + 1e-15:
        raise QuadratureError(f"tail integral from {start}: value {total:.6e}, error {head_err + tail_err:.3e}")
    return total


def grey_integral(m: BranchingMechanism, b: float) -> float:
    """∫_b^∞ dr/ψ(r)，b > ψ⁻¹(0)"""
    return tail_integral(lambda r: 1.0 / m.psi(r), b, m.decay, 1.0 / m.lead)


def extinction(m: BranchingMechanism, h: float, t: float = 0.0) -> float:
    """b_h(t) = b(h−t)，其中 ∫_{b(h)}^∞ dr/ψ(r) = h"""
    if h <= 0.0:
        raise DomainError(f"h must be positive, got {h}")
    if not 0.0 <= t < h:
        raise DomainError(f"t must lie in [0, h), got {t}")
    return _extinction(m, h - t)


@lru_cache(maxsize=4096)
def _extinction(m: BranchingMechanism, h: float) -> float:
    root = m.conservative_root

    def excess(y: float) -> float:
        return grey_integral(m, root + math.exp(y)) - h

    lo, hi = -1.0, 1.0
    while excess(lo) <= 0.0:
        lo = 2.0 * lo - 1.0
        if lo < -700.0:
            raise NoRootError(f"b({h}) below floating point resolution")
    while excess(hi) >= 0.0:
        hi = 2.0 * hi + 1.0
        if hi > 700.0:
            raise NoRootError(f"b({h}) above floating point range")
    y = optimize.brentq(excess, lo, hi, xtol=1e-13, rtol=ROOT_RTOL)
    return root + math.exp(y)


def gamma(m: BranchingMechanism, theta: float, lam: float) -> float:
    """γ_θ(λ) = ψ'(λ+θ) − ψ'(θ)"""
    if lam < 0.0:
        raise DomainError(f"λ must be non-negative, got {lam}")
    if not m.window.member(theta):
        raise DomainError(f"θ={theta} is not in Θ^ψ")
    return m.psi(lam + theta, 1) - m.psi(theta, 1)


def pure_stable_mechanism(index: float, tempering: float = 0.0) -> BranchingMechanism:
    """ψ(λ) = (λ+κ)^a − κ^a − aκ^{a−1}λ（κ = 0 时为 λ^a）"""
    levy = StableMeasure.calibrated(index, tempering)
    # 截断补偿项加回线性部分，使 ψ'(0) = 0
    alpha = levy.compensator
    return BranchingMechanism(alpha=alpha, beta=0.0, levy=levy)

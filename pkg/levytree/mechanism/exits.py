"""退出时间、上升时间与脊分解相关的解析量

以 ψ_θ 的水平曲线 t ↦ b_h^θ(t) 为核心：沿曲线同时积分

    y0 = b_h^θ(t),  y1 = ∫_0^t γ_θ(y0),  y2 = ∫_0^t γ_θ(y0)·e^{−ψ'(θ)s − y1}

得到脊高度密度和退出密度的指数形式。
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from levytree.errors import DomainError, QuadratureError
from levytree.mechanism.branching import (
    BranchingMechanism,
    extinction,
    shift,
    tail_integral,
    theta_bar,
)
from levytree.types import ExitDensityForm, ExitGivenAscension

CURVE_END = 1.0 - 1e-7


def _require_critical(m: BranchingMechanism) -> None:
    if not m.critical:
        raise DomainError("this law is defined for critical mechanisms only")


def _require_member(m: BranchingMechanism, theta: float, strict: bool = True) -> None:
    inside = theta > m.theta_inf if strict else m.window.member(theta)
    if not inside:
        raise DomainError(f"θ={theta} outside Θ^ψ (θ_∞={m.theta_inf})")


def exit_tail(m: BranchingMechanism, theta: float, h: float) -> float:
    """N^ψ[θ ≤ A_h] = b^θ(h)"""
    return extinction(shift(m, theta), h)


# ==================== 水平曲线 ====================


@dataclass(frozen=True)
class LevelCurve:
    """b_h^θ 在 [0, h(1−1e-7)] 上的稠密解"""

    theta: float
    h: float
    t_end: float
    solution: integrate.OdeSolution

    def state(self, t: float) -> np.ndarray:
        return self.solution(min(max(t, 0.0), self.t_end))

    def height(self, t: float) -> float:
        return float(self.state(t)[0])

    def hazard(self, t: float) -> float:
        """∫_0^t γ_θ(b_h^θ(r)) dr"""
        return float(self.state(t)[1])

    def weighted_mass(self) -> float:
        return float(self.state(self.t_end)[2])


@lru_cache(maxsize=256)
def level_curve(m: BranchingMechanism, theta: float, h: float) -> LevelCurve:
    if h <= 0.0:
        raise DomainError(f"h must be positive, got {h}")
    m_theta = shift(m, theta)
    slope = m.psi(theta, 1)
    base = m_theta.psi(0.0, 1)

    def rhs(t: float, y: np.ndarray) -> list[float]:
        g = m_theta.psi(float(y[0]), 1) - base
        return [m_theta.psi(float(y[0])), g, g * math.exp(-slope * t - float(y[1]))]

    t_end = h * CURVE_END
    sol = integrate.solve_ivp(
        rhs,
        (0.0, t_end),
        [extinction(m_theta, h), 0.0, 0.0],
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
        dense_output=True,
    )
    if not sol.success:
        raise QuadratureError(f"level curve ODE failed for θ={theta}, h={h}: {sol.message}")
    return LevelCurve(theta=theta, h=h, t_end=t_end, solution=sol.sol)


# ==================== 退出密度 ====================


def exit_density(m: BranchingMechanism, theta: float, h: float, form: ExitDensityForm = "level") -> float:
    """A_h 在 N^ψ 下的密度 −∂_θ b^θ(h)

    Args:
        form: "level" 为 ψ_θ(b)∫_b^∞ γ_θ/ψ_θ² 形式，"spine" 为沿水平曲线的指数形式
    """
    _require_critical(m)
    _require_member(m, theta)
    if form == "spine":
        return level_curve(m, theta, h).weighted_mass()
    m_theta = shift(m, theta)
    b = extinction(m_theta, h)
    base = m_theta.psi(0.0, 1)

    def integrand(r: float) -> float:
        value = m_theta.psi(r)
        return (m_theta.psi(r, 1) - base) / (value * value)

    return m_theta.psi(b) * tail_integral(integrand, b, m_theta.decay + 1.0, 0.0)


def level_derivative(m: BranchingMechanism, theta: float, a: float, h: float) -> float:
    """∂_λ u^θ(a, b^θ(h−a)) = ψ_θ(b^θ(h))/ψ_θ(b^θ(h−a))"""
    if not 0.0 <= a < h:
        raise DomainError(f"a must lie in [0, h), got {a}")
    m_theta = shift(m, theta)
    return m_theta.psi(extinction(m_theta, h)) / m_theta.psi(extinction(m_theta, h - a))


def _overshoot_factor(m: BranchingMechanism, q: float, anchor: float, h: float) -> float:
    """ψ'(anchor)·ψ_q(b^q(h))·∫_{b^q(h)}^∞ dr/ψ_q(r)²"""
    m_q = shift(m, q)
    b = extinction(m_q, h)

    def integrand(r: float) -> float:
        value = m_q.psi(r)
        return 1.0 / (value * value)

    tail = tail_integral(integrand, b, 2.0 * m_q.decay, 1.0 / m_q.lead**2)
    return m.psi(anchor, 1) * m_q.psi(b) * tail


def exit_given_ascension(m: BranchingMechanism, theta0: float, theta: float, h: float) -> ExitGivenAscension:
    """给定 A = θ0 时 A_h 的条件律，以及 C(θ,h)"""
    _require_critical(m)
    if not m.theta_inf < theta0 < 0.0:
        raise DomainError(f"θ0 must lie in (θ_∞, 0), got {theta0}")
    if theta < theta0:
        raise DomainError(f"θ={theta} must not be below θ0={theta0}")
    if h <= 0.0:
        raise DomainError(f"h must be positive, got {h}")
    bar0 = theta_bar(m, theta0)
    hat = bar0 - theta0 + theta
    result: ExitGivenAscension = {
        "p_geq": 1.0 - _overshoot_factor(m, hat, hat, h),
        "p_eq": _overshoot_factor(m, bar0, bar0, h),
        "p_eq_conjugate": _overshoot_factor(m, theta0, bar0, h),
    }
    bar = theta_bar(m, theta)
    c = _overshoot_factor(m, theta, bar, h)
    result["c"] = c
    if theta < 0.0:
        gap = m.psi(bar, 1)
        slope = m.psi(theta, 1)
        result["p_asc_given_exit"] = (gap - slope) * c / (gap - slope * c)
    return result


# ==================== 脊高度 ====================


def spine_density(m: BranchingMechanism, theta: float, h: float, t: float) -> float:
    """f(t) = γ_θ(b_h^θ(t))·exp(−∫_0^t γ_θ(b_h^θ))，[0,h) 上的概率密度"""
    _require_critical(m)
    _require_member(m, theta, strict=False)
    if not 0.0 <= t < h:
        raise DomainError(f"t must lie in [0, h), got {t}")
    curve = level_curve(m, theta, h)
    m_theta = shift(m, theta)
    y0, y1 = curve.state(t)[:2]
    return (m_theta.psi(float(y0), 1) - m_theta.psi(0.0, 1)) * math.exp(-float(y1))


def spine_cdf(m: BranchingMechanism, theta: float, h: float, t: float) -> float:
    if t <= 0.0:
        return 0.0
    if t >= h:
        return 1.0
    return -math.expm1(-level_curve(m, theta, h).hazard(t))


def spine_quantile(m: BranchingMechanism, theta: float, h: float, u: float) -> float:
    """spine_cdf 的反函数（按累计风险求根）"""
    curve = level_curve(m, theta, h)
    target = -math.log1p(-u)
    if target <= 0.0:
        return 0.0
    if target >= curve.hazard(curve.t_end):
        return curve.t_end
    return float(optimize.brentq(lambda t: curve.hazard(t) - target, 0.0, curve.t_end, xtol=1e-13))


@lru_cache(maxsize=64)
def weighted_spine_law(m: BranchingMechanism, theta: float, h: float, points: int = 4001) -> tuple[np.ndarray, np.ndarray, float]:
    """e^{−ψ'(θ)t} f(t) 归一化后的分布函数表

    Returns:
        (网格, 分布函数值, 归一化常数 E[e^{−ψ'(θ)ξ}])
    """
    curve = level_curve(m, theta, h)
    grid = np.linspace(0.0, curve.t_end, points)
    slope = m.psi(theta, 1)
    density = np.array([spine_density(m, theta, h, float(t)) for t in grid]) * np.exp(-slope * grid)
    cumulative = integrate.cumulative_trapezoid(density, grid, initial=0.0)
    norm = float(cumulative[-1])
    return grid, cumulative / norm, norm


def weighted_spine_cdf(m: BranchingMechanism, theta: float, h: float, t: np.ndarray | float) -> np.ndarray:
    grid, cdf, _ = weighted_spine_law(m, theta, h)
    return np.interp(t, grid, cdf, left=0.0, right=1.0)


# ==================== 闭式律 ====================


def ascension_tail(m: BranchingMechanism, theta: float) -> float:
    """N^ψ[A > θ] = θ̄ − θ"""
    return theta_bar(m, theta) - theta


def forest_ascension_cdf(m: BranchingMechanism, x: float, theta: float) -> float:
    """P_x(A ≤ θ) = exp(−x(θ̄−θ))"""
    return math.exp(-x * ascension_tail(m, theta))


def forest_exit_cdf(m: BranchingMechanism, x: float, theta: float, h: float) -> float:
    """P_x(A_h ≤ θ) = exp(−x b^θ(h))"""
    return math.exp(-x * exit_tail(m, theta, h))


# ==================== 二次机制闭式 ====================


def quadratic_cumulant(beta: float, theta: float, t: float, lam: float) -> float:
    """ψ(λ) = βλ² 倾斜 θ 后的 u^θ(t,λ)"""
    if theta == 0.0:
        return lam / (1.0 + beta * lam * t)
    return 2.0 * theta * lam / ((2.0 * theta + lam) * math.exp(2.0 * beta * theta * t) - lam)


def quadratic_extinction(beta: float, theta: float, t: float) -> float:
    """b^θ(t) = 2θ/(e^{2βθt} − 1)"""
    if theta == 0.0:
        return 1.0 / (beta * t)
    return 2.0 * theta / math.expm1(2.0 * beta * theta * t)


def quadratic_p_eq(beta: float, theta0: float, h: float) -> float:
    """N[A_h = A | A = θ0] = x/sinh²x − coth x，x = βθ0h"""
    x = beta * theta0 * h
    return x / math.sinh(x) ** 2 - 1.0 / math.tanh(x)


def quadratic_p_geq(beta: float, theta0: float, theta: float, h: float) -> float:
    """N[A_h ≥ θ | A = θ0] = 1 + x̂/sinh²x̂ − coth x̂，x̂ = β(θ + 2|θ0|)h"""
    x = beta * (theta + 2.0 * abs(theta0)) * h
    return 1.0 + x / math.sinh(x) ** 2 - 1.0 / math.tanh(x)


def quadratic_exit_density(beta: float, theta: float, h: float) -> float:
    """−∂_θ b^θ(h)"""
    if theta == 0.0:
        return 1.0
    x = 2.0 * beta * theta * h
    em1 = math.expm1(x)
    return -(2.0 / em1 - 2.0 * theta * 2.0 * beta * h * math.exp(x) / (em1 * em1))

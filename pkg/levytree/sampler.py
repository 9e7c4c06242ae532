"""抽样器

二次机制 ψ(λ) = αλ + βλ²（即 βλ² 倾斜 θ = α/(2β)）下的精确或离散化抽样：
森林高度过程、N^ψ 下的总质量、给定长度的游程、嫁接树以及 CSBP 路径。
一般机制的 CSBP 转移用 Gaver–Stehfest 数值反演，只是近似。
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from functools import cache

import numpy as np
from scipy import optimize, special

from levytree.errors import BudgetExceededError, DomainError, RejectionBudgetExceeded, StepTooCoarseError
from levytree.logger import logger
from levytree.mechanism import BranchingMechanism, Capability, cumulant, extinction, theta_bar
from levytree.rng import RngStream
from levytree.types import TreeSampleMeta
from levytree.wtree import INFINITE_TREE, Excursion, InfiniteTree, WTree, from_excursion

CHUNK = 1 << 16
MAX_STEP = 1e-2
MAX_STEPS = 50_000_000
REJECTION_BUDGET = 1_000_000
STEHFEST_TERMS = 14


@dataclass(frozen=True)
class TreeSample:
    """一次抽样得到的树（或无限树哨兵）及元数据"""

    tree: WTree | InfiniteTree
    meta: TreeSampleMeta

    @property
    def is_infinite(self) -> bool:
        return getattr(self.tree, "is_infinite", False)

    @property
    def sigma(self) -> float:
        return self.tree.sigma

    @property
    def h_max(self) -> float:
        return self.tree.h_max


def quadratic_parameters(m: BranchingMechanism) -> tuple[float, float]:
    """二次机制的 (β, θ)，ψ(λ) = β(λ+θ)² − βθ²

    Raises:
        DomainError: 机制带 Lévy 部分或 β = 0
    """
    if not m.levy.has_capability(Capability.SAMPLER_EXACT) or not m.beta > 0.0:
        raise DomainError("a quadratic mechanism with beta > 0 is required")
    return m.beta, m.alpha / (2.0 * m.beta)


def _require_subcritical(m: BranchingMechanism) -> tuple[float, float]:
    beta, theta = quadratic_parameters(m)
    if theta < 0.0:
        raise DomainError(f"a (sub)critical quadratic mechanism is required, got theta={theta}")
    return beta, theta


def _require_critical(m: BranchingMechanism) -> float:
    beta, _ = quadratic_parameters(m)
    if not m.critical:
        raise DomainError(f"a critical quadratic mechanism is required, got alpha={m.alpha}")
    return beta


# ==================== N^ψ 下的质量律 ====================
# 二次 (次)临界机制下 σ 的 Lévy 测度密度为 s^{-3/2} e^{-κs} / (2√(πβ))，κ = βθ²


def _mass_constant(beta: float) -> float:
    return 0.5 / math.sqrt(math.pi * beta)


def _tail(beta: float, theta: float, s: float) -> float:
    if s <= 0.0:
        return math.inf
    kappa = beta * theta * theta
    c = _mass_constant(beta)
    if kappa == 0.0:
        return 2.0 * c / math.sqrt(s)
    return c * (2.0 * math.exp(-kappa * s) / math.sqrt(s) - 2.0 * math.sqrt(math.pi * kappa) * special.erfc(math.sqrt(kappa * s)))


def _small_mean(beta: float, theta: float, eps: float) -> float:
    kappa = beta * theta * theta
    c = _mass_constant(beta)
    if kappa == 0.0:
        return 2.0 * c * math.sqrt(eps)
    return c * math.sqrt(math.pi / kappa) * special.erf(math.sqrt(kappa * eps))


def _large_mean(beta: float, theta: float, eps: float) -> float:
    kappa = beta * theta * theta
    if kappa == 0.0:
        return math.inf
    return _mass_constant(beta) * math.sqrt(math.pi / kappa) * special.erfc(math.sqrt(kappa * eps))


def sigma_density(m: BranchingMechanism, s: float) -> float:
    """N^ψ[σ ∈ ds]/ds"""
    beta, theta = _require_subcritical(m)
    if s <= 0.0:
        return 0.0
    return _mass_constant(beta) * s**-1.5 * math.exp(-beta * theta * theta * s)


def sigma_tail(m: BranchingMechanism, s: float) -> float:
    """N^ψ[σ > s]"""
    beta, theta = _require_subcritical(m)
    return _tail(beta, theta, s)


def sigma_window_mass(m: BranchingMechanism, lo: float, hi: float = math.inf) -> float:
    """N^ψ[lo ≤ σ < hi]"""
    if not 0.0 < lo <= hi:
        raise DomainError(f"need 0 < lo <= hi, got [{lo}, {hi})")
    upper = 0.0 if math.isinf(hi) else sigma_tail(m, hi)
    return sigma_tail(m, lo) - upper


def small_sigma_mean(m: BranchingMechanism, eps: float) -> float:
    """N^ψ[σ 1{σ<ε}]：截断掉的小质量的一阶矩"""
    beta, theta = _require_subcritical(m)
    return _small_mean(beta, theta, eps)


def large_sigma_mean(m: BranchingMechanism, eps: float) -> float:
    """N^ψ[σ 1{ε≤σ<∞}]（临界时为 inf）"""
    beta, theta = _require_subcritical(m)
    return _large_mean(beta, theta, eps)


def _draw_sigma(beta: float, theta: float, eps: float, rng: RngStream, budget: int) -> float:
    """[ε,∞) 上密度 ∝ s^{-3/2}e^{-κs} 的拒绝抽样

    κε < 1 时以 ε/Z²（|Z| ≤ 1）为提议，否则以 ε + Exp(κ) 为提议。
    """
    kappa = beta * theta * theta
    gen = rng.gen
    attempts = 0
    while attempts < budget:
        attempts += 1
        if kappa * eps < 1.0:
            z = gen.standard_normal()
            if abs(z) > 1.0 or z == 0.0:
                continue
            s = eps / (z * z)
            accept = math.exp(-kappa * (s - eps) + eps / (2.0 * s) - 0.5)
        else:
            s = eps + gen.exponential(1.0 / kappa)
            accept = (s / eps) ** -1.5
        if gen.random() < accept:
            return s
    raise RejectionBudgetExceeded("sigma sampler", attempts, 0)


def sample_sigma(m: BranchingMechanism, eps: float, rng: RngStream, budget: int = REJECTION_BUDGET) -> float:
    """按 N^ψ[σ ∈ · | σ ≥ ε] 抽取总质量"""
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    beta, theta = _require_subcritical(m)
    return _draw_sigma(beta, theta, eps, rng, budget)


def sample_forest_mass(m: BranchingMechanism, x: float, rng: RngStream) -> float:
    """P_x^ψ 下森林的总质量 σ = τ_x（逆高斯；临界时为 Lévy 分布）"""
    beta, theta = _require_subcritical(m)
    if not x > 0.0:
        raise DomainError(f"x must be positive, got {x}")
    if theta == 0.0:
        z = rng.gen.standard_normal()
        return x * x / (2.0 * beta * z * z)
    return float(rng.gen.wald(x / m.alpha, x * x / (2.0 * beta)))


# ==================== 高度过程 ====================


def _height_chunks(
    m: BranchingMechanism, x: float, step: float, rng: RngStream, max_steps: int
) -> Iterator[np.ndarray]:
    """H = (X − I)/β 的离散路径，X 为带漂移的 Brownian 运动，I 到达 −x 时停止"""
    beta = m.beta
    scale = math.sqrt(2.0 * beta * step)
    level = 0.0
    low = 0.0
    done = 0
    while True:
        path = level + np.cumsum(rng.gen.normal(-m.alpha * step, scale, CHUNK))
        running = np.minimum(low, np.minimum.accumulate(path))
        hit = np.flatnonzero(running <= -x)
        if hit.size:
            k = int(hit[0]) + 1
            heights = (path[:k] - running[:k]) / beta
            heights[-1] = 0.0
            yield heights
            return
        yield (path - running) / beta
        level = float(path[-1])
        low = float(running[-1])
        done += CHUNK
        if done >= max_steps:
            raise BudgetExceededError(f"height path exceeded {max_steps} steps")


def _check_step(step: float, max_step: float) -> None:
    if not step > 0.0:
        raise DomainError(f"step must be positive, got {step}")
    if step > max_step:
        raise StepTooCoarseError(f"step {step} exceeds the configured maximum {max_step}")


def sample_forest(
    m: BranchingMechanism,
    x: float,
    step: float,
    rng: RngStream,
    max_step: float = MAX_STEP,
    max_steps: int = MAX_STEPS,
) -> TreeSample:
    """P_x^ψ 下的森林：整条高度路径编码成一棵树，所有游程的根粘在一起"""
    _require_subcritical(m)
    _check_step(step, max_step)
    if not x > 0.0:
        raise DomainError(f"x must be positive, got {x}")
    values = np.concatenate([np.zeros(1), *_height_chunks(m, x, step, rng, max_steps)])
    tree = from_excursion(Excursion(step, values))
    logger.debug(f"森林抽样: {values.size - 1} 步, σ={tree.sigma:.6g}, H_max={tree.h_max:.6g}")
    return TreeSample(tree, {"mechanism": repr(m), "conditioning": f"P_x x={x}", "step": step})


def forest_height(
    m: BranchingMechanism,
    x: float,
    step: float,
    rng: RngStream,
    cap: float = math.inf,
    max_step: float = MAX_STEP,
    max_steps: int = MAX_STEPS,
) -> float:
    """与 sample_forest 同一路径的 H_max，超过 cap 时提前停止（返回值 > cap）"""
    _require_subcritical(m)
    _check_step(step, max_step)
    top = 0.0
    for chunk in _height_chunks(m, x, step, rng, max_steps):
        top = max(top, float(chunk.max()))
        if top > cap:
            break
    return top


def sample_excursion(sigma: float, beta: float, step: float, rng: RngStream) -> Excursion:
    """长度 σ 的二次机制游程：√(2/β) 乘 Brownian 游程（三维 Bessel 桥）

    网格步长取 σ/⌈σ/step⌉，至少两个区间，因此 σ^f = σ。
    """
    if not sigma > 0.0 or not math.isfinite(sigma):
        raise DomainError(f"sigma must be positive and finite, got {sigma}")
    n = max(2, math.ceil(sigma / step))
    dt = sigma / n
    walk = np.cumsum(rng.gen.normal(0.0, math.sqrt(dt), (3, n)), axis=1)
    frac = np.arange(1, n + 1) / n
    bridge = walk - frac[None, :] * walk[:, -1:]
    values = math.sqrt(2.0 / beta) * np.sqrt((bridge * bridge).sum(axis=0))
    values[-1] = 0.0
    return Excursion(dt, np.concatenate(([0.0], values)))


def sample_tree(m: BranchingMechanism, eps: float, step: float, rng: RngStream) -> TreeSample:
    """N^ψ[· | σ ≥ ε] 下的一棵树：先抽 σ，再抽该长度的游程"""
    beta, _ = _require_subcritical(m)
    sigma = sample_sigma(m, eps, rng)
    tree = from_excursion(sample_excursion(sigma, beta, step, rng))
    return TreeSample(tree, {"mechanism": repr(m), "conditioning": f"sigma>={eps}", "step": step})


# ==================== 嫁接测度 ====================


def graft_weights(m: BranchingMechanism, q: float, eps: float) -> tuple[float, float]:
    """bold-N^{ψq} = 2β N^{ψq} 在 {σ = ∞} 与 {ε ≤ σ < ∞} 上的质量

    有限部分由共轭机制 ψ_q̄ 给出：N^{ψq}[F 1{σ<∞}] = N^{ψq̄}[F]。
    """
    beta = _require_critical(m)
    if not m.window.member(q):
        raise DomainError(f"q={q} is not in Θ^ψ")
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    conjugate = theta_bar(m, q)
    return 2.0 * beta * (conjugate - q), 2.0 * beta * _tail(beta, conjugate, eps)


def graft_drift(m: BranchingMechanism, q: float, eps: float) -> float:
    """bold-N^{ψq}[σ 1{σ<ε}]：被截断的小嫁接贡献的质量增长率（每单位 σ）"""
    beta = _require_critical(m)
    return 2.0 * beta * _small_mean(beta, theta_bar(m, q), eps)


def graft_moment(m: BranchingMechanism, q: float, eps: float) -> float:
    """bold-N^{ψq}[σ 1{ε≤σ<∞}]"""
    beta = _require_critical(m)
    return 2.0 * beta * _large_mean(beta, theta_bar(m, q), eps)


def sample_graft_mass(m: BranchingMechanism, q: float, eps: float, rng: RngStream) -> float:
    """bold-N^{ψq}[· | σ ≥ ε 或 σ = ∞] 下的质量（无限时为 inf）"""
    infinite, finite = graft_weights(m, q, eps)
    if rng.uniform() * (infinite + finite) < infinite:
        return math.inf
    return _draw_sigma(m.beta, theta_bar(m, q), eps, rng, REJECTION_BUDGET)


def sample_graft(m: BranchingMechanism, q: float, eps: float, step: float, rng: RngStream) -> TreeSample:
    """bold-N^{ψq} 在 {σ ≥ ε} ∪ {σ = ∞} 上的一个原子，无限时返回哨兵"""
    sigma = sample_graft_mass(m, q, eps, rng)
    meta: TreeSampleMeta = {"mechanism": f"{m!r} shifted by {q}", "conditioning": f"sigma>={eps}", "step": step}
    if math.isinf(sigma):
        return TreeSample(INFINITE_TREE, meta)
    tree = from_excursion(sample_excursion(sigma, m.beta, step, rng))
    return TreeSample(tree, meta)


# ==================== CSBP ====================


def _compound_step(beta: float, theta: float, z: float, delta: float, rng: RngStream) -> float:
    """Z_{a+δ} | Z_a = z：Poisson(z/(c e^{2βθδ})) 个均值 c 的指数变量之和"""
    if z <= 0.0:
        return 0.0
    if theta == 0.0:
        c = beta * delta
        rate = z / c
    else:
        c = -math.expm1(-2.0 * beta * theta * delta) / (2.0 * theta)
        rate = z * math.exp(-2.0 * beta * theta * delta) / c
    k = rng.poisson(rate)
    return float(rng.gen.gamma(k, c)) if k else 0.0


@cache
def stehfest_weights(terms: int = STEHFEST_TERMS) -> np.ndarray:
    """Gaver–Stehfest 权重 V_1..V_N（N 为偶数）"""
    if terms % 2:
        raise ValueError(f"the number of Stehfest terms must be even, got {terms}")
    half = terms // 2
    weights = np.zeros(terms)
    for k in range(1, terms + 1):
        total = 0.0
        for j in range((k + 1) // 2, min(k, half) + 1):
            total += (
                j**half
                * special.factorial(2 * j)
                / (
                    special.factorial(half - j)
                    * special.factorial(j)
                    * special.factorial(j - 1)
                    * special.factorial(k - j)
                    * special.factorial(2 * j - k)
                )
            )
        weights[k - 1] = (-1) ** (k + half) * total
    weights.flags.writeable = False
    return weights


def transition_cdf(m: BranchingMechanism, z: float, delta: float, y: float, terms: int = STEHFEST_TERMS) -> float:
    """P(Z_δ ≤ y | Z_0 = z) 的 Gaver–Stehfest 近似，拉普拉斯变换为 e^{−z u(δ,λ)}/λ"""
    if y <= 0.0:
        return math.exp(-z * extinction(m, delta))
    ln2 = math.log(2.0)
    total = 0.0
    for k, v in enumerate(stehfest_weights(terms), start=1):
        lam = k * ln2 / y
        total += v * math.exp(-z * cumulant(m, delta, lam)) / lam
    return min(1.0, max(0.0, ln2 / y * total))


def _stehfest_step(m: BranchingMechanism, z: float, delta: float, rng: RngStream) -> float:
    if z <= 0.0:
        return 0.0
    u = rng.uniform()
    if u <= math.exp(-z * extinction(m, delta)):
        return 0.0
    lo = 1e-12 * max(z, 1.0)
    hi = max(z * math.exp(-m.psi(0.0, 1) * delta), lo) * 2.0
    for _ in range(60):
        if transition_cdf(m, z, delta, hi) >= u:
            break
        hi *= 2.0
    else:
        logger.warning(f"Stehfest 分布函数未达到 u={u:.6g}，截断在 {hi:.6g}")
        return hi
    if transition_cdf(m, z, delta, lo) >= u:
        return lo
    return float(optimize.brentq(lambda y: transition_cdf(m, z, delta, y) - u, lo, hi, xtol=1e-10 * hi))


def sample_csbp(m: BranchingMechanism, z0: float, grid: Sequence[float], rng: RngStream) -> np.ndarray:
    """CSBP 在时间网格上的取值（时间 0 处为 z0）

    二次机制用精确的复合 Poisson–指数转移；其他机制用 Stehfest 反演的近似转移。
    """
    times = np.asarray(grid, dtype=float)
    if times.size and (times[0] < 0.0 or np.any(np.diff(times) < 0.0)):
        raise DomainError("CSBP grid must be non-negative and non-decreasing")
    if z0 < 0.0:
        raise DomainError(f"z0 must be non-negative, got {z0}")
    exact = m.levy.has_capability(Capability.SAMPLER_EXACT) and m.beta > 0.0
    if exact:
        beta, theta = quadratic_parameters(m)
    else:
        logger.info("非二次机制：CSBP 转移使用 Gaver–Stehfest 近似")
    path = np.empty(times.size)
    z = z0
    now = 0.0
    for i, t in enumerate(times):
        delta = float(t) - now
        if delta > 0.0:
            z = _compound_step(beta, theta, z, delta, rng) if exact else _stehfest_step(m, z, delta, rng)
        path[i] = z
        now = float(t)
    return path

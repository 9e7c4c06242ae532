"""生长过程

剪枝过程的时间反转：沿 q 递减方向，在当前树上按质量测度选点，嫁接从 bold-N^{ψq} 抽出的树。
事件强度 σ_q·bold-N^{ψq}[σ ≥ ε 或 σ = ∞] 随 q 连续变化，用分段常数的控制强度做稀疏化抽样。
只实现临界二次机制。
"""

from __future__ import annotations

import math
from collections.abc import Generator, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from levytree.errors import DomainError, EnvelopeError, RejectionBudgetExceeded
from levytree.logger import logger
from levytree.mechanism import BranchingMechanism, exit_tail, shift, spine_quantile, theta_bar
from levytree.rng import RngStream
from levytree.sampler import (
    REJECTION_BUDGET,
    TreeSample,
    graft_drift,
    graft_moment,
    graft_weights,
    sample_forest,
    sample_forest_mass,
    sample_graft,
    sample_graft_mass,
    sample_tree,
)
from levytree.types import CompensatorCheck, EventType, SpineSample, TrajectoryRow
from levytree.util import mean_and_se
from levytree.wtree import INFINITE_TREE, InfiniteTree, Location, WTree, graft, location_height, sample_leaf

WINDOW = 0.25
ENVELOPE_SLACK = 1e-9
OVERSHOOT_MASS_FRACTION = 1.0 / 50.0


@dataclass
class GrowthTrajectory:
    """一条向后（q 递减）的生长轨迹"""

    mechanism: BranchingMechanism
    theta_start: float
    theta_end: float
    sigma_start: float
    eps: float
    drift: bool = False
    events: list[TrajectoryRow] = field(default_factory=list)
    ascension: float | None = None
    ascension_height: float | None = None  # 上升那棵树在 T_A 中的 H_max
    exits: dict[float, float | None] = field(default_factory=dict)
    exit_heights: dict[float, float] = field(default_factory=dict)
    tree: WTree | None = None

    @property
    def jumps(self) -> list[TrajectoryRow]:
        return [e for e in self.events if e["event_type"] != "none"]

    @property
    def sigma_end(self) -> float:
        return self.sigma_at(self.theta_end)

    def sigma_at(self, theta: float) -> float:
        """σ_θ（越过上升时间后为 inf）"""
        if self.ascension is not None and theta <= self.ascension:
            return math.inf
        anchor, sigma = self.theta_start, self.sigma_start
        for event in self.jumps:
            if event["theta"] < theta:
                break
            anchor, sigma = event["theta"], event["sigma_after"]
        if self.drift and sigma > 0.0 and theta < anchor:
            sigma *= drift_factor(self.mechanism, theta, anchor, self.eps)
        return sigma


# ==================== 强度 ====================


def drift_factor(m: BranchingMechanism, lo: float, hi: float, eps: float) -> float:
    """exp(∫_lo^hi bold-N^{ψq}[σ 1{σ<ε}] dq)：小嫁接的确定性质量增长"""
    if hi <= lo:
        return 1.0
    value, _ = integrate.quad(lambda q: graft_drift(m, q, eps), lo, hi, epsabs=1e-13, epsrel=1e-11)
    return math.exp(value)


def _weight_bound(m: BranchingMechanism, lo: float, hi: float, eps: float) -> float:
    """[lo, hi] 上 bold-N^{ψq}[σ ≥ ε 或 σ = ∞] 的上界"""
    infinite, _ = graft_weights(m, min(lo, 0.0), eps)
    closest = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
    _, finite = graft_weights(m, closest, eps)
    return infinite + finite


def _rate(m: BranchingMechanism, q: float, eps: float) -> float:
    return sum(graft_weights(m, q, eps))


def _check_window(theta_start: float, theta_end: float, eps: float) -> None:
    if not theta_end < theta_start:
        raise DomainError(f"theta_end must be below theta_start, got {theta_end} >= {theta_start}")
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps}")


def _proposals(
    m: BranchingMechanism, traj: GrowthTrajectory, rng: RngStream, sigma: float
) -> Generator[tuple[float, float], float, None]:
    """稀疏化抽样：逐个给出被接受的事件时刻及事件前的质量

    生成器接收事件后的新质量（send），质量为 0 时没有事件。
    """
    q = traj.theta_start
    while q > traj.theta_end and sigma > 0.0:
        lo = max(traj.theta_end, q - WINDOW)
        growth = drift_factor(m, lo, q, traj.eps) if traj.drift else 1.0
        bound = sigma * growth * _weight_bound(m, lo, q, traj.eps)
        logger.debug(f"控制强度刷新: q∈[{lo:.6g}, {q:.6g}], 上界 {bound:.6g}")
        candidate = q - rng.exponential(bound)
        if candidate <= lo:
            sigma *= growth
            q = lo
            continue
        if traj.drift:
            sigma *= drift_factor(m, candidate, q, traj.eps)
        q = candidate
        rate = sigma * _rate(m, q, traj.eps)
        if rate > bound * (1.0 + ENVELOPE_SLACK):
            raise EnvelopeError(f"intensity {rate} exceeds envelope {bound} at q={q}")
        if rng.uniform() * bound >= rate:
            continue
        sigma = yield q, sigma


def _close(traj: GrowthTrajectory, hmax: float) -> None:
    """补一行 none 事件记录终点状态"""
    theta = traj.ascension if traj.ascension is not None else traj.theta_end
    traj.events.append(
        {
            "theta": theta,
            "event_type": "none",
            "x_height": math.nan,
            "graft_sigma": 0.0,
            "graft_height": math.nan,
            "sigma_after": traj.sigma_at(traj.theta_end) if traj.ascension is None else math.inf,
            "hmax_after": hmax,
        }
    )


# ==================== 质量生长 ====================


def grow_mass(
    m: BranchingMechanism,
    sigma_start: float,
    theta_start: float,
    theta_end: float,
    eps: float,
    rng: RngStream,
    drift: bool = True,
) -> GrowthTrajectory:
    """只跟踪总质量的生长过程

    遇到无限嫁接时记录上升时间 A 并停止；drift 为真时把 σ < ε 的嫁接作为确定性漂移计入。
    """
    _check_window(theta_start, theta_end, eps)
    if sigma_start < 0.0:
        raise DomainError(f"sigma_start must be non-negative, got {sigma_start}")
    graft_weights(m, theta_end, eps)
    traj = GrowthTrajectory(m, theta_start, theta_end, sigma_start, eps, drift)
    process = _proposals(m, traj, rng, sigma_start)
    try:
        q, sigma = next(process)
        while True:
            mass = sample_graft_mass(m, q, eps, rng)
            if math.isinf(mass):
                traj.ascension = q
                traj.events.append(_row(q, "infinite", math.nan, mass, math.nan, math.inf, math.nan))
                break
            sigma += mass
            traj.events.append(_row(q, "finite", math.nan, mass, math.nan, sigma, math.nan))
            q, sigma = process.send(sigma)
    except StopIteration:
        pass
    _close(traj, math.nan)
    logger.debug(f"质量生长: {len(traj.jumps)} 个事件, A={traj.ascension}")
    return traj


def _row(
    theta: float, kind: EventType, x_height: float, sigma: float, height: float, after: float, hmax: float
) -> TrajectoryRow:
    return {
        "theta": theta,
        "event_type": kind,
        "x_height": x_height,
        "graft_sigma": sigma,
        "graft_height": height,
        "sigma_after": after,
        "hmax_after": hmax,
    }


def forest_mass_start(m: BranchingMechanism, x: float, theta_start: float, rng: RngStream) -> float:
    """θ_start 处森林的初始质量（P_x^{ψθ_start} 下的 σ）"""
    return sample_forest_mass(shift(m, theta_start), x, rng)


# ==================== 几何生长 ====================


def _component_height(t: WTree, edge: int) -> float:
    """含边 edge 的根子树（森林中的一棵树）的最大高度"""
    if edge == 0:
        return 0.0
    while t.parent[edge] != 0:
        edge = int(t.parent[edge])
    return float(t.subtree_height[edge])


def grow_tree(
    m: BranchingMechanism,
    seed_tree: WTree,
    theta_start: float,
    theta_end: float,
    eps: float,
    step: float,
    rng: RngStream,
    hs: Sequence[float] = (1.0,),
) -> GrowthTrajectory:
    """带几何的生长过程，记录 A 以及每个 h 的退出时间 A_h

    嫁接点按质量测度抽取；A_h 为 H_max 首次超过 h 的 q。无限嫁接到来时，
    尚未越过的 h 都取 A_h = A。exit_heights[h] 为 T_{A_h} 中发生越界的那棵树的 H_max。
    """
    _check_window(theta_start, theta_end, eps)
    graft_weights(m, theta_end, eps)
    traj = GrowthTrajectory(m, theta_start, theta_end, seed_tree.sigma, eps, drift=False, tree=seed_tree)
    tree = seed_tree
    for h in hs:
        traj.exits[float(h)] = theta_start if tree.h_max > h else None
    process = _proposals(m, traj, rng, tree.sigma)
    try:
        q, _ = next(process)
        while True:
            x = sample_leaf(tree, rng)
            x_height = location_height(tree, x)
            below = _component_height(tree, x.edge)
            sample = sample_graft(m, q, eps, step, rng)
            if sample.is_infinite:
                traj.ascension = q
                traj.ascension_height = below
                for h, value in traj.exits.items():
                    if value is None:
                        traj.exits[h] = q
                        traj.exit_heights[h] = below
                traj.events.append(_row(q, "infinite", x_height, math.inf, math.inf, math.inf, math.inf))
                break
            assert isinstance(sample.tree, WTree)
            tree = graft(tree, [(sample.tree, x)])
            top = x_height + sample.tree.h_max
            for h, value in traj.exits.items():
                if value is None and top > h:
                    traj.exits[h] = q
                    traj.exit_heights[h] = below
            traj.events.append(_row(q, "finite", x_height, sample.tree.sigma, sample.tree.h_max, tree.sigma, tree.h_max))
            q, _ = process.send(tree.sigma)
    except StopIteration:
        pass
    traj.tree = tree
    _close(traj, math.inf if traj.ascension is not None else tree.h_max)
    logger.debug(f"几何生长: {len(traj.jumps)} 个事件, A={traj.ascension}, A_h={traj.exits}")
    return traj


# ==================== 补偿公式 ====================


def compensator_check(
    trajectories: Sequence[GrowthTrajectory], m: BranchingMechanism, theta_lo: float, theta_hi: float
) -> CompensatorCheck:
    """[θ_lo, θ_hi] 内有限嫁接的质量增量之和与其补偿 ∫ σ_q·bold-N^{ψq}[σ 1{ε≤σ<∞}] dq

    两边都按轨迹平均；θ_lo > 0 时一阶矩有限。
    """
    if not 0.0 < theta_lo < theta_hi:
        raise DomainError(f"need 0 < theta_lo < theta_hi, got [{theta_lo}, {theta_hi}]")
    if not trajectories:
        raise DomainError("no trajectories to check")
    empirical = []
    compensator = []
    for traj in trajectories:
        inside = [e for e in traj.jumps if theta_lo <= e["theta"] <= theta_hi and e["event_type"] == "finite"]
        empirical.append(sum(e["graft_sigma"] for e in inside))
        breaks = [e["theta"] for e in inside if theta_lo < e["theta"] < theta_hi] or None
        value, _ = integrate.quad(
            lambda q, t=traj: t.sigma_at(q) * graft_moment(m, q, t.eps),
            theta_lo,
            theta_hi,
            points=breaks,
            limit=max(50, 4 * len(inside)),
        )
        compensator.append(value)
    emp, emp_se = mean_and_se(empirical)
    comp, comp_se = mean_and_se(compensator)
    return {
        "empirical": emp,
        "empirical_se": emp_se,
        "compensator": comp,
        "compensator_se": comp_se,
        "trajectories": len(trajectories),
    }


# ==================== 退出时刻的脊分解 ====================


def _spine_height(m: BranchingMechanism, theta: float, h: float, rng: RngStream, budget: int) -> float:
    """按 e^{−ψ'(θ)t} f(t) 抽取脊高度：从 f 抽样后拒绝

    ψ'(θ) < 0 时权重在 [0,h) 上以 e^{−ψ'(θ)h} 为界。
    """
    slope = m.psi(theta, 1)
    for _ in range(budget):
        xi = spine_quantile(m, theta, h, rng.uniform())
        log_accept = -slope * xi if slope >= 0.0 else -slope * (xi - h)
        if rng.uniform() < math.exp(log_accept):
            return xi
    raise RejectionBudgetExceeded("spine height", budget, 0)


def _overshoot(
    m: BranchingMechanism, theta: float, room: float, eps: float, step: float, rng: RngStream, budget: int
) -> TreeSample:
    """bold-N^{ψθ}[· | H_max > room]：无限部分权重 θ̄−θ，有限部分 b^{θ̄}(room)"""
    conjugate = theta_bar(m, theta)
    infinite = conjugate - theta
    finite = exit_tail(m, conjugate, room)
    if rng.uniform() * (infinite + finite) < infinite:
        return TreeSample(INFINITE_TREE, {"mechanism": repr(m), "conditioning": f"H_max>{room}"})
    # H_max > room 的树几乎不可能有 σ < β·room²/50，截断不影响分布
    floor = max(eps, m.beta * room * room * OVERSHOOT_MASS_FRACTION)
    target = shift(m, conjugate)
    for _ in range(budget):
        sample = sample_tree(target, floor, step, rng)
        if sample.h_max > room:
            return sample
    raise RejectionBudgetExceeded("overshoot tree", budget, 0)


def sample_exit_spine(
    m: BranchingMechanism,
    theta: float,
    h: float,
    eps: float,
    step: float,
    rng: RngStream,
    budget: int = REJECTION_BUDGET,
) -> SpineSample:
    """N^ψ[(T_{A_h}, T_{A_h−}) | A_h = θ] 的脊分解抽样

    脊 [0,H_x] 上按强度 2β(θ + b^θ(h−a))·N^{ψθ}[dT, σ ≥ ε, H_max < h−a] da 嫁接子树，
    再在脊端嫁接越界树。
    """
    if not m.critical or not m.is_quadratic:
        raise DomainError("sample_exit_spine needs a critical quadratic mechanism")
    if not h > 0.0:
        raise DomainError(f"h must be positive, got {h}")
    beta = m.beta
    spine_height = _spine_height(m, theta, h, rng, budget)
    conjugate = theta_bar(m, theta)
    target = shift(m, conjugate)
    _, finite = graft_weights(m, conjugate, eps)
    per_tree = finite / (2.0 * beta)

    def weight(a: float) -> float:
        return 2.0 * beta * (theta + exit_tail(m, theta, h - a)) * per_tree

    grafts: list[tuple[WTree, Location]] = []
    if spine_height > 0.0:
        top = weight(spine_height)
        count = rng.poisson(top * spine_height)
        for a in np.sort(rng.gen.random(count) * spine_height):
            if rng.uniform() * top >= weight(float(a)):
                continue
            sample = sample_tree(target, eps, step, rng)
            if sample.h_max < h - a:
                assert isinstance(sample.tree, WTree)
                grafts.append((sample.tree, Location(1, float(a))))
    spine = WTree.segment(spine_height) if spine_height > 0.0 else WTree.point()
    anchor = Location(1, spine_height) if spine_height > 0.0 else Location(0, 0.0)
    tree_before = graft(spine, grafts)
    overshoot = _overshoot(m, theta, h - spine_height, eps, step, rng, budget)
    tree_after: WTree | InfiniteTree = INFINITE_TREE
    if not overshoot.is_infinite:
        assert isinstance(overshoot.tree, WTree)
        tree_after = graft(spine, [*grafts, (overshoot.tree, anchor)])
    logger.debug(f"脊分解: H_x={spine_height:.6g}, {len(grafts)} 棵子树")
    return {
        "spine_height": spine_height,
        "tree_before": tree_before,
        "tree_after": tree_after,
        "overshoot_tree": overshoot,
    }


def exit_spine_cross_check(
    m: BranchingMechanism,
    theta: float,
    h: float,
    delta: float,
    x: float,
    theta_start: float,
    eps: float,
    step: float,
    rng: RngStream,
    count: int,
    max_trajectories: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """H_max(T_{A_h}) 的两组样本：脊分解抽样与 A_h ∈ [θ−δ, θ+δ] 的生长轨迹

    生长从 P_x^{ψθ_start} 森林出发，只取发生越界的那棵树，它的条件律与 N^ψ 下相同。
    """
    if not theta + delta < theta_start:
        raise DomainError("theta_start must lie above the conditioning window")
    spine = np.array(
        [sample_exit_spine(m, theta, h, eps, step, rng.child(i))["tree_before"].h_max for i in range(count)]
    )
    grown: list[float] = []
    start = shift(m, theta_start)
    for i in range(max_trajectories):
        if len(grown) >= count:
            break
        stream = rng.child(count + i)
        seed = sample_forest(start, x, step, stream).tree
        assert isinstance(seed, WTree)
        if seed.h_max > h:
            continue
        traj = grow_tree(m, seed, theta_start, theta - delta, eps, step, stream, hs=(h,))
        exit_time = traj.exits[float(h)]
        if exit_time is not None and abs(exit_time - theta) <= delta:
            grown.append(traj.exit_heights[float(h)])
    else:
        logger.warning(f"交叉检验只收集到 {len(grown)}/{count} 条生长样本")
    logger.info(f"交叉检验: 脊分解 {spine.size} 个样本, 生长 {len(grown)} 个样本")
    return spine, np.array(grown)

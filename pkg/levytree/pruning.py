"""剪枝

在树上放两类 Poisson 标记：骨架标记（强度 2β·长度测度·dθ）和节点标记
（强度 Δ·dθ），Λ_θ 为从根出发、路径上没有 θ 分量 ≤ θ 的标记的点构成的连通部分。
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from levytree.errors import DomainError, InvalidLocationError, MarkRangeError
from levytree.logger import logger
from levytree.rng import RngStream
from levytree.types import Decomposition, PrunedGraft
from levytree.util import require_finite_tree
from levytree.wtree import Location, WTree, descendants, node_location, restrict, subtree


@dataclass(frozen=True, eq=False)
class MarkMeasure:
    """[0, theta_max] 内的剪枝标记"""

    theta_max: float
    ske_edge: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    ske_offset: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ske_theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    node_marks: Mapping[int, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.theta_max > 0.0 or not np.isfinite(self.theta_max):
            raise DomainError(f"theta_max must be positive and finite, got {self.theta_max}")
        edge = np.asarray(self.ske_edge, dtype=np.int64)
        offset = np.asarray(self.ske_offset, dtype=float)
        theta = np.asarray(self.ske_theta, dtype=float)
        if not edge.size == offset.size == theta.size:
            raise DomainError("skeleton mark arrays must have equal sizes")
        if np.any(theta < 0.0) or np.any(theta > self.theta_max):
            raise MarkRangeError("skeleton mark outside [0, theta_max]")
        nodes = {int(k): tuple(sorted(float(v) for v in vs)) for k, vs in self.node_marks.items() if vs}
        if any(v < 0.0 or v > self.theta_max for vs in nodes.values() for v in vs):
            raise MarkRangeError("node mark outside [0, theta_max]")
        for name, arr in (("ske_edge", edge), ("ske_offset", offset), ("ske_theta", theta)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "node_marks", nodes)

    @property
    def n_skeleton(self) -> int:
        return int(self.ske_theta.size)

    @property
    def n_node(self) -> int:
        return sum(len(vs) for vs in self.node_marks.values())

    def check(self, t: WTree) -> None:
        """标记位置在树 t 上是否合法"""
        if self.ske_edge.size:
            if np.any(self.ske_edge <= 0) or np.any(self.ske_edge >= t.n_nodes):
                raise InvalidLocationError("skeleton mark on a missing edge")
            if np.any(self.ske_offset <= 0.0) or np.any(self.ske_offset >= t.length[self.ske_edge]):
                raise InvalidLocationError("skeleton mark must lie strictly inside its edge")
        if any(not 0 <= k < t.n_nodes for k in self.node_marks):
            raise InvalidLocationError("node mark on a missing node")


@require_finite_tree
def sample_marks(t: WTree, beta: float, theta_max: float, rng: RngStream) -> MarkMeasure:
    """抽取 [0, theta_max] 内的骨架标记与节点标记"""
    if not beta >= 0.0:
        raise DomainError(f"beta must be non-negative, got {beta}")
    gen = rng.gen
    total = t.total_length
    count = rng.poisson(2.0 * beta * total * theta_max)
    if count:
        cumulative = np.cumsum(t.length)
        position = gen.random(count) * total
        edge = np.searchsorted(cumulative, position, side="right")
        edge = np.clip(edge, 1, t.n_nodes - 1)
        start = cumulative[edge] - t.length[edge]
        offset = position - start
        # 开区间内抽样，避开分支点和叶子
        bad = (offset <= 0.0) | (offset >= t.length[edge])
        offset[bad] = 0.5 * t.length[edge[bad]]
        theta = gen.random(count) * theta_max
    else:
        edge = np.zeros(0, dtype=np.int64)
        offset = np.zeros(0)
        theta = np.zeros(0)
    node_marks: dict[int, tuple[float, ...]] = {}
    for node, mass in sorted(t.node_masses.items()):
        k = rng.poisson(mass * theta_max)
        if k:
            node_marks[node] = tuple(np.sort(gen.random(k) * theta_max).tolist())
    marks = MarkMeasure(theta_max, edge, offset, theta, node_marks)
    logger.debug(f"剪枝标记: {marks.n_skeleton} 个骨架标记, {marks.n_node} 个节点标记")
    return marks


def _check_theta(marks: MarkMeasure, theta: float) -> None:
    if not 0.0 <= theta <= marks.theta_max:
        raise MarkRangeError(f"theta={theta} outside the sampled range [0, {marks.theta_max}]")


def _cuts(t: WTree, marks: MarkMeasure, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """每条边上最靠上的有效骨架标记偏移（无则为 inf）及有效节点标记"""
    active = marks.ske_theta <= theta
    first = np.full(t.n_nodes, np.inf)
    np.minimum.at(first, marks.ske_edge[active], marks.ske_offset[active])
    node_cut = np.zeros(t.n_nodes, dtype=bool)
    for node, values in marks.node_marks.items():
        if values[0] <= theta:
            node_cut[node] = True
    return first, node_cut


def _survivors(t: WTree, first: np.ndarray, node_cut: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """保留的节点与截短后的边长"""
    clipped = np.isfinite(first)
    blocked = node_cut | clipped
    removed = np.zeros(t.n_nodes, dtype=bool)
    depth = t.depth
    for d in range(1, int(depth.max()) + 1):
        idx = np.flatnonzero(depth == d)
        removed[idx] = blocked[t.parent[idx]]
        blocked[idx] |= removed[idx]
    keep = ~removed
    length = np.where(clipped, np.minimum(first, t.length), t.length)
    return keep, length


def _prune(t: WTree, marks: MarkMeasure, theta: float) -> tuple[WTree, np.ndarray, np.ndarray, np.ndarray]:
    marks.check(t)
    first, node_cut = _cuts(t, marks, theta)
    keep, length = _survivors(t, first, node_cut)
    pruned, new_id = restrict(t, keep, length)
    return pruned, new_id, first, node_cut


@require_finite_tree
def prune_at(t: WTree, marks: MarkMeasure, theta: float) -> WTree:
    """Λ_θ(t, M)"""
    _check_theta(marks, theta)
    if theta == 0.0:
        return t
    return _prune(t, marks, theta)[0]


@require_finite_tree
def prune_with_marks(t: WTree, marks: MarkMeasure, theta: float) -> tuple[WTree, MarkMeasure]:
    """Λ_θ(t, M) 及其上剩余的标记（θ 分量减去 θ），用于验证余循环性质"""
    _check_theta(marks, theta)
    if theta >= marks.theta_max:
        raise MarkRangeError("no marks remain above theta_max")
    pruned, new_id, first, node_cut = _prune(t, marks, theta)
    edge = marks.ske_edge
    survive = (marks.ske_theta > theta) & (new_id[edge] >= 0) & (marks.ske_offset < first[edge])
    intact = (new_id >= 0) & ~np.isfinite(first)
    node_marks = {
        int(new_id[k]): tuple(v - theta for v in vs if v > theta)
        for k, vs in marks.node_marks.items()
        if intact[k] and not node_cut[k]
    }
    rest = MarkMeasure(
        marks.theta_max - theta,
        new_id[edge[survive]],
        marks.ske_offset[survive],
        marks.ske_theta[survive] - theta,
        node_marks,
    )
    return pruned, rest


@require_finite_tree
def increasing_marks(t: WTree, marks: MarkMeasure) -> MarkMeasure:
    """M↑：只保留根到自身的路径上没有更小 θ 标记的标记，多重节点标记只留最小的一个"""
    marks.check(t)
    n = t.n_nodes
    edge_min = np.full(n, np.inf)
    np.minimum.at(edge_min, marks.ske_edge, marks.ske_theta)
    node_min = np.full(n, np.inf)
    for node, values in marks.node_marks.items():
        node_min[node] = values[0]
    # path_min[v]：根到 v（含 v 处节点标记）路径上的最小标记
    path_min = np.minimum(edge_min, node_min)
    path_min[0] = node_min[0]
    depth = t.depth
    for d in range(1, int(depth.max()) + 1):
        idx = np.flatnonzero(depth == d)
        path_min[idx] = np.minimum(path_min[idx], path_min[t.parent[idx]])

    keep = np.zeros(marks.n_skeleton, dtype=bool)
    above = np.where(marks.ske_edge > 0, path_min[t._up0[marks.ske_edge]], np.inf)
    order = np.lexsort((marks.ske_offset, marks.ske_edge))
    running: dict[int, float] = {}
    for i in order:
        e = int(marks.ske_edge[i])
        best = min(running.get(e, np.inf), float(above[i]))
        value = float(marks.ske_theta[i])
        if value < best:
            keep[i] = True
        running[e] = min(running.get(e, np.inf), value)
    node_marks: dict[int, tuple[float, ...]] = {}
    for node, values in marks.node_marks.items():
        above_node = min(edge_min[node], path_min[t.parent[node]] if node else np.inf)
        if values[0] < above_node:
            node_marks[node] = (values[0],)
    return MarkMeasure(
        marks.theta_max,
        marks.ske_edge[keep],
        marks.ske_offset[keep],
        marks.ske_theta[keep],
        node_marks,
    )


@require_finite_tree
def decompose(t: WTree, marks: MarkMeasure, theta: float) -> Decomposition:
    """t = Λ_θ(t) ⊛ (T^i, x_i)

    每个切点（其上方路径没有有效标记的有效标记）处切下的整棵子树为 T^i，
    x_i 为切点在剪枝树上的位置，θ_i 为切点处的标记值。
    """
    _check_theta(marks, theta)
    pruned, new_id, first, node_cut = _prune(t, marks, theta)
    grafts: list[PrunedGraft] = []
    kept_edge = new_id[1:] >= 0
    for e in np.flatnonzero(kept_edge) + 1:
        if not np.isfinite(first[e]):
            continue
        on_edge = (marks.ske_edge == e) & (marks.ske_offset == first[e]) & (marks.ske_theta <= theta)
        grafts.append(
            {
                "location": Location(int(new_id[e]), float(first[e])),
                "tree": subtree(t, Location(int(e), float(first[e]))),
                "theta": float(marks.ske_theta[on_edge].min()),
            }
        )
    intact = (new_id >= 0) & ~np.isfinite(first)
    for node in np.flatnonzero(node_cut & intact):
        below = descendants(t, int(node))
        below[node] = False
        if not below.any():
            continue
        grafts.append(
            {
                "location": node_location(pruned, int(new_id[node])),
                "tree": subtree(t, node_location(t, int(node))),
                "theta": marks.node_marks[int(node)][0],
            }
        )
    return {"pruned": pruned, "grafts": grafts}

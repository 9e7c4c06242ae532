"""有限加权实树（w-tree）

树用数组表示：节点 0 为根，其余节点的父节点编号总是小于自身编号，
parent[i] 与 length[i] 给出连到父节点的边。质量测度完全原子化，
每个原子挂在某条边的某个偏移处。无限树不实体化，用 INFINITE_TREE 哨兵代替。
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from levytree.errors import DomainError, EmptyExcursionError, InvalidLocationError, ZeroMassError
from levytree.logger import logger
from levytree.mechanism import BranchingMechanism, extinction
from levytree.types import LevelCounts, TreeSummary
from levytree.util import require_finite_tree

if TYPE_CHECKING:
    from levytree.rng import RngStream

TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Location:
    """树上的点：边（以子节点编号表示）及从父端量起的偏移"""

    edge: int
    offset: float = 0.0


ROOT = Location(0, 0.0)


class InfiniteTree:
    """无限质量树的哨兵，所有树操作都会抛出 InfiniteTreeError"""

    is_infinite = True
    sigma = math.inf
    h_max = math.inf

    def __repr__(self) -> str:
        return "INFINITE_TREE"


INFINITE_TREE = InfiniteTree()


@dataclass(frozen=True, eq=False)
class Excursion:
    """等距网格上的非负分段线性函数，f_0 = f_n = 0"""

    step: float
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if not self.step > 0.0 or not math.isfinite(self.step):
            raise DomainError(f"excursion step must be positive, got {self.step}")
        if values.ndim != 1 or values.size < 2:
            raise EmptyExcursionError("excursion needs at least one sample interval")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise DomainError("excursion values must be finite and non-negative")
        if values[0] != 0.0 or values[-1] != 0.0:
            raise DomainError("excursion must start and end at 0")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size - 1

    @cached_property
    def charged(self) -> np.ndarray:
        """带质量的采样区间（两端都为 0 的区间不带质量）"""
        v = self.values
        return (v[:-1] > 0.0) | (v[1:] > 0.0)

    @property
    def sigma(self) -> float:
        return self.step * int(np.count_nonzero(self.charged))

    @property
    def sup(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True, eq=False)
class WTree:
    """有根加权实树

    Attributes:
        parent: 父节点编号，parent[0] = -1
        length: 连到父节点的边长，length[0] = 0
        atom_edge, atom_offset, atom_weight: 质量原子的位置与权重
        node_masses: 无限分支点的质量 Δ
    """

    parent: np.ndarray
    length: np.ndarray
    atom_edge: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    atom_offset: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atom_weight: np.ndarray = field(default_factory=lambda: np.zeros(0))
    node_masses: Mapping[int, float] = field(default_factory=dict)

    is_infinite = False

    def __post_init__(self) -> None:
        parent = np.asarray(self.parent, dtype=np.int64)
        length = np.asarray(self.length, dtype=float)
        atom_edge = np.asarray(self.atom_edge, dtype=np.int64)
        atom_offset = np.asarray(self.atom_offset, dtype=float)
        atom_weight = np.asarray(self.atom_weight, dtype=float)
        n = parent.size
        if n == 0 or length.size != n or parent[0] != -1 or length[0] != 0.0:
            raise DomainError("tree needs a root with parent -1 and edge length 0")
        ids = np.arange(n)
        if np.any(parent[1:] < 0) or np.any(parent[1:] >= ids[1:]):
            raise DomainError("every parent id must be smaller than its child id")
        if not np.all(np.isfinite(length)) or np.any(length[1:] <= 0.0):
            raise DomainError("edge lengths must be finite and positive")
        if not atom_edge.size == atom_offset.size == atom_weight.size:
            raise DomainError("atom arrays must have equal sizes")
        if not np.all(np.isfinite(atom_weight)) or np.any(atom_weight < 0.0):
            raise DomainError("atom weights must be finite and non-negative")
        if atom_edge.size:
            if np.any(atom_edge < 0) or np.any(atom_edge >= n):
                raise InvalidLocationError("atom on a missing edge")
            if np.any(atom_offset < 0.0) or np.any(atom_offset > length[atom_edge]):
                raise InvalidLocationError("atom offset outside its edge")
        masses = {int(k): float(v) for k, v in self.node_masses.items() if v != 0.0}
        if any(not 0 <= k < n or not v > 0.0 or not math.isfinite(v) for k, v in masses.items()):
            raise DomainError("node masses must sit on existing nodes and be positive")
        for name, arr in (
            ("parent", parent),
            ("length", length),
            ("atom_edge", atom_edge),
            ("atom_offset", atom_offset),
            ("atom_weight", atom_weight),
        ):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "node_masses", masses)

    # ==================== 构造 ====================

    @classmethod
    def point(cls, weight: float = 0.0) -> WTree:
        """单点树（可带根原子）"""
        if weight > 0.0:
            return cls([-1], [0.0], [0], [0.0], [weight])
        return cls([-1], [0.0])

    @classmethod
    def segment(cls, length: float, weight: float = 0.0, offset: float | None = None) -> WTree:
        """长度为 length 的线段，可选在 offset（默认端点）处放一个原子"""
        if weight > 0.0:
            where = length if offset is None else offset
            return cls([-1, 0], [0.0, length], [1], [where], [weight])
        return cls([-1, 0], [0.0, length])

    # ==================== 导出量 ====================

    @property
    def n_nodes(self) -> int:
        return int(self.parent.size)

    @property
    def n_atoms(self) -> int:
        return int(self.atom_weight.size)

    @cached_property
    def _up0(self) -> np.ndarray:
        """根指向自身的父节点数组"""
        up = self.parent.copy()
        up[0] = 0
        return up

    @cached_property
    def height(self) -> np.ndarray:
        return _accumulate(self.length, self._up0)

    @cached_property
    def depth(self) -> np.ndarray:
        ones = np.ones(self.n_nodes, dtype=np.int64)
        ones[0] = 0
        return _accumulate(ones, self._up0)

    @cached_property
    def lifting(self) -> list[np.ndarray]:
        """倍增祖先表：lifting[k][i] 为 i 的第 2^k 个祖先（根的祖先为根）"""
        table = [self._up0]
        levels = max(1, int(self.depth.max()).bit_length())
        for _ in range(1, levels):
            prev = table[-1]
            table.append(prev[prev])
        return table

    @cached_property
    def atom_height(self) -> np.ndarray:
        return self.height[self._up0[self.atom_edge]] + self.atom_offset

    @cached_property
    def subtree_height(self) -> np.ndarray:
        """每个节点子树内的最大高度"""
        top = self.height.copy()
        depth = self.depth
        for d in range(int(depth.max()), 0, -1):
            idx = np.flatnonzero(depth == d)
            np.maximum.at(top, self.parent[idx], top[idx])
        return top

    @property
    def sigma(self) -> float:
        return float(self.atom_weight.sum())

    @property
    def h_max(self) -> float:
        return float(self.height.max())

    @property
    def total_length(self) -> float:
        return float(self.length.sum())

    def __repr__(self) -> str:
        return f"WTree(nodes={self.n_nodes}, atoms={self.n_atoms}, sigma={self.sigma:.6g}, h_max={self.h_max:.6g})"


def _accumulate(values: np.ndarray, up: np.ndarray) -> np.ndarray:
    """沿祖先链累加（指针倍增），up 中根指向自身且 values[0] = 0"""
    total = values.copy()
    up = up.copy()
    while np.any(up != 0):
        total = total + np.where(up != 0, total[up], 0)
        up = up[up]
    return total


def _reorder(parent: np.ndarray, height: np.ndarray) -> np.ndarray:
    """按高度稳定排序得到的新编号（根高度为 0 且边长为正，故父节点先于子节点）"""
    order = np.argsort(height, kind="stable")
    new_id = np.empty_like(order)
    new_id[order] = np.arange(order.size)
    return new_id


def _build(
    parent: Sequence[int] | np.ndarray,
    height: Sequence[float] | np.ndarray,
    atom_node: np.ndarray,
    atom_height: np.ndarray,
    atom_weight: np.ndarray,
    node_masses: Mapping[int, float] | None = None,
) -> tuple[WTree, np.ndarray]:
    """由任意编号的父节点数组和节点高度组装 WTree

    原子由 (下方某节点, 高度) 给出，沿祖先链定位到所在的边。
    返回新树及旧编号到新编号的映射。
    """
    parent = np.asarray(parent, dtype=np.int64)
    height = np.asarray(height, dtype=float)
    new_id = _reorder(parent, height)
    n = parent.size
    order = np.empty(n, dtype=np.int64)
    order[new_id] = np.arange(n)
    new_parent = np.full(n, -1, dtype=np.int64)
    new_height = height[order]
    old_parent = parent[order]
    new_parent[1:] = new_id[old_parent[1:]]
    new_length = np.zeros(n)
    new_length[1:] = new_height[1:] - new_height[new_parent[1:]]
    masses = {int(new_id[k]): v for k, v in (node_masses or {}).items()}
    tree = WTree(new_parent, new_length, node_masses=masses)
    edge, offset = _locate(tree, new_id[np.asarray(atom_node, dtype=np.int64)], np.asarray(atom_height, dtype=float))
    return WTree(new_parent, new_length, edge, offset, atom_weight, masses), new_id


def _locate(tree: WTree, below: np.ndarray, heights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """高度为 heights、位于节点 below 祖先链上的点所在的边与偏移"""
    cur = below.copy()
    h = tree.height
    for up in reversed(tree.lifting):
        cand = up[cur]
        move = h[cand] >= heights
        cur = np.where(move, cand, cur)
    at_root = heights <= 0.0
    cur = np.where(at_root, 0, cur)
    offset = np.where(at_root, 0.0, heights - h[tree._up0[cur]])
    offset = np.clip(offset, 0.0, tree.length[cur])
    return cur, offset


# ==================== 位置 ====================


def _check_location(t: WTree, x: Location) -> None:
    if not 0 <= x.edge < t.n_nodes:
        raise InvalidLocationError(f"edge {x.edge} does not exist")
    if x.edge == 0 and x.offset != 0.0:
        raise InvalidLocationError("the root location has offset 0")
    if not 0.0 <= x.offset <= t.length[x.edge]:
        raise InvalidLocationError(f"offset {x.offset} outside edge {x.edge} of length {t.length[x.edge]}")


@require_finite_tree
def root_location(t: WTree) -> Location:
    return ROOT


@require_finite_tree
def node_location(t: WTree, node: int) -> Location:
    """节点所在的点（父边的下端点）"""
    if not 0 <= node < t.n_nodes:
        raise InvalidLocationError(f"node {node} does not exist")
    return ROOT if node == 0 else Location(node, float(t.length[node]))


@require_finite_tree
def location_height(t: WTree, x: Location) -> float:
    """H_x：点到根的距离"""
    _check_location(t, x)
    if x.edge == 0:
        return 0.0
    return float(t.height[t.parent[x.edge]] + x.offset)


@require_finite_tree
def atom_locations(t: WTree) -> list[Location]:
    return [Location(int(e), float(o)) for e, o in zip(t.atom_edge, t.atom_offset)]


def _lca(t: WTree, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """节点对的最近公共祖先（向量化倍增）"""
    a = a.copy()
    b = b.copy()
    depth = t.depth
    swap = depth[a] < depth[b]
    a, b = np.where(swap, b, a), np.where(swap, a, b)
    diff = depth[a] - depth[b]
    for k, up in enumerate(t.lifting):
        jump = ((diff >> k) & 1).astype(bool)
        a = np.where(jump, up[a], a)
    for up in reversed(t.lifting):
        ua = up[a]
        ub = up[b]
        differ = ua != ub
        a = np.where(differ, ua, a)
        b = np.where(differ, ub, b)
    return np.where(a == b, a, t._up0[a])


def _point_arrays(t: WTree, points: Sequence[Location]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    for x in points:
        _check_location(t, x)
    edge = np.array([x.edge for x in points], dtype=np.int64)
    offset = np.array([x.offset for x in points], dtype=float)
    height = np.where(edge == 0, 0.0, t.height[t._up0[edge]] + offset)
    return edge, offset, height


def _mrca_height(t: WTree, ea: np.ndarray, oa: np.ndarray, eb: np.ndarray, ob: np.ndarray) -> np.ndarray:
    """成对位置的最近公共祖先高度"""
    w = _lca(t, ea, eb)
    hw = t.height[w]
    same = ea == eb
    ha = np.where(ea == 0, 0.0, t.height[t._up0[ea]] + oa)
    hb = np.where(eb == 0, 0.0, t.height[t._up0[eb]] + ob)
    # 一条边是另一条边的祖先时，较高处的点位于较低点的祖先链上
    result = np.where(w == ea, ha, np.where(w == eb, hb, hw))
    return np.where(same, np.minimum(ha, hb), result)


@require_finite_tree
def mrca(t: WTree, x: Location, y: Location) -> Location:
    """最近公共祖先"""
    _check_location(t, x)
    _check_location(t, y)
    if x.edge == y.edge:
        return x if x.offset <= y.offset else y
    w = int(_lca(t, np.array([x.edge]), np.array([y.edge]))[0])
    if w == x.edge:
        return x
    if w == y.edge:
        return y
    return node_location(t, w)


@require_finite_tree
def dist(t: WTree, x: Location, y: Location) -> float:
    """树度量 d(x,y) = H_x + H_y − 2H_mrca"""
    ea, oa, ha = _point_arrays(t, [x])
    eb, ob, hb = _point_arrays(t, [y])
    hm = _mrca_height(t, ea, oa, eb, ob)
    return float(max(ha[0] + hb[0] - 2.0 * hm[0], 0.0))


@require_finite_tree
def distance_matrix(t: WTree, points: Sequence[Location], others: Sequence[Location] | None = None) -> np.ndarray:
    """两组位置之间的距离矩阵（others 省略时为 points 自身）"""
    ea, oa, ha = _point_arrays(t, points)
    if others is None:
        eb, ob, hb = ea, oa, ha
    else:
        eb, ob, hb = _point_arrays(t, others)
    n, k = ea.size, eb.size
    if n == 0 or k == 0:
        return np.zeros((n, k))
    ii, jj = np.meshgrid(np.arange(n), np.arange(k), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    hm = _mrca_height(t, ea[ii], oa[ii], eb[jj], ob[jj])
    d = ha[ii] + hb[jj] - 2.0 * hm
    return np.maximum(d, 0.0).reshape(n, k)


# ==================== 游程编码 ====================


def _extrema(values: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """交替的极值序列（0 开头，极大/极小交替）及每个采样区间所属的极大编号"""
    d = np.diff(values)
    sign = np.sign(d)
    sign[np.abs(d) <= tol] = 0
    n = d.size
    rising = np.flatnonzero(sign > 0)
    if rising.size == 0:
        return np.zeros(1), np.zeros(n, dtype=np.int64)
    # 第一段必为上升，之前容差内的下降视为平坦
    sign[: rising[0]] = 0
    moving = np.flatnonzero(sign)
    s = sign[moving]
    new_run = np.concatenate(([True], s[1:] != s[:-1]))
    run_of_moving = np.cumsum(new_run) - 1
    run_ends = np.concatenate((np.flatnonzero(new_run)[1:] - 1, [s.size - 1]))
    extrema = np.concatenate(([0.0], values[moving[run_ends] + 1]))
    if extrema.size % 2 == 0:
        extrema = np.concatenate((extrema, [0.0]))
    # 平坦区间继承前一个非平坦区间的段号
    run = np.full(n, -1, dtype=np.int64)
    run[moving] = run_of_moving
    filled = np.maximum.accumulate(np.where(run >= 0, np.arange(n), -1))
    run = np.where(filled >= 0, run[np.maximum(filled, 0)], 0)
    return extrema, run // 2


def _code(f: Excursion) -> tuple[WTree, np.ndarray, float]:
    """T^f 及每个采样区间所属极大值对应的叶子（新编号）"""
    values = f.values
    sup = f.sup
    if sup == 0.0:
        return WTree.point(f.sigma), np.zeros(f.n, dtype=np.int64), 0.0
    tol = TIE_TOLERANCE * sup
    extrema, peak_of_interval = _extrema(values, tol)

    parent: list[int] = [-1]
    height: list[float] = [0.0]
    leaves: list[int] = []
    stack = [0]
    for j in range(1, extrema.size, 2):
        peak = float(extrema[j])
        low = float(extrema[j + 1]) if j + 1 < extrema.size else 0.0
        leaf = len(parent)
        parent.append(stack[-1])
        height.append(peak)
        leaves.append(leaf)
        stack.append(leaf)
        child = -1
        while height[stack[-1]] > low + tol:
            child = stack.pop()
        top = stack[-1]
        if height[top] < low - tol:
            node = len(parent)
            parent.append(top)
            height.append(low)
            parent[child] = node
            stack.append(node)

    charged = f.charged
    mids = 0.5 * (values[:-1] + values[1:])
    leaf_ids = np.asarray(leaves, dtype=np.int64)
    below = leaf_ids[np.minimum(peak_of_interval, leaf_ids.size - 1)]
    atom_h = np.where(mids[charged] <= tol, 0.0, mids[charged])
    weights = np.full(atom_h.size, f.step)
    tree, new_id = _build(parent, height, below[charged], atom_h, weights)
    logger.debug(f"游程编码: {f.n} 个区间 -> {tree.n_nodes} 个节点")
    return tree, new_id[below], tol


def from_excursion(f: Excursion) -> WTree:
    """游程 f 编码的树 T^f

    内部节点位于严格局部极小，叶子位于严格局部极大，容差 1e-12·‖f‖∞ 内相等的极小合并。
    每个带质量的采样区间在其中点值对应的位置放一个权重为 step 的原子。
    """
    return _code(f)[0]


def excursion_points(f: Excursion) -> tuple[WTree, list[Location], list[Location]]:
    """T^f 以及采样时刻 t_k 与区间中点时刻在树上的像 p^f(t)"""
    tree, below, tol = _code(f)
    if tree.n_nodes == 1:
        return tree, [ROOT] * (f.n + 1), [ROOT] * f.n
    values = f.values
    mids = 0.5 * (values[:-1] + values[1:])
    sample_below = below[np.minimum(np.arange(f.n + 1), f.n - 1)]
    edge, offset = _locate(tree, sample_below, np.where(values <= tol, 0.0, values))
    samples = [Location(int(e), float(o)) for e, o in zip(edge, offset)]
    edge, offset = _locate(tree, below, np.where(mids <= tol, 0.0, mids))
    halves = [Location(int(e), float(o)) for e, o in zip(edge, offset)]
    return tree, samples, halves


# ==================== 截断与嫁接 ====================


def restrict(t: WTree, keep: np.ndarray, length: np.ndarray) -> tuple[WTree, np.ndarray]:
    """保留对父节点封闭的节点集合 keep，并把保留的边缩短到 length

    边长不变的保留节点称为完整节点。原子保留在剩余的骨架上；
    整条被删边上偏移为 0 的原子位于完整父节点处，随之保留。

    Returns:
        (新树, 旧编号到新编号的映射；未保留的节点映射为 -1)
    """
    keep = keep.copy()
    keep[0] = True
    length = np.where(keep, np.minimum(length, t.length), 0.0)
    intact = keep & (length == t.length)
    new_id = np.where(keep, np.cumsum(keep) - 1, -1)
    kept = np.flatnonzero(keep)
    parent = np.full(kept.size, -1, dtype=np.int64)
    parent[1:] = new_id[t.parent[kept[1:]]]

    edge = t.atom_edge.copy()
    offset = t.atom_offset.copy()
    lifted = ~keep[edge] & (offset == 0.0) & intact[t._up0[edge]]
    edge[lifted] = t._up0[edge[lifted]]
    offset[lifted] = t.length[edge[lifted]]
    atoms = keep[edge] & (offset <= length[edge])
    masses = {int(new_id[k]): v for k, v in t.node_masses.items() if intact[k]}
    tree = WTree(parent, length[kept], new_id[edge[atoms]], offset[atoms], t.atom_weight[atoms], masses)
    return tree, new_id


@require_finite_tree
def truncate(t: WTree, a: float) -> WTree:
    """π_a(t)：保留高度不超过 a 的点，越过 a 的边在 a 处截成新叶子"""
    if not a >= 0.0:
        raise DomainError(f"truncation level must be non-negative, got {a}")
    if a >= t.h_max:
        return t
    h = t.height
    base = h[t._up0]
    keep = (h <= a) | (base < a)
    tree, _ = restrict(t, keep, np.where(h <= a, t.length, a - base))
    return tree


@require_finite_tree
def descendants(t: WTree, node: int) -> np.ndarray:
    """node 及其全部后代的指示数组"""
    mark = np.zeros(t.n_nodes, dtype=bool)
    mark[node] = True
    depth = t.depth
    for d in range(int(depth[node]) + 1, int(depth.max()) + 1):
        idx = np.flatnonzero(depth == d)
        mark[idx] = mark[t.parent[idx]]
    return mark


@require_finite_tree
def subtree(t: WTree, x: Location) -> WTree:
    """x 以下部分的闭包，以 x 为根；x 处的原子不计入

    x 在边的内部时只取这条边下方的一支，x 是节点时取该节点的全部子树。
    """
    _check_location(t, x)
    node = x.edge
    below = descendants(t, node)
    if x.offset >= t.length[node] or node == 0:
        below[node] = False
    members = np.flatnonzero(below)
    cut_height = location_height(t, x)
    new_id = np.full(t.n_nodes, -1, dtype=np.int64)
    new_id[members] = np.arange(1, members.size + 1)
    new_id[node] = new_id[node] if below[node] else 0
    parent = np.concatenate(([-1], np.where(members == node, 0, new_id[t._up0[members]])))
    length = np.concatenate(([0.0], t.length[members]))
    if below[node]:
        length[new_id[node]] = t.length[node] - x.offset
    atoms = below[t.atom_edge] & (t.atom_height > cut_height)
    edge = new_id[t.atom_edge[atoms]]
    offset = t.atom_offset[atoms] - np.where(t.atom_edge[atoms] == node, x.offset, 0.0)
    masses = {int(new_id[k]): v for k, v in t.node_masses.items() if below[k]}
    return WTree(parent, length, edge, offset, t.atom_weight[atoms], masses)


@require_finite_tree
def graft(t: WTree, grafts: Iterable[tuple[WTree, Location]]) -> WTree:
    """T ⊛ (T_i, x_i)：把每棵 T_i 的根粘到 x_i 上，质量相加"""
    grafts = list(grafts)
    if not grafts:
        return t
    for g, x in grafts:
        if getattr(g, "is_infinite", False):
            raise DomainError("cannot graft the infinite tree sentinel")
        _check_location(t, x)

    parent = list(t.parent)
    height = list(t.height)
    # 各边内部的嫁接点偏移，按偏移把边切开
    cuts: dict[int, list[float]] = {}
    for _, x in grafts:
        if 0.0 < x.offset < t.length[x.edge]:
            cuts.setdefault(x.edge, []).append(x.offset)
    split_node: dict[tuple[int, float], int] = {}
    for edge, offsets in cuts.items():
        base = float(t.height[t.parent[edge]])
        prev = int(t.parent[edge])
        for off in sorted(set(offsets)):
            node = len(parent)
            parent.append(prev)
            height.append(base + off)
            split_node[(edge, off)] = node
            prev = node
        parent[edge] = prev

    def attach(x: Location) -> int:
        if x.edge == 0:
            return 0
        if x.offset == 0.0:
            return int(t.parent[x.edge])
        if x.offset == t.length[x.edge]:
            return x.edge
        return split_node[(x.edge, x.offset)]

    atom_node = [t.atom_edge]
    atom_h = [t.atom_height]
    atom_w = [t.atom_weight]
    masses = dict(t.node_masses)
    for g, x in grafts:
        anchor = attach(x)
        first = len(parent)
        mapping = np.arange(g.n_nodes) + first - 1
        mapping[0] = anchor
        parent.extend(mapping[g.parent[1:]].tolist())
        height.extend((g.height[1:] + height[anchor]).tolist())
        atom_node.append(mapping[g.atom_edge])
        atom_h.append(g.atom_height + height[anchor])
        atom_w.append(g.atom_weight)
        for k, v in g.node_masses.items():
            key = int(mapping[k])
            masses[key] = masses.get(key, 0.0) + v

    tree, _ = _build(
        parent,
        height,
        np.concatenate(atom_node),
        np.concatenate(atom_h),
        np.concatenate(atom_w),
        masses,
    )
    return tree


# ==================== 查询 ====================


@require_finite_tree
def sample_leaf(t: WTree, rng: RngStream) -> Location:
    """按质量测度抽取一个点"""
    total = t.sigma
    if not total > 0.0:
        raise ZeroMassError("cannot sample from a tree with zero mass")
    cumulative = np.cumsum(t.atom_weight)
    index = int(np.searchsorted(cumulative, rng.uniform() * cumulative[-1], side="right"))
    index = min(index, t.n_atoms - 1)
    return Location(int(t.atom_edge[index]), float(t.atom_offset[index]))


def _crossing(t: WTree, a: float) -> np.ndarray:
    """跨过高度 a 的边（父端高度 ≤ a < 子端高度）"""
    h = t.height
    base = h[t._up0]
    mask = (base <= a) & (h > a)
    mask[0] = False
    return np.flatnonzero(mask)


@require_finite_tree
def level_counts(t: WTree, a: float, eps: float, mechanism: BranchingMechanism) -> LevelCounts:
    """高度 a 以上、高出 a 至少 eps 的子树个数 n 及 Z_a 的估计 n / b(eps)"""
    if not eps > 0.0:
        raise DomainError(f"eps must be positive, got {eps}")
    edges = _crossing(t, a)
    n = int(np.count_nonzero(t.subtree_height[edges] - a >= eps))
    return {"n": n, "z_estimate": n / extinction(mechanism, eps)}


@require_finite_tree
def level_widths(t: WTree, levels: Sequence[float], eps: float, mechanism: BranchingMechanism) -> np.ndarray:
    """一组高度上的 z_estimate"""
    return np.array([level_counts(t, float(a), eps, mechanism)["z_estimate"] for a in levels])


@require_finite_tree
def coarea_length(t: WTree, levels: Sequence[float]) -> np.ndarray:
    """每个高度上骨架的点数（单位高度的骨架长度）"""
    return np.array([_crossing(t, float(a)).size for a in levels], dtype=float)


@require_finite_tree
def mass_profile(t: WTree, levels: Sequence[float]) -> np.ndarray:
    """相邻高度之间的质量除以间距（局部时间 ℓ^a 的近似）"""
    edges = np.asarray(levels, dtype=float)
    mass, _ = np.histogram(t.atom_height, bins=edges, weights=t.atom_weight)
    return mass / np.diff(edges)


@require_finite_tree
def summary(t: WTree) -> TreeSummary:
    return {"sigma": t.sigma, "h_max": t.h_max, "total_length": t.total_length}

"""Gromov–Hausdorff–Prohorov 距离

给定两棵树的有限网之间的对应关系 R（投影覆盖两边的网，且包含根对），
在 X ⊔ Y 上定义 d_Z(x,y) = min_{(x',y')∈R} d_X(x,x') + dis(R)/2 + d_Y(y',y)，
并在该空间中计算 d_root + d_H + d_P。所有值都是对应嵌入下的上界。
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from levytree.errors import DomainError, EmptyCorrespondenceError, InfiniteTreeError, SizeLimitError
from levytree.logger import logger
from levytree.types import GhpDistance, GhpMode
from levytree.util import require_finite_tree
from levytree.wtree import (
    ROOT,
    Excursion,
    Location,
    WTree,
    atom_locations,
    distance_matrix,
    excursion_points,
    location_height,
    node_location,
    truncate,
)

EXACT_LIMIT = 8
FLOW_SCALE = 2**30
CHUNK = 1 << 22
FULL_EPSABS = 1e-7


@dataclass(frozen=True)
class Correspondence:
    """X 与 Y 上位置的配对"""

    pairs: tuple[tuple[Location, Location], ...]

    def __post_init__(self) -> None:
        if not self.pairs:
            raise EmptyCorrespondenceError("correspondence has no pairs")

    @property
    def left(self) -> list[Location]:
        return [p[0] for p in self.pairs]

    @property
    def right(self) -> list[Location]:
        return [p[1] for p in self.pairs]


# ==================== 网 ====================


@require_finite_tree
def net_points(t: WTree) -> list[Location]:
    """节点、原子位置与边中点构成的网（根在首位，去重）"""
    points = [ROOT]
    points.extend(node_location(t, i) for i in range(1, t.n_nodes))
    points.extend(Location(i, float(t.length[i]) / 2.0) for i in range(1, t.n_nodes))
    points.extend(atom_locations(t))
    seen: set[Location] = set()
    unique: list[Location] = []
    for p in points:
        key = ROOT if p.edge == 0 else p
        if key not in seen:
            seen.add(key)
            unique.append(key)
    return unique


@require_finite_tree
def net_resolution(t: WTree) -> float:
    """网的分辨率：骨架上任一点到网的最大距离"""
    worst = 0.0
    offsets: dict[int, list[float]] = {}
    for e, o in zip(t.atom_edge, t.atom_offset):
        offsets.setdefault(int(e), []).append(float(o))
    for i in range(1, t.n_nodes):
        length = float(t.length[i])
        cuts = sorted({0.0, length / 2.0, length, *offsets.get(i, [])})
        worst = max(worst, max(b - a for a, b in zip(cuts, cuts[1:])) / 2.0)
    return worst


def _merged_atoms(t: WTree) -> tuple[list[Location], np.ndarray]:
    """同一位置的原子合并，去掉零权重"""
    weights: dict[Location, float] = {}
    for e, o, w in zip(t.atom_edge, t.atom_offset, t.atom_weight):
        if w > 0.0:
            key = ROOT if e == 0 else Location(int(e), float(o))
            weights[key] = weights.get(key, 0.0) + float(w)
    return list(weights), np.array(list(weights.values()), dtype=float)


# ==================== 距离原语 ====================


def _min_plus(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """(min,+) 矩阵乘积 min_k left[i,k] + right[k,j]，按行分块"""
    n, k = left.shape
    m = right.shape[1]
    out = np.empty((n, m))
    rows = max(1, CHUNK // max(1, k * m))
    for start in range(0, n, rows):
        block = left[start : start + rows, :, None] + right[None, :, :]
        out[start : start + rows] = block.min(axis=1)
    return out


def _distortion(dx: np.ndarray, dy: np.ndarray) -> float:
    return float(np.abs(dx - dy).max()) if dx.size else 0.0


@require_finite_tree
def distortion(x: WTree, y: WTree, r: Correspondence) -> float:
    """dis(R) = sup |d_X(x,x') − d_Y(y,y')|，对有限配对精确计算"""
    return _distortion(distance_matrix(x, r.left), distance_matrix(y, r.right))


def hausdorff(cross: np.ndarray) -> float:
    """由交叉距离矩阵给出的 Hausdorff 距离"""
    if cross.size == 0:
        return 0.0 if cross.shape[0] == cross.shape[1] == 0 else math.inf
    return float(max(cross.min(axis=1).max(), cross.min(axis=0).max()))


def _flow(cross: np.ndarray, mu: np.ndarray, nu: np.ndarray, radius: float, scale: float) -> float:
    """源→μ 原子→（距离 ≤ radius）→ν 原子→汇 的最大流"""
    a, b = mu.size, nu.size
    sink = a + b + 1
    src_caps = np.rint(mu * scale).astype(np.int64)
    dst_caps = np.rint(nu * scale).astype(np.int64)
    ii, jj = np.nonzero(cross <= radius)
    rows = np.concatenate((np.zeros(a, dtype=np.int64), ii + 1, a + 1 + np.arange(b)))
    cols = np.concatenate((1 + np.arange(a), a + 1 + jj, np.full(b, sink)))
    big = int(src_caps.sum()) + 1
    data = np.concatenate((src_caps, np.full(ii.size, big), dst_caps)).astype(np.int32)
    graph = csr_matrix((data, (rows, cols)), shape=(sink + 1, sink + 1))
    return maximum_flow(graph, 0, sink).flow_value / scale


def prohorov(cross: np.ndarray, mu: np.ndarray, nu: np.ndarray) -> float:
    """两个有限原子测度之间的 Prohorov 距离

    d_P ≤ ε 当且仅当距离 ≤ ε 的二部图上的最大流 ≥ max(μ 总质量, ν 总质量) − ε。
    在排序后的候选半径上二分，每次检查一次最大流。容量按 2^30 量化。
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    total = max(float(mu.sum()), float(nu.sum()))
    if total == 0.0:
        return 0.0
    if mu.size == 0 or nu.size == 0:
        return total
    scale = FLOW_SCALE / (float(mu.sum()) + float(nu.sum()))
    radii = np.unique(np.concatenate(([0.0], cross.ravel())))

    def gap(i: int) -> float:
        return total - _flow(cross, mu, nu, float(radii[i]), scale)

    # 第一个使 radii[i] ≥ gap(i) 的下标
    lo, hi = 0, radii.size - 1
    if radii[hi] < gap(hi):
        return max(float(radii[hi]), gap(hi))
    while lo < hi:
        mid = (lo + hi) // 2
        if radii[mid] >= gap(mid):
            hi = mid
        else:
            lo = mid + 1
    best = float(radii[lo])
    if lo > 0:
        best = min(best, gap(lo - 1))
    return max(best, 0.0)


# ==================== 对应嵌入 ====================


@dataclass
class _Side:
    """一侧树的网、原子及其到配对点的距离"""

    tree: WTree
    net: list[Location]
    atoms: list[Location]
    weights: np.ndarray

    @classmethod
    def of(cls, tree: WTree, net: list[Location] | None = None) -> _Side:
        atoms, weights = _merged_atoms(tree)
        return cls(tree, net if net is not None else net_points(tree), atoms, weights)


def _embedded_value(xs: _Side, ys: _Side, left: Sequence[Location], right: Sequence[Location]) -> float:
    """配对 (left[k], right[k]) 诱导的嵌入中 d_root + d_H + d_P 的值"""
    px = distance_matrix(xs.tree, list(left))
    py = distance_matrix(ys.tree, list(right))
    half = _distortion(px, py) / 2.0

    def cross(a: list[Location], b: list[Location]) -> np.ndarray:
        if not a or not b:
            return np.zeros((len(a), len(b)))
        da = distance_matrix(xs.tree, a, list(left))
        db = distance_matrix(ys.tree, list(right), b)
        return _min_plus(da, db) + half

    d_root = float(cross([ROOT], [ROOT])[0, 0])
    d_h = hausdorff(cross(xs.net, ys.net))
    d_p = prohorov(cross(xs.atoms, ys.atoms), xs.weights, ys.weights)
    return d_root + d_h + d_p


def _height_match(xs: _Side, ys: _Side) -> tuple[list[Location], list[Location]]:
    """按高度最近配对"""
    hx = np.array([location_height(xs.tree, p) for p in xs.net])
    hy = np.array([location_height(ys.tree, p) for p in ys.net])
    left = [ROOT]
    right = [ROOT]
    for i, p in enumerate(xs.net):
        left.append(p)
        right.append(ys.net[int(np.argmin(np.abs(hy - hx[i])))])
    for j, q in enumerate(ys.net):
        left.append(xs.net[int(np.argmin(np.abs(hx - hy[j])))])
        right.append(q)
    return left, right


def _greedy_match(xs: _Side, ys: _Side) -> tuple[list[Location], list[Location]]:
    """按高度顺序逐点选择使当前畸变最小的配对点"""
    dx = distance_matrix(xs.tree, xs.net)
    dy = distance_matrix(ys.tree, ys.net)
    hx = dx[0]
    hy = dy[0]
    pairs: list[tuple[int, int]] = [(0, 0)]

    def best_for(column: np.ndarray, other: np.ndarray, index: int, flip: bool) -> int:
        own = np.array([p[1] if flip else p[0] for p in pairs])
        mate = np.array([p[0] if flip else p[1] for p in pairs])
        cost = np.abs(column[index, own][None, :] - other[:, mate]).max(axis=1)
        return int(np.argmin(cost))

    for i in np.argsort(hx, kind="stable"):
        if i == 0:
            continue
        pairs.append((int(i), best_for(dx, dy, int(i), flip=False)))
    for j in np.argsort(hy, kind="stable"):
        if j == 0:
            continue
        pairs.append((best_for(dy, dx, int(j), flip=True), int(j)))
    return [xs.net[i] for i, _ in pairs], [ys.net[j] for _, j in pairs]


def _upper(xs: _Side, ys: _Side) -> float:
    return min(_embedded_value(xs, ys, *match(xs, ys)) for match in (_height_match, _greedy_match))


@dataclass
class _Grid:
    """一侧的网点与原子点共用一张距离矩阵，网点在前"""

    dist: np.ndarray
    n_net: int
    core: list[int]
    atoms: np.ndarray
    weights: np.ndarray

    @classmethod
    def of(cls, side: _Side) -> _Grid:
        points = list(side.net)
        index = {p: k for k, p in enumerate(points)}
        for a in side.atoms:
            if a not in index:
                index[a] = len(points)
                points.append(a)
        nodes = {node_location(side.tree, i) for i in range(side.tree.n_nodes)}
        core = [k for k, p in enumerate(side.net) if p in nodes or p in side.atoms]
        atoms = np.array([index[a] for a in side.atoms], dtype=np.int64)
        return cls(distance_matrix(side.tree, points), len(side.net), core, atoms, side.weights)

    @property
    def net(self) -> np.ndarray:
        return self.dist[: self.n_net, : self.n_net]


def _grid_value(gx: _Grid, gy: _Grid, pairs: Sequence[tuple[int, int]]) -> float:
    """与 _embedded_value 相同的嵌入值，按下标计算"""
    left = np.array([i for i, _ in pairs], dtype=np.int64)
    right = np.array([j for _, j in pairs], dtype=np.int64)
    half = _distortion(gx.dist[np.ix_(left, left)], gy.dist[np.ix_(right, right)]) / 2.0

    def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.size == 0 or b.size == 0:
            return np.zeros((a.size, b.size))
        return _min_plus(gx.dist[np.ix_(a, left)], gy.dist[np.ix_(right, b)]) + half

    # 根对在配对中，d_root = dis/2
    d_h = hausdorff(cross(np.arange(gx.n_net), np.arange(gy.n_net)))
    d_p = prohorov(cross(gx.atoms, gy.atoms), gx.weights, gy.weights)
    return half + d_h + d_p


def _exact(xs: _Side, ys: _Side, start: float) -> float:
    """对根、节点与原子构成的核心网之间的极小对应做分支定界

    变量依次为 X 核心点的像（远点优先）与尚未被覆盖的 Y 核心点的原像。
    每个完整的核心对应先加入所有不增加畸变的配对，再把边中点接到代价最小的点上，
    补全后求值；相同的配对集合只求值一次。
    嵌入值不小于 max(dis, |H_X − H_Y|) + |μ_X − μ_Y|，据此剪枝。
    """
    gx, gy = _Grid.of(xs), _Grid.of(ys)
    dx, dy = gx.net, gy.net
    floor = abs(float(gx.weights.sum()) - float(gy.weights.sum()))
    if max(0.0, abs(float(dx[0].max()) - float(dy[0].max()))) + floor >= start:
        return start
    order = [("x", i) for i in sorted(gx.core, key=lambda k: -dx[0, k]) if i != 0]
    order += [("y", j) for j in sorted(gy.core, key=lambda k: -dy[0, k]) if j != 0]
    candidates = {"x": np.array(gy.core, dtype=np.int64), "y": np.array(gx.core, dtype=np.int64)}
    best = start
    seen: set[frozenset[tuple[int, int]]] = set()
    pairs: list[tuple[int, int]] = [(0, 0)]

    def close(current: list[tuple[int, int]], dis: float) -> list[tuple[int, int]]:
        own = [i for i, _ in current]
        mate = [j for _, j in current]
        cost = np.abs(dx[:, own][:, None, :] - dy[:, mate][None, :, :]).max(axis=2)
        result = list(current)
        members = set(result)
        added_x: list[int] = []
        added_y: list[int] = []
        for i, j in zip(*np.nonzero(cost <= dis)):
            i, j = int(i), int(j)
            if (i, j) in members:
                continue
            if added_x and np.abs(dx[i, added_x] - dy[j, added_y]).max() > dis:
                continue
            result.append((i, j))
            members.add((i, j))
            added_x.append(i)
            added_y.append(j)
        return result

    def attach(current: list[tuple[int, int]]) -> list[tuple[int, int]]:
        result = list(current)
        for side, dist in (("x", dx), ("y", dy)):
            covered = {p[0] if side == "x" else p[1] for p in result}
            for index in np.argsort(-dist[0], kind="stable"):
                if int(index) in covered:
                    continue
                own = np.array([p[0] if side == "x" else p[1] for p in result])
                mate = np.array([p[1] if side == "x" else p[0] for p in result])
                here, there = (dx, dy) if side == "x" else (dy, dx)
                costs = np.abs(here[index, own][None, :] - there[:, mate]).max(axis=1)
                other = int(np.argmin(costs))
                result.append((int(index), other) if side == "x" else (other, int(index)))
        return result

    def finish(dis: float) -> None:
        nonlocal best
        full = attach(close(pairs, dis))
        left = [i for i, _ in full]
        right = [j for _, j in full]
        dis = _distortion(dx[np.ix_(left, left)], dy[np.ix_(right, right)])
        if dis + floor >= best:
            return
        key = frozenset(close(full, dis))
        if key in seen:
            return
        seen.add(key)
        best = min(best, _grid_value(gx, gy, sorted(key)))

    def extend(depth: int, dis: float) -> None:
        if dis + floor >= best:
            return
        if depth == len(order):
            finish(dis)
            return
        side, index = order[depth]
        if side == "y" and any(j == index for _, j in pairs):
            extend(depth + 1, dis)
            return
        own = np.array([p[0] if side == "x" else p[1] for p in pairs])
        mate = np.array([p[1] if side == "x" else p[0] for p in pairs])
        here, there = (dx, dy) if side == "x" else (dy, dx)
        pool = candidates[side]
        costs = np.abs(here[index, own][None, :] - there[np.ix_(pool, mate)]).max(axis=1)
        for k in np.argsort(costs, kind="stable"):
            step = max(dis, float(costs[k]))
            if step + floor >= best:
                break
            candidate = int(pool[k])
            pairs.append((index, candidate) if side == "x" else (candidate, index))
            extend(depth + 1, step)
            pairs.pop()

    extend(0, 0.0)
    logger.debug(f"exact_small: 求值 {len(seen)} 个对应")
    return best


@require_finite_tree
def dghp_compact(
    x: WTree,
    y: WTree,
    mode: GhpMode = "upper",
    correspondence: Correspondence | None = None,
    exact_limit: int = EXACT_LIMIT,
) -> float:
    """紧树之间的 GHP 距离

    upper：高度配对与贪心配对两种启发式对应中较小的嵌入值；
    exact_small：网之间的穷举分支定界（节点数加原子数不超过 exact_limit）；
    给定 correspondence 时直接在它诱导的嵌入中求值，网取其两侧投影。
    """
    if getattr(y, "is_infinite", False):
        raise InfiniteTreeError("dghp_compact called on the infinite tree sentinel")
    if correspondence is not None:
        xs = _Side.of(x, _unique(correspondence.left))
        ys = _Side.of(y, _unique(correspondence.right))
        return _embedded_value(xs, ys, correspondence.left, correspondence.right)
    xs = _Side.of(x)
    ys = _Side.of(y)
    upper = _upper(xs, ys)
    if mode == "upper":
        return upper
    if mode != "exact_small":
        raise DomainError(f"unknown GHP mode {mode!r}")
    for t in (x, y):
        size = t.n_nodes + len(_merged_atoms(t)[0])
        if size > exact_limit:
            raise SizeLimitError(f"exact_small needs at most {exact_limit} nodes and atoms, got {size}")
    return _exact(xs, ys, upper + 1e-12)


def _unique(points: Sequence[Location]) -> list[Location]:
    return list(dict.fromkeys(ROOT if p.edge == 0 else p for p in points))


@require_finite_tree
def dghp_full(x: WTree, y: WTree) -> float:
    """∫_0^∞ e^{−r}(1 ∧ d^c(x^(r), y^(r))) dr

    x^(r) 为根的闭 r 球（即高度 r 处的截断）；被积函数在节点与原子高度之间连续，
    以这些高度为断点做自适应积分，最高点以上被积函数为常数。
    """
    heights = np.unique(np.concatenate((x.height, y.height, x.atom_height, y.atom_height)))
    top = float(heights[-1])

    def integrand(r: float) -> float:
        value = dghp_compact(truncate(x, r), truncate(y, r), "upper")
        return math.exp(-r) * min(1.0, value)

    whole = min(1.0, dghp_compact(x, y, "upper"))
    if top == 0.0:
        return whole
    tail = math.exp(-top) * whole
    inner = [float(h) for h in heights[1:-1]]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        body, err = integrate.quad(integrand, 0.0, top, points=inner or None, epsabs=FULL_EPSABS, limit=200)
    logger.debug(f"dghp_full: 积分 {body:.6g} ± {err:.2g}, 尾项 {tail:.6g}")
    return body + tail


# ==================== 游程对应 ====================


def excursion_correspondence(f: Excursion, g: Excursion) -> Correspondence:
    """共享时间网格上的对应 {(p^f(t), p^g(t))}，t 取全部采样时刻与区间中点

    两条游程的步长必须相同；较短的一条在末尾以 0 补齐（对应点为根）。
    对应树分别为 from_excursion(f) 与 from_excursion(g)。
    """
    if f.step != g.step:
        raise DomainError(f"excursions need a common step, got {f.step} and {g.step}")
    _, fs, fm = excursion_points(f)
    _, gs, gm = excursion_points(g)
    n = max(len(fm), len(gm))
    fs = fs + [ROOT] * (n + 1 - len(fs))
    gs = gs + [ROOT] * (n + 1 - len(gs))
    fm = fm + [ROOT] * (n - len(fm))
    gm = gm + [ROOT] * (n - len(gm))
    return Correspondence(tuple(zip(fs + fm, gs + gm)))


def excursion_bound(f: Excursion, g: Excursion) -> float:
    """6‖f−g‖∞ + |σ^f − σ^g|（较短的游程以 0 补齐）"""
    n = max(f.values.size, g.values.size)
    a = np.pad(f.values, (0, n - f.values.size))
    b = np.pad(g.values, (0, n - g.values.size))
    return 6.0 * float(np.abs(a - b).max()) + abs(f.sigma - g.sigma)


@require_finite_tree
def ghp_report(x: WTree, y: WTree, mode: GhpMode = "upper", exact_limit: int = EXACT_LIMIT) -> GhpDistance:
    """带网分辨率的 GHP 距离"""
    value = dghp_compact(x, y, mode, exact_limit=exact_limit)
    return {"value": value, "net_resolution": max(net_resolution(x), net_resolution(y)), "mode": mode}

"""
wtree v1 文本格式的读写
格式：首行 `wtree v1`，之后是 node / atom / delta 行，可选的 marks / mark 行追加在后面
"""

import heapq
import re
from pathlib import Path

import numpy as np

from levytree.errors import OutputError, TreeFormatError
from levytree.pruning import MarkMeasure
from levytree.util import format_float
from levytree.wtree import WTree

HEADER = "wtree v1"

NUMBER = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
NODE_REGEX = re.compile(rf"^node\s+(\d+)\s+(\d+|-)\s+{NUMBER}$")
ATOM_REGEX = re.compile(rf"^atom\s+(\d+)\s+{NUMBER}\s+{NUMBER}$")
DELTA_REGEX = re.compile(rf"^delta\s+(\d+)\s+{NUMBER}$")
MARKS_REGEX = re.compile(rf"^marks\s+{NUMBER}$")
SKE_MARK_REGEX = re.compile(rf"^mark\s+ske\s+(\d+)\s+{NUMBER}\s+{NUMBER}$")
NOD_MARK_REGEX = re.compile(rf"^mark\s+nod\s+(\d+)\s+{NUMBER}$")


def format_tree(t: WTree, marks: MarkMeasure | None = None) -> str:
    """树（及可选的标记）的文本表示，浮点数用最短可往返写法"""
    lines = [HEADER]
    for i in range(t.n_nodes):
        parent = "-" if i == 0 else str(int(t.parent[i]))
        lines.append(f"node {i} {parent} {format_float(t.length[i])}")
    for e, o, w in zip(t.atom_edge, t.atom_offset, t.atom_weight):
        lines.append(f"atom {int(e)} {format_float(o)} {format_float(w)}")
    for node, mass in sorted(t.node_masses.items()):
        lines.append(f"delta {node} {format_float(mass)}")
    if marks is not None:
        lines.append(f"marks {format_float(marks.theta_max)}")
        for e, o, th in zip(marks.ske_edge, marks.ske_offset, marks.ske_theta):
            lines.append(f"mark ske {int(e)} {format_float(o)} {format_float(th)}")
        for node, values in sorted(marks.node_marks.items()):
            for th in values:
                lines.append(f"mark nod {node} {format_float(th)}")
    return "\n".join(lines) + "\n"


def _parents_first(parents: dict[int, int]) -> list[int]:
    """从根开始、每次取编号最小的可达节点的遍历顺序

    父节点总排在子节点之前；编号已满足父小于子的文件保持原编号。

    Raises:
        TreeFormatError: 根不唯一、父节点不存在或有节点不与根连通
    """
    roots = [node for node, parent in parents.items() if parent == -1]
    if len(roots) != 1:
        raise TreeFormatError(f"expected exactly one root node, got {len(roots)}")
    children: dict[int, list[int]] = {}
    for node, parent in sorted(parents.items()):
        if parent == -1:
            continue
        if parent not in parents:
            raise TreeFormatError(f"node {node} has unknown parent {parent}")
        children.setdefault(parent, []).append(node)
    order: list[int] = []
    ready = [roots[0]]
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for child in children.get(node, []):
            heapq.heappush(ready, child)
    if len(order) != len(parents):
        raise TreeFormatError("every node must be connected to the root")
    return order


def parse_tree(text: str) -> tuple[WTree, MarkMeasure | None]:
    """解析 wtree v1 文本

    Raises:
        TreeFormatError: 缺少文件头、无法识别的行、节点编号不连续等
    """
    # 清理 BOM 和回车符
    cleaned = text.replace("\ufeff", "").replace("\r", "")
    lines = [line.strip() for line in cleaned.split("\n")]
    lines = [line for line in lines if line and not line.startswith("#")]
    if not lines or lines[0] != HEADER:
        raise TreeFormatError(f"missing header {HEADER!r}")

    parents: dict[int, int] = {}
    lengths: dict[int, float] = {}
    atoms: list[tuple[int, float, float]] = []
    deltas: dict[int, float] = {}
    theta_max: float | None = None
    ske: list[tuple[int, float, float]] = []
    nod: dict[int, list[float]] = {}

    for number, line in enumerate(lines[1:], start=2):
        if match := NODE_REGEX.match(line):
            node = int(match.group(1))
            if node in parents:
                raise TreeFormatError(f"line {number}: duplicate node {node}")
            parents[node] = -1 if match.group(2) == "-" else int(match.group(2))
            lengths[node] = float(match.group(3))
        elif match := ATOM_REGEX.match(line):
            atoms.append((int(match.group(1)), float(match.group(2)), float(match.group(3))))
        elif match := DELTA_REGEX.match(line):
            deltas[int(match.group(1))] = float(match.group(2))
        elif match := MARKS_REGEX.match(line):
            theta_max = float(match.group(1))
        elif match := SKE_MARK_REGEX.match(line):
            ske.append((int(match.group(1)), float(match.group(2)), float(match.group(3))))
        elif match := NOD_MARK_REGEX.match(line):
            nod.setdefault(int(match.group(1)), []).append(float(match.group(2)))
        else:
            raise TreeFormatError(f"line {number}: unrecognized line {line!r}")

    n = len(parents)
    if sorted(parents) != list(range(n)):
        raise TreeFormatError("node ids must be 0..n-1")
    if (ske or nod) and theta_max is None:
        raise TreeFormatError("mark lines need a preceding 'marks <theta_max>' line")
    order = _parents_first(parents)
    label = {old: new for new, old in enumerate(order)}

    def relabel(node: int) -> int:
        if node not in label:
            raise TreeFormatError(f"reference to unknown node {node}")
        return label[node]

    atoms = [(relabel(e), o, w) for e, o, w in atoms]
    deltas = {relabel(k): v for k, v in deltas.items()}
    ske = [(relabel(e), o, th) for e, o, th in ske]
    nod = {relabel(k): v for k, v in nod.items()}

    try:
        tree = WTree(
            [-1] + [label[parents[old]] for old in order[1:]],
            [lengths[old] for old in order],
            np.array([a[0] for a in atoms], dtype=np.int64),
            [a[1] for a in atoms],
            [a[2] for a in atoms],
            deltas,
        )
        marks = None
        if theta_max is not None:
            marks = MarkMeasure(
                theta_max,
                np.array([m[0] for m in ske], dtype=np.int64),
                [m[1] for m in ske],
                [m[2] for m in ske],
                {k: tuple(v) for k, v in nod.items()},
            )
            marks.check(tree)
    except ValueError as e:
        raise TreeFormatError(f"invalid tree: {e}") from e
    return tree, marks


def read_tree(path: str | Path) -> tuple[WTree, MarkMeasure | None]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise OutputError(f"cannot read tree file {path}: {e}") from e
    return parse_tree(text)


def write_tree(path: str | Path, t: WTree, marks: MarkMeasure | None = None) -> None:
    try:
        Path(path).write_text(format_tree(t, marks), encoding="utf-8")
    except OSError as e:
        raise OutputError(f"cannot write tree file {path}: {e}") from e

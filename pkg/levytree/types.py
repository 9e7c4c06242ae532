"""Typed result records shared by the library and the CLI.

Operations that return several named numbers return one of these ``TypedDict``
records so that CSV writers and tests can rely on fixed keys.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Literal, NotRequired, TypedDict

if TYPE_CHECKING:
    from levytree.wtree import InfiniteTree, Location, WTree

EventType = Literal["finite", "infinite", "none"]
GhpMode = Literal["exact_small", "upper"]
ExitDensityForm = Literal["level", "spine"]

# ==================== 机制计算 ====================


class InvertResult(TypedDict):
    """ψ 的反函数结果"""

    psi_inverse: float  # ψ(q)=v 的最大根
    theta_star: float | None  # ψ' 的非负根（次临界时为 None）


class ExitGivenAscension(TypedDict, total=False):
    """给定上升时间 A=θ0 时退出时间 A_h 的条件概率"""

    p_geq: float  # N[A_h ≥ θ | A=θ0]
    p_eq: float  # N[A_h = A | A=θ0]（θ̄₀ 形式）
    p_eq_conjugate: float  # 同一量的 θ₀ 形式
    c: float  # C(θ,h)
    p_asc_given_exit: NotRequired[float]  # N[A = A_h | A_h = θ]（仅 θ<0 时有意义）


class MechanismInfo(TypedDict):
    """注册的 Lévy 测度变体信息"""

    name: str  # 文本格式中的变体名
    variant: str  # 实现类名


# ==================== 树 ====================


class TreeSummary(TypedDict):
    """树的汇总量"""

    sigma: float  # 总质量
    h_max: float  # 最大高度
    total_length: float  # 骨架总长度


class LevelCounts(TypedDict):
    """高度 a 以上、超出至少 ε 的子树计数"""

    n: int
    z_estimate: float  # n / b(ε)


class TreeSampleMeta(TypedDict, total=False):
    """抽样元数据"""

    mechanism: str  # 使用的分支机制
    conditioning: str  # 施加的条件（如 "P_x"、"sigma>=eps"）
    step: float  # 离散步长


class PrunedGraft(TypedDict):
    """剪枝分解中被切下的一棵子树"""

    location: Location  # 在剪枝树上的嫁接点 x_i
    tree: WTree  # 子树 T^i
    theta: float  # θ_i


class Decomposition(TypedDict):
    """T = Λ_θ(T) ⊛ (T^i, x_i)"""

    pruned: WTree
    grafts: list[PrunedGraft]


# ==================== GHP ====================


class GhpDistance(TypedDict):
    """带界语义的 GHP 距离"""

    value: float
    net_resolution: float
    mode: GhpMode


class GhpRow(TypedDict):
    treeA: str
    treeB: str
    mode: GhpMode
    value: float
    net_resolution: float


# ==================== 生长过程 ====================


class TrajectoryRow(TypedDict):
    """生长轨迹日志中的一行"""

    theta: float
    event_type: EventType
    x_height: float  # 嫁接点高度（无几何信息时为 nan）
    graft_sigma: float
    graft_height: float
    sigma_after: float  # 事件之后（向后时间）的总质量
    hmax_after: float


class CompensatorCheck(TypedDict):
    """补偿公式两侧"""

    empirical: float  # 事件上的 σ 增量之和（轨迹平均）
    empirical_se: float
    compensator: float  # ∫ σ_q · (粗 N 质量一阶矩) dq（轨迹平均）
    compensator_se: float
    trajectories: int


class SpineSample(TypedDict):
    """退出时刻的脊分解样本"""

    spine_height: float  # H_x
    tree_before: WTree  # T_{A_h}
    tree_after: WTree | InfiniteTree  # T_{A_h-}（越界树无限时为 INFINITE_TREE）
    overshoot_tree: object  # TreeSample（越界子树）


# ==================== 命令行输出 ====================


class ReplicateRow(TypedDict):
    """Monte Carlo 输出行"""

    replicate: int
    seed: int
    statistic: str
    value: float


class SummaryRow(TypedDict, total=False):
    """汇总行：点估计、标准误与解析目标"""

    statistic: str
    n: int
    mean: float
    se: float
    target: NotRequired[float]
    passed: NotRequired[bool]


class PsiTableRow(TypedDict):
    theta: float
    lam: float  # CSV 列名为 lambda
    psi: float
    psi_prime: float
    u: float
    b: float

"""异常定义

所有模块抛出的异常都继承自 LevyTreeError，并携带命令行退出码。
"""

from __future__ import annotations


class LevyTreeError(Exception):
    """levytree 异常基类"""

    exit_code: int = 4


# ==================== 数值与模块错误（退出码 4） ====================


class DomainError(LevyTreeError, ValueError):
    """参数不在解析定义域内（如 λ ≤ θ_∞ 或 θ ∉ Θ^ψ）"""


class QuadratureError(LevyTreeError):
    """自适应积分或 ODE 积分未达到要求精度"""


class NoRootError(LevyTreeError):
    """求根区间内不存在解"""


class EmptyExcursionError(LevyTreeError, ValueError):
    """游程只有一个采样点"""


class InvalidLocationError(LevyTreeError, ValueError):
    """树上位置不合法（边不存在或偏移超出边长）"""


class ZeroMassError(LevyTreeError):
    """总质量为零，无法按质量测度抽样"""


class InfiniteTreeError(LevyTreeError):
    """对无限树哨兵执行了树操作"""


class EmptyCorrespondenceError(LevyTreeError, ValueError):
    """对应关系为空"""


class SizeLimitError(LevyTreeError):
    """精确 GHP 搜索的规模超过上限"""


class StepTooCoarseError(LevyTreeError, ValueError):
    """离散步长超过配置的最大值"""


class MarkRangeError(LevyTreeError, ValueError):
    """剪枝参数 θ 超出标记的采样范围 [0, θ_max]"""


class EnvelopeError(LevyTreeError):
    """稀疏化抽样的控制强度被实际强度超过（内部错误保护）"""


class BudgetExceededError(LevyTreeError):
    """路径模拟步数超过预算"""


class RejectionBudgetExceeded(LevyTreeError):
    """拒绝抽样尝试次数超过预算"""

    def __init__(self, message: str, attempts: int, accepted: int) -> None:
        super().__init__(f"{message} (attempts={attempts}, accepted={accepted})")
        self.attempts = attempts
        self.accepted = accepted

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0


# ==================== 配置与输入输出错误 ====================


class ConfigError(LevyTreeError, ValueError):
    """配置缺失或格式错误"""

    exit_code = 2


class OutputError(LevyTreeError):
    """读写结果文件失败"""

    exit_code = 3


class TreeFormatError(LevyTreeError, ValueError):
    """wtree 文本格式解析失败"""

    exit_code = 3


class SchemaMismatchError(LevyTreeError):
    """合并的 CSV 分片列不一致"""

    exit_code = 3


class CheckFailed(LevyTreeError):
    """--check 模式下结果未通过解析目标"""

    exit_code = 5

"""Lévy 测度基类和能力定义

定义分支机制中 Lévy 测度 Π 的统一接口和能力枚举。
每个变体只负责积分项

    I(λ) = ∫ (e^{−λr} − 1 + λr·1{r<1}) Π(dr)

及其前两阶导数、指数倾斜 Π_θ(dr) = e^{−θr}Π(dr) 和可积性判据；
α、β 的部分由 BranchingMechanism 负责。
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum


class Capability(Enum):
    """Lévy 测度能力枚举

    抽样器据此判断能否精确抽样，psi-table 据此判断能否取负的 θ。
    """

    # ==================== 倾斜 ====================
    TILT_BELOW_ZERO = "tilt.below_zero"  # θ_∞ < 0，可以向负方向倾斜

    # ==================== 抽样 ====================
    SAMPLER_EXACT = "sampler.exact"  # Π = 0，树与 CSBP 可精确抽样


class LevyMeasure(ABC):
    """Lévy 测度基类

    子类都是不可变值对象（frozen dataclass），可以作为缓存键。
    """

    @property
    @abstractmethod
    def name(self) -> str:
        """变体名称

        Returns:
            如 'quadratic', 'stable', 'atoms', 'tabulated'
        """

    @property
    @abstractmethod
    def capabilities(self) -> set[Capability]:
        """该变体支持的能力集合"""

    def has_capability(self, cap: Capability) -> bool:
        return cap in self.capabilities

    @property
    @abstractmethod
    def theta_inf(self) -> float:
        """θ_∞ = inf{θ : ∫_(1,∞) Π_θ(dr) < ∞}，可以为 −∞"""

    @abstractmethod
    def integral(self, lam: float, order: int = 0) -> float:
        """积分项 I(λ) 或其一、二阶导数

        Args:
            lam: 自变量 λ，调用方已保证 λ ≥ θ_∞（order ≥ 1 时 λ > θ_∞）
            order: 求导阶数 0、1、2

        Returns:
            I(λ)、I'(λ) 或 I''(λ)

        Raises:
            QuadratureError: 数值积分未达到精度
        """

    @abstractmethod
    def tilt(self, theta: float) -> LevyMeasure:
        """返回倾斜后的测度 Π_θ(dr) = e^{−θr}Π(dr)

        Raises:
            DomainError: θ 使倾斜后的测度在无穷远处不可积
        """

    @abstractmethod
    def boundary_conservative(self) -> bool:
        """在 θ = θ_∞ 处是否仍有 ∫_(1,∞) r Π_θ(dr) < ∞（θ_∞ 有限时才有意义）"""

    @abstractmethod
    def small_jumps_unbounded(self) -> bool:
        """∫_(0,1) r Π(dr) 是否发散"""

    def growth_index(self) -> float | None:
        """I(λ) 在 λ→∞ 时的幂次增长指数（无超线性增长时返回 None）"""
        return None

    def leading_coefficient(self) -> float:
        """I(λ) ~ C·λ^{growth_index} 中的 C"""
        return 0.0

    @abstractmethod
    def fields(self) -> dict[str, str]:
        """文本格式中该变体自身的键值（不含 alpha、beta）"""

    @classmethod
    @abstractmethod
    def from_fields(cls, fields: dict[str, str]) -> LevyMeasure:
        """由文本格式的键值构造

        Raises:
            KeyError: 缺少必需的键
            ValueError: 数值无法解析
        """

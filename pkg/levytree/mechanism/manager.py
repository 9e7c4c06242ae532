"""Lévy 测度变体注册表

负责分支机制文本格式的解析与序列化：

    quadratic alpha=<f> beta=<f>
    stable alpha=<f> beta=<f> index=<f> scale=<f|calibrated> [tempering=<f>]
    atoms alpha=<f> beta=<f> atoms=r1:w1,r2:w2,...
    tabulated alpha=<f> beta=<f> grid=r1:p1,... left=<f> right=<f> [rate=<f>]

alpha 可以写成 critical，此时取使 ψ'(0) = 0 的值。
"""

from __future__ import annotations

from functools import cache

from levytree.errors import ConfigError
from levytree.logger import logger
from levytree.mechanism.atoms import AtomsMeasure
from levytree.mechanism.base import LevyMeasure
from levytree.mechanism.branching import BranchingMechanism
from levytree.mechanism.stable import StableMeasure
from levytree.mechanism.tabulated import TabulatedMeasure
from levytree.mechanism.zero import ZeroMeasure
from levytree.types import MechanismInfo
from levytree.util import format_float


class MeasureRegistry:
    """管理所有注册的 Lévy 测度变体，处理文本格式"""

    def __init__(self) -> None:
        self._variants: dict[str, type[LevyMeasure]] = {}

    def register(self, name: str, variant: type[LevyMeasure]) -> None:
        self._variants[name] = variant
        logger.info(f"注册 Lévy 测度: {name} ({variant.__name__})")

    def get_variant(self, name: str) -> type[LevyMeasure] | None:
        return self._variants.get(name)

    def list_variants_info(self) -> list[MechanismInfo]:
        info: list[MechanismInfo] = []
        for name, variant in self._variants.items():
            info.append({"name": name, "variant": variant.__name__})
        return info

    def parse(self, text: str) -> BranchingMechanism:
        """解析机制文本

        Raises:
            ConfigError: 变体未知、键值格式错误或机制不满足构造条件
        """
        tokens = text.split()
        if not tokens:
            raise ConfigError("empty mechanism string")
        name, *pairs = tokens
        variant = self._variants.get(name)
        if variant is None:
            raise ConfigError(f"unknown mechanism variant: {name}")
        fields: dict[str, str] = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep or not key or not value:
                raise ConfigError(f"malformed mechanism token: {pair!r}")
            fields[key] = value
        alpha_text = fields.pop("alpha", "0")
        try:
            beta = float(fields.pop("beta", "0"))
            levy = variant.from_fields(fields)
            if alpha_text == "critical":
                alpha = -levy.integral(0.0, 1)
            else:
                alpha = float(alpha_text)
            return BranchingMechanism(alpha=alpha, beta=beta, levy=levy)
        except KeyError as e:
            raise ConfigError(f"mechanism {name!r} is missing key {e}") from e
        except ValueError as e:
            raise ConfigError(f"invalid mechanism {text!r}: {e}") from e

    def describe(self, m: BranchingMechanism) -> str:
        """机制的规范文本（parse 的逆）"""
        parts = [m.levy.name, f"alpha={format_float(m.alpha)}", f"beta={format_float(m.beta)}"]
        parts.extend(f"{key}={value}" for key, value in m.levy.fields().items())
        return " ".join(parts)


@cache
def default_registry() -> MeasureRegistry:
    registry = MeasureRegistry()
    registry.register("quadratic", ZeroMeasure)
    registry.register("stable", StableMeasure)
    registry.register("atoms", AtomsMeasure)
    registry.register("tabulated", TabulatedMeasure)
    return registry


def parse_mechanism(text: str) -> BranchingMechanism:
    return default_registry().parse(text)


def describe_mechanism(m: BranchingMechanism) -> str:
    return default_registry().describe(m)

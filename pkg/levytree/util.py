"""工具函数模块

提供版本读取、浮点数格式化、树参数检查等通用工具函数。
"""

from __future__ import annotations

import math
import tomllib
from collections.abc import Callable, Iterable
from functools import cache, wraps
from importlib import metadata
from pathlib import Path
from typing import Concatenate, ParamSpec, TypeVar

import numpy as np

from levytree.errors import ConfigError, InfiniteTreeError

R = TypeVar("R")
P = ParamSpec("P")
T = TypeVar("T")


@cache
def load_package_version() -> str:
    """读取包版本号

    优先使用已安装包的元数据，源码目录运行时退回读取 pyproject.toml。

    Returns:
        版本号字符串，读取失败返回空字符串
    """
    try:
        return metadata.version("levytree")
    except metadata.PackageNotFoundError:
        pass
    pyproject = Path(__file__).resolve().parent.parent / "pyproject.toml"
    try:
        with pyproject.open("rb") as f:
            return str(tomllib.load(f)["project"]["version"])
    except (OSError, KeyError, tomllib.TOMLDecodeError):
        return ""


def format_float(value: float) -> str:
    """最短可往返的十进制表示（inf/nan 写成 inf、-inf、nan）"""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def parse_float_list(text: str) -> list[float]:
    """解析逗号分隔的浮点数列表

    Args:
        text: 如 "0.25,0.5,1"

    Raises:
        ConfigError: 无法解析
    """
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid number list: {text!r}") from e


def mean_and_se(values: Iterable[float]) -> tuple[float, float]:
    """样本均值与标准误（样本数不足 2 时标准误为 nan）"""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), math.nan
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def require_finite_tree(
    func: Callable[Concatenate[T, P], R],
) -> Callable[Concatenate[T, P], R]:
    """装饰器：第一个参数是无限树哨兵时抛出 InfiniteTreeError"""

    @wraps(func)
    def wrapper(tree: T, *args: P.args, **kwargs: P.kwargs) -> R:
        if getattr(tree, "is_infinite", False):
            raise InfiniteTreeError(f"{func.__name__} called on the infinite tree sentinel")
        return func(tree, *args, **kwargs)

    return wrapper

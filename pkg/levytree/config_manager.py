"""配置管理模块

读取扁平的 key=value 实验配置文件，合并命令行覆盖项，提供带校验的取值方法。
"""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

from levytree.errors import ConfigError
from levytree.logger import logger
from levytree.mechanism import BranchingMechanism, parse_mechanism
from levytree.util import format_float, parse_float_list

DEFAULTS: dict[str, str] = {
    "mechanism": "quadratic alpha=0 beta=1",
    "replicates": "1000",
    "workers": "1",
    "x": "1",
    "h": "1",
    "hs": "1",
    "theta": "1",
    "theta0": "-1",
    "a": "1",
    "eps": "1e-4",
    "step": "1e-3",
    "max_step": "1e-2",
    "max_steps": "50000000",
    "exact_limit": "8",
    "delta": "0.05",
    "out": "out",
    "check": "false",
    "drift": "true",
    "thetas": "0.25,0.5,1,2",
    "lambdas": "0.5,1,2,4",
    "theta_start": "2",
    "theta_end": "1",
    "growth": "mass",
    "start": "sigma",
    "sigma_start": "1",
    "mode": "upper",
    "ghp_step": "0.05",
    "ghp_noise": "0.1",
    "triangles": "100",
    "write_trees": "0",
    "cross_check": "false",
}

TRUE_VALUES = {"1", "true", "yes", "on"}
FALSE_VALUES = {"0", "false", "no", "off"}


class ConfigManager:
    """一次命令运行所用的实验配置"""

    def __init__(self, path: str | Path | None = None) -> None:
        self._path = Path(path) if path is not None else None
        self._values: dict[str, str] = dict(DEFAULTS)
        if self._path is not None:
            self._load()

    def _load(self) -> None:
        """读取配置文件，# 开头的注释和空行忽略"""
        assert self._path is not None
        try:
            text = self._path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {self._path}: {e}") from e
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"{self._path}:{number}: expected key=value, got {raw!r}")
            self._values[key.strip()] = value.strip()
        logger.info(f"加载配置: {self._path}")

    def update(self, overrides: Mapping[str, object | None]) -> None:
        """合并覆盖项（值为 None 的键跳过）"""
        for key, value in overrides.items():
            if value is None:
                continue
            if isinstance(value, bool):
                self._values[key] = "true" if value else "false"
            elif isinstance(value, float):
                self._values[key] = format_float(value)
            else:
                self._values[key] = str(value)

    @classmethod
    def from_values(cls, values: Mapping[str, str]) -> ConfigManager:
        """由已合并的键值重建（工作进程使用）"""
        manager = cls()
        manager._values = dict(values)
        return manager

    def values(self) -> dict[str, str]:
        return dict(self._values)

    def has(self, key: str) -> bool:
        return key in self._values

    def get_str(self, key: str, default: str | None = None) -> str:
        value = self._values.get(key, default)
        if value is None:
            raise ConfigError(f"missing config key: {key}")
        return value

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self._values and default is not None:
            return default
        text = self.get_str(key)
        try:
            return float(text)
        except ValueError as e:
            raise ConfigError(f"config key {key} is not a number: {text!r}") from e

    def get_positive_float(self, key: str) -> float:
        value = self.get_float(key)
        if not value > 0.0:
            raise ConfigError(f"config key {key} must be positive, got {value}")
        return value

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self._values and default is not None:
            return default
        text = self.get_str(key)
        try:
            return int(text)
        except ValueError as e:
            raise ConfigError(f"config key {key} is not an integer: {text!r}") from e

    def get_bool(self, key: str) -> bool:
        text = self.get_str(key).lower()
        if text in TRUE_VALUES:
            return True
        if text in FALSE_VALUES:
            return False
        raise ConfigError(f"config key {key} is not a boolean: {text!r}")

    def get_float_list(self, key: str) -> list[float]:
        values = parse_float_list(self.get_str(key))
        if not values:
            raise ConfigError(f"config key {key} is an empty list")
        return values

    def get_mechanism(self) -> BranchingMechanism:
        return parse_mechanism(self.get_str("mechanism"))

    def get_seed(self) -> int:
        if "seed" not in self._values:
            raise ConfigError("seed is mandatory")
        seed = self.get_int("seed")
        if not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        return seed

    def get_replicates(self) -> int:
        count = self.get_int("replicates")
        if count < 1:
            raise ConfigError(f"replicates must be at least 1, got {count}")
        return count

    def get_workers(self) -> int:
        count = self.get_int("workers")
        if count < 1:
            raise ConfigError(f"workers must be at least 1, got {count}")
        return count

    def get_output_dir(self) -> Path:
        return Path(self.get_str("out"))

    def serialize(self) -> list[str]:
        """规范化的 key=value 行（按键排序），写入每个输出文件头"""
        return [f"{key}={self._values[key]}" for key in sorted(self._values)]

"""可复现的随机数流

每个 (seed, stream) 对应一个 Philox 计数器生成器，stream 为重复实验编号。
相同的 (seed, stream) 给出完全相同的抽样序列，不同 stream 互相独立。
"""

from __future__ import annotations

import numpy as np

MASK64 = 2**64 - 1


class RngStream:
    """基于 numpy Philox 的随机数流"""

    def __init__(self, seed: int, stream: int = 0) -> None:
        if not 0 <= seed <= MASK64 or not 0 <= stream <= MASK64:
            raise ValueError(f"seed and stream must be 64-bit unsigned integers, got ({seed}, {stream})")
        self.seed = seed
        self.stream = stream
        sequence = np.random.SeedSequence(seed, spawn_key=(stream,))
        self.gen = np.random.Generator(np.random.Philox(sequence))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"

    def child(self, index: int) -> RngStream:
        """派生的子流（用于嵌套的独立子任务）"""
        derived = RngStream.__new__(RngStream)
        derived.seed = self.seed
        derived.stream = self.stream
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream, index))
        derived.gen = np.random.Generator(np.random.Philox(sequence))
        return derived

    # ==================== 常用分布 ====================

    def uniform(self) -> float:
        return float(self.gen.random())

    def exponential(self, rate: float) -> float:
        """参数为 rate 的指数分布（rate = 0 时返回 inf）"""
        if rate <= 0.0:
            return float("inf")
        return float(self.gen.exponential(1.0 / rate))

    def poisson(self, mean: float) -> int:
        return int(self.gen.poisson(mean)) if mean > 0.0 else 0

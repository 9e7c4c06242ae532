"""
抽样器单元测试
"""

import math
import unittest

import numpy as np
from scipy import integrate

from levytree.errors import DomainError, StepTooCoarseError
from levytree.mechanism import AtomsMeasure, BranchingMechanism, cumulant, extinction
from levytree.rng import RngStream
from levytree.sampler import (
    forest_height,
    graft_weights,
    quadratic_parameters,
    sample_csbp,
    sample_excursion,
    sample_forest,
    sample_forest_mass,
    sample_graft,
    sample_sigma,
    sample_tree,
    sigma_density,
    sigma_tail,
    sigma_window_mass,
    small_sigma_mean,
    stehfest_weights,
    transition_cdf,
)

SUBCRITICAL = BranchingMechanism(alpha=2.0, beta=1.0)
CRITICAL = BranchingMechanism(alpha=0.0, beta=1.0)


def within(case: unittest.TestCase, samples: np.ndarray, expected: float, sigmas: float = 5.0) -> None:
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    case.assertLess(abs(samples.mean() - expected), sigmas * se + 1e-12)


class TestMassLaw(unittest.TestCase):
    """N^ψ 下 σ 的分布"""

    def test_tail_matches_density(self):
        """测试尾函数等于密度的积分"""
        for m in (SUBCRITICAL, CRITICAL):
            integral, _ = integrate.quad(lambda s: sigma_density(m, s), 0.5, math.inf)
            self.assertAlmostEqual(sigma_tail(m, 0.5), integral, delta=1e-7)

    def test_critical_tail(self):
        """测试临界时 N[σ > s] = 1/√(πβs)"""
        self.assertAlmostEqual(sigma_tail(CRITICAL, 4.0), 1.0 / math.sqrt(4.0 * math.pi))

    def test_small_mean(self):
        """测试截断小质量的一阶矩"""
        integral, _ = integrate.quad(lambda s: s * sigma_density(SUBCRITICAL, s), 0.0, 0.3)
        self.assertAlmostEqual(small_sigma_mean(SUBCRITICAL, 0.3), integral, delta=1e-7)

    def test_sample_sigma(self):
        """测试条件于 σ ≥ ε 的抽样"""
        rng = RngStream(11)
        draws = np.array([sample_sigma(SUBCRITICAL, 0.1, rng) for _ in range(4000)])
        self.assertTrue(np.all(draws >= 0.1))
        expected = sigma_tail(SUBCRITICAL, 0.5) / sigma_tail(SUBCRITICAL, 0.1)
        within(self, (draws > 0.5).astype(float), expected)

    def test_window_mass(self):
        """测试质量区间上的测度"""
        expected = sigma_tail(SUBCRITICAL, 0.1) - sigma_tail(SUBCRITICAL, 0.5)
        self.assertAlmostEqual(sigma_window_mass(SUBCRITICAL, 0.1, 0.5), expected)
        self.assertEqual(sigma_window_mass(SUBCRITICAL, 0.1), sigma_tail(SUBCRITICAL, 0.1))
        with self.assertRaises(DomainError):
            sigma_window_mass(SUBCRITICAL, 0.5, 0.1)

    def test_supercritical_rejected(self):
        """测试超临界机制没有有限的质量律"""
        with self.assertRaises(DomainError):
            sample_sigma(BranchingMechanism(alpha=-1.0, beta=1.0), 0.1, RngStream(1))

    def test_forest_mass(self):
        """测试森林总质量的均值为 x/α"""
        rng = RngStream(12)
        draws = np.array([sample_forest_mass(SUBCRITICAL, 1.0, rng) for _ in range(4000)])
        within(self, draws, 0.5)


class TestPaths(unittest.TestCase):
    """高度过程与游程"""

    def test_excursion_length(self):
        """测试游程的长度恰为 σ"""
        f = sample_excursion(0.37, 1.0, 0.01, RngStream(2))
        self.assertAlmostEqual(f.sigma, 0.37)
        self.assertEqual(f.values[0], 0.0)
        self.assertEqual(f.values[-1], 0.0)

    def test_step_too_coarse(self):
        """测试步长超过上限"""
        with self.assertRaises(StepTooCoarseError):
            sample_forest(SUBCRITICAL, 1.0, 0.1, RngStream(1))

    def test_deterministic(self):
        """测试相同的种子和流给出相同的森林"""
        a = sample_forest(SUBCRITICAL, 1.0, 0.005, RngStream(5, 3))
        b = sample_forest(SUBCRITICAL, 1.0, 0.005, RngStream(5, 3))
        self.assertEqual(a.sigma, b.sigma)
        self.assertEqual(a.h_max, b.h_max)
        self.assertEqual(a.tree.n_nodes, b.tree.n_nodes)

    def test_forest_height_matches_forest(self):
        """测试单独计算的高度与整棵森林一致"""
        tree = sample_forest(SUBCRITICAL, 1.0, 0.005, RngStream(6)).tree
        self.assertAlmostEqual(forest_height(SUBCRITICAL, 1.0, 0.005, RngStream(6)), tree.h_max, places=9)

    def test_forest_exit_probability(self):
        """测试 P(H_max ≤ h) = exp(−x b(h))"""
        m = BranchingMechanism(alpha=1.0, beta=1.0)
        rng = RngStream(7)
        hits = np.array([forest_height(m, 1.0, 0.001, rng, cap=1.0) <= 1.0 for _ in range(300)], dtype=float)
        self.assertAlmostEqual(hits.mean(), math.exp(-extinction(m, 1.0)), delta=0.1)

    def test_sample_tree(self):
        """测试抽到的树质量不小于 ε"""
        sample = sample_tree(SUBCRITICAL, 0.2, 0.01, RngStream(8))
        self.assertFalse(sample.is_infinite)
        self.assertGreaterEqual(sample.sigma, 0.2 - 1e-12)


class TestGraft(unittest.TestCase):
    """嫁接测度"""

    def test_weights(self):
        """测试 q = 0 时临界机制没有无限嫁接"""
        infinite, finite = graft_weights(CRITICAL, 0.0, 0.1)
        self.assertEqual(infinite, 0.0)
        self.assertAlmostEqual(finite, 2.0 * sigma_tail(CRITICAL, 0.1))

    def test_infinite_graft(self):
        """测试 q < 0 时会抽到无限树"""
        rng = RngStream(9)
        samples = [sample_graft(CRITICAL, -1.0, 0.5, 0.01, rng) for _ in range(200)]
        self.assertTrue(any(s.is_infinite for s in samples))

    def test_requires_critical(self):
        """测试嫁接测度只对临界机制定义"""
        with self.assertRaises(DomainError):
            graft_weights(SUBCRITICAL, 0.0, 0.1)


class TestCsbp(unittest.TestCase):
    """CSBP"""

    def test_laplace(self):
        """测试 E[exp(−λZ_a)] = exp(−z u(a,λ))"""
        m = BranchingMechanism(alpha=1.0, beta=1.0)
        rng = RngStream(10)
        values = np.array([sample_csbp(m, 1.0, [1.0], rng)[0] for _ in range(4000)])
        self.assertAlmostEqual(np.exp(-values).mean(), math.exp(-cumulant(m, 1.0, 1.0)), delta=0.04)
        within(self, values, math.exp(-1.0))

    def test_absorption(self):
        """测试 0 是吸收态"""
        path = sample_csbp(SUBCRITICAL, 0.0, [0.5, 1.0, 2.0], RngStream(1))
        np.testing.assert_array_equal(path, np.zeros(3))

    def test_grid(self):
        """测试网格起点和单调性"""
        path = sample_csbp(SUBCRITICAL, 2.0, [0.0, 0.1], RngStream(1))
        self.assertEqual(path[0], 2.0)
        with self.assertRaises(DomainError):
            sample_csbp(SUBCRITICAL, 1.0, [1.0, 0.5], RngStream(1))

    def test_non_quadratic_uses_inversion(self):
        """测试没有精确抽样能力的机制：二次参数报错，CSBP 走数值反演"""
        m = BranchingMechanism(alpha=1.0, beta=0.5, levy=AtomsMeasure(((0.5, 1.0),)))
        with self.assertRaises(DomainError):
            quadratic_parameters(m)
        path = sample_csbp(m, 1.0, [0.0, 0.5], RngStream(2))
        self.assertEqual(path[0], 1.0)
        self.assertTrue(math.isfinite(path[1]) and path[1] >= 0.0)

    def test_stehfest_weights(self):
        """测试 Stehfest 权重之和为 0"""
        weights = stehfest_weights(14)
        self.assertAlmostEqual(weights.sum() / np.abs(weights).max(), 0.0, places=8)
        with self.assertRaises(ValueError):
            stehfest_weights(13)

    def test_transition_cdf(self):
        """测试转移分布函数在 0 处等于灭绝概率并单调"""
        m = BranchingMechanism(alpha=1.0, beta=1.0)
        self.assertAlmostEqual(transition_cdf(m, 1.0, 1.0, 0.0), math.exp(-extinction(m, 1.0)))
        values = [transition_cdf(m, 1.0, 1.0, y) for y in (0.2, 1.0, 5.0)]
        self.assertLessEqual(values[0], values[1] + 1e-6)
        self.assertLessEqual(values[1], values[2] + 1e-6)
        self.assertAlmostEqual(values[2], 1.0, delta=1e-3)


if __name__ == "__main__":
    unittest.main()

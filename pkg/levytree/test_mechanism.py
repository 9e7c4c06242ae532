"""
分支机制数值演算单元测试
"""

import math
import unittest

import numpy as np
from scipy import integrate

from levytree.errors import ConfigError, DomainError, NoRootError
from levytree.mechanism import (
    AtomsMeasure,
    BranchingMechanism,
    Capability,
    StableMeasure,
    TabulatedMeasure,
    ascension_tail,
    cumulant,
    describe_mechanism,
    evaluate,
    exit_density,
    exit_given_ascension,
    exit_tail,
    extinction,
    forest_ascension_cdf,
    forest_exit_cdf,
    gamma,
    invert,
    level_derivative,
    parse_mechanism,
    pure_stable_mechanism,
    shift,
    sigma_laplace,
    sigma_mean,
    spine_cdf,
    spine_density,
    theta_bar,
    theta_window,
)
from levytree.mechanism.exits import (
    quadratic_cumulant,
    quadratic_exit_density,
    quadratic_extinction,
    quadratic_p_eq,
    quadratic_p_geq,
    weighted_spine_law,
)

QUADRATIC = BranchingMechanism(alpha=0.0, beta=1.0)
STABLE = pure_stable_mechanism(1.5)
TEMPERED = pure_stable_mechanism(1.5, tempering=1.0)


def b_theta(m, theta, h):
    return extinction(shift(m, theta), h)


class TestEvaluate(unittest.TestCase):
    """ψ 求值与构造检查"""

    def test_quadratic_values(self):
        """测试二次机制的函数值和导数"""
        self.assertEqual(evaluate(QUADRATIC, 2.0, 0), 4.0)
        self.assertEqual(evaluate(QUADRATIC, 3.0, 1), 6.0)
        self.assertEqual(evaluate(QUADRATIC, 3.0, 2), 2.0)

    def test_calibrated_stable(self):
        """测试校准后的稳定机制 ψ(λ) = λ^{3/2}"""
        self.assertAlmostEqual(evaluate(STABLE, 4.0, 0), 8.0, delta=8e-10)
        self.assertAlmostEqual(evaluate(STABLE, 4.0, 1), 3.0, delta=3e-10)
        self.assertAlmostEqual(evaluate(STABLE, 0.0, 1), 0.0, delta=1e-12)
        self.assertTrue(STABLE.critical)

    def test_domain_error_below_theta_inf(self):
        """测试 λ 低于 θ_∞ 时报错"""
        with self.assertRaises(DomainError):
            evaluate(STABLE, -0.5, 0)
        with self.assertRaises(DomainError):
            evaluate(TEMPERED, -1.0, 2)

    def test_boundary_rule(self):
        """测试 λ = θ_∞ 处：ψ 有定义，ψ' 仅当 θ_∞ ∈ Θ^ψ，ψ'' 报错"""
        self.assertAlmostEqual(evaluate(STABLE, 0.0), 0.0, delta=1e-12)
        with self.assertRaises(DomainError):
            evaluate(STABLE, 0.0, 2)
        grid = tuple((r, 0.7 * r**-2.5) for r in np.geomspace(0.05, 20.0, 12))
        table = TabulatedMeasure(grid=grid, left_index=1.5, right_index=0.5, right_rate=1.0)
        m = BranchingMechanism(alpha=1.0, beta=1.0, levy=table)
        self.assertFalse(m.window.boundary_member)
        with self.assertRaises(DomainError):
            evaluate(m, -1.0, 1)

    def test_construction_checks(self):
        """测试构造时检查 Grey 条件与 β ≥ 0"""
        with self.assertRaises(DomainError):
            BranchingMechanism(alpha=0.0, beta=0.0, levy=AtomsMeasure(((0.5, 1.0),)))
        with self.assertRaises(DomainError):
            BranchingMechanism(alpha=0.0, beta=-1.0)
        BranchingMechanism(alpha=0.0, beta=1.0, levy=AtomsMeasure(((0.5, 1.0), (2.0, 0.5))))

    def test_theta_window(self):
        """测试 Θ^ψ 的成员判断与单调性"""
        self.assertTrue(theta_window(QUADRATIC).member(-100.0))
        window = theta_window(STABLE)
        self.assertEqual(window.theta_inf, 0.0)
        self.assertTrue(window.member(0.0))
        self.assertFalse(window.member(-0.1))
        self.assertTrue(theta_window(TEMPERED).member(-0.5))

    def test_capabilities(self):
        """测试变体的能力集合"""
        self.assertTrue(QUADRATIC.levy.has_capability(Capability.SAMPLER_EXACT))
        self.assertTrue(QUADRATIC.levy.has_capability(Capability.TILT_BELOW_ZERO))
        self.assertTrue(QUADRATIC.is_quadratic)
        self.assertFalse(STABLE.levy.has_capability(Capability.TILT_BELOW_ZERO))
        self.assertTrue(TEMPERED.levy.has_capability(Capability.TILT_BELOW_ZERO))
        self.assertFalse(TEMPERED.is_quadratic)
        atoms = AtomsMeasure(((0.5, 1.0),))
        self.assertEqual(atoms.capabilities, {Capability.TILT_BELOW_ZERO})

    def test_atoms_integral_matches_quadrature(self):
        """测试原子测度积分项与逐项求和一致"""
        atoms = AtomsMeasure(((0.5, 2.0), (3.0, 0.25)))
        lam = 1.7
        expected = 2.0 * (math.exp(-lam * 0.5) - 1 + lam * 0.5) + 0.25 * (math.exp(-lam * 3.0) - 1)
        self.assertAlmostEqual(atoms.integral(lam, 0), expected, places=14)


class TestTabulated(unittest.TestCase):
    """表格化测度：幂律网格与稳定闭式一致"""

    def setUp(self):
        self.stable = StableMeasure(index=1.5, scale=0.7)
        grid = tuple((r, 0.7 * r**-2.5) for r in np.geomspace(0.05, 20.0, 12))
        self.table = TabulatedMeasure(grid=grid, left_index=1.5, right_index=1.5)

    def test_integral_matches_stable(self):
        """测试纯幂律网格的积分项等于稳定闭式"""
        for lam in (0.3, 1.0, 4.0):
            for order in (0, 1, 2):
                expected = self.stable.integral(lam, order)
                self.assertAlmostEqual(self.table.integral(lam, order), expected, delta=1e-8 * max(1.0, abs(expected)))

    def test_tilt_matches_stable(self):
        """测试倾斜后的表格测度等于调和稳定测度"""
        tilted = self.table.tilt(0.5)
        self.assertEqual(tilted.theta_inf, -0.5)
        expected = self.stable.tilt(0.5).integral(1.2, 0)
        self.assertAlmostEqual(tilted.integral(1.2, 0), expected, delta=1e-8)

    def test_flags(self):
        """测试可积性判据"""
        self.assertTrue(self.table.boundary_conservative())
        self.assertTrue(self.table.small_jumps_unbounded())
        self.assertEqual(self.table.growth_index(), 1.5)
        self.assertAlmostEqual(self.table.leading_coefficient(), self.stable.leading_coefficient(), places=10)


class TestShiftAndInvert(unittest.TestCase):
    """倾斜、反函数与共轭"""

    def test_shift_quadratic(self):
        """测试 ψ_1(1) = 3"""
        self.assertAlmostEqual(evaluate(shift(QUADRATIC, 1.0), 1.0), 3.0, places=14)
        self.assertIs(shift(QUADRATIC, 0.0), QUADRATIC)

    def test_shift_identity(self):
        """测试 ψ_θ(λ) = ψ(λ+θ) − ψ(θ)"""
        for m, theta in ((QUADRATIC, -0.7), (STABLE, 0.5), (TEMPERED, -0.5)):
            shifted = shift(m, theta)
            for lam in (0.1, 0.5, 1.0, 3.0):
                expected = evaluate(m, lam + theta) - evaluate(m, theta)
                self.assertAlmostEqual(evaluate(shifted, lam), expected, delta=1e-10 * max(1.0, abs(expected)))

    def test_shift_composition(self):
        """测试 shift(shift(m,θ1),θ2) = shift(m,θ1+θ2)"""
        for m in (QUADRATIC, TEMPERED):
            twice = shift(shift(m, 0.4), -0.6)
            once = shift(m, -0.2)
            for lam in np.linspace(0.0, 4.0, 9):
                self.assertAlmostEqual(evaluate(twice, lam), evaluate(once, lam), delta=1e-10 * max(1.0, lam**2))

    def test_shift_outside_window(self):
        """测试 θ ∉ Θ^ψ 时报错"""
        with self.assertRaises(DomainError):
            shift(STABLE, -0.1)

    def test_theta_bar(self):
        """测试共轭 θ̄"""
        self.assertAlmostEqual(theta_bar(QUADRATIC, -2.0), 2.0, places=12)
        self.assertEqual(theta_bar(QUADRATIC, 3.0), 3.0)
        self.assertEqual(invert(QUADRATIC, 4.0)["theta_star"], 0.0)
        self.assertAlmostEqual(invert(QUADRATIC, 4.0)["psi_inverse"], 2.0, places=12)

    def test_theta_star_by_criticality(self):
        """测试超临界、次临界机制的 θ*"""
        self.assertAlmostEqual(invert(shift(QUADRATIC, -1.0), 0.0)["theta_star"], 1.0, places=12)
        self.assertIsNone(invert(shift(QUADRATIC, 1.0), 0.0)["theta_star"])

    def test_no_root(self):
        """测试 v 低于最小值时报错"""
        with self.assertRaises(NoRootError):
            invert(shift(QUADRATIC, -1.0), -2.0)

    def test_conservative_root(self):
        """测试 ψ_q^{-1}(0) = q̄ − q"""
        for m, q in ((QUADRATIC, -1.0), (QUADRATIC, -0.3), (TEMPERED, -0.5)):
            root = sigma_laplace(shift(m, q), 0.0)
            self.assertAlmostEqual(root, theta_bar(m, q) - q, delta=1e-10)
        self.assertAlmostEqual(ascension_tail(QUADRATIC, -0.5), 1.0, places=12)


class TestCumulantAndExtinction(unittest.TestCase):
    """累积量 u(a,λ) 与灭绝函数 b(h)"""

    def test_examples(self):
        """测试累积量与灭绝函数的解析值"""
        self.assertEqual(cumulant(QUADRATIC, 0.0, 1.3), 1.3)
        self.assertAlmostEqual(cumulant(QUADRATIC, 1.0, 1.0), 0.5, delta=5e-10)
        self.assertAlmostEqual(cumulant(shift(QUADRATIC, 1.0), math.log(2.0), 2.0), 2.0 / 7.0, delta=3e-10)
        self.assertAlmostEqual(extinction(QUADRATIC, 2.0), 0.5, delta=5e-10)
        self.assertAlmostEqual(extinction(shift(QUADRATIC, 1.0), math.log(2.0)), 2.0 / 3.0, delta=7e-10)
        self.assertAlmostEqual(extinction(STABLE, 2.0), 1.0, delta=1e-9)
        self.assertAlmostEqual(extinction(QUADRATIC, 2.0, 1.0), 1.0, delta=1e-9)

    def test_negative_time(self):
        """测试负的 a 报错"""
        with self.assertRaises(DomainError):
            cumulant(QUADRATIC, -1.0, 1.0)

    def test_quadratic_grid(self):
        """测试二次机制网格上与闭式一致"""
        for theta in (0.25, 0.5, 1.0, 2.0):
            m = shift(QUADRATIC, theta)
            for t in (0.1, 0.5, 1.0, 2.0):
                b = quadratic_extinction(1.0, theta, t)
                self.assertLess(abs(extinction(m, t) - b) / b, 1e-8)
                for lam in (0.5, 1.0, 2.0, 4.0):
                    u = quadratic_cumulant(1.0, theta, t, lam)
                    self.assertLess(abs(cumulant(m, t, lam) - u) / u, 1e-8)

    def test_flow_and_level_identity(self):
        """测试半群性质与 u(a, b(h−a)) = b(h)"""
        for m in (QUADRATIC, shift(QUADRATIC, -0.5), TEMPERED, shift(TEMPERED, -0.4)):
            self.assertAlmostEqual(cumulant(m, 0.7, cumulant(m, 0.4, 2.0)), cumulant(m, 1.1, 2.0), delta=1e-8)
            for a in (0.25, 0.5, 0.9):
                self.assertAlmostEqual(cumulant(m, a, extinction(m, 1.0 - a)), extinction(m, 1.0), delta=1e-8)

    def test_conjugacy(self):
        """测试 θ̄ + b^θ̄(h) = θ + b^θ(h) 与 ψ_θ̄(b^θ̄) = ψ_θ(b^θ)"""
        for m, theta in ((QUADRATIC, -1.0), (QUADRATIC, -0.25), (TEMPERED, -0.5), (TEMPERED, -0.2)):
            bar = theta_bar(m, theta)
            for h in (0.5, 1.0, 2.0):
                left = bar + b_theta(m, bar, h)
                right = theta + b_theta(m, theta, h)
                self.assertAlmostEqual(left, right, delta=1e-8)
                psi_bar = evaluate(shift(m, bar), b_theta(m, bar, h))
                psi_theta = evaluate(shift(m, theta), b_theta(m, theta, h))
                self.assertAlmostEqual(psi_bar, psi_theta, delta=1e-8)

    def test_level_derivative(self):
        """测试 ∂_λ u^θ(a, b^θ(h−a)) 与有限差分一致"""
        for m, theta in ((QUADRATIC, 0.5), (TEMPERED, -0.3)):
            m_theta = shift(m, theta)
            a, h, d = 0.4, 1.0, 1e-5
            lam = extinction(m_theta, h - a)
            fd = (cumulant(m_theta, a, lam + d) - cumulant(m_theta, a, lam - d)) / (2 * d)
            self.assertAlmostEqual(level_derivative(m, theta, a, h), fd, delta=1e-5)


class TestGamma(unittest.TestCase):
    """γ_θ"""

    def test_values(self):
        """测试 γ_θ 的解析值"""
        self.assertEqual(gamma(QUADRATIC, 0.3, 0.0), 0.0)
        self.assertAlmostEqual(gamma(QUADRATIC, -0.7, 1.5), 3.0, places=12)
        self.assertAlmostEqual(gamma(STABLE, 1.0, 1.0), 1.5 * (math.sqrt(2.0) - 1.0), places=9)
        self.assertAlmostEqual(gamma(STABLE, 1.0, 3.0), 1.5, places=9)

    def test_monotone(self):
        """测试 γ_θ 非负且单调不减"""
        for m, theta in ((STABLE, 0.2), (TEMPERED, -0.5)):
            values = [gamma(m, theta, lam) for lam in np.linspace(0.0, 5.0, 21)]
            self.assertGreaterEqual(min(values), 0.0)
            self.assertTrue(all(b >= a for a, b in zip(values, values[1:])))


class TestExitLaws(unittest.TestCase):
    """退出时间与上升时间"""

    def test_exit_density_quadratic(self):
        """测试二次机制退出密度 ≈ 0.41103"""
        value = exit_density(QUADRATIC, 1.0, 1.0)
        self.assertAlmostEqual(value, 0.41103, delta=1e-5)
        self.assertAlmostEqual(value, quadratic_exit_density(1.0, 1.0, 1.0), delta=1e-9)

    def test_exit_density_forms_agree(self):
        """测试两种表达式一致并与有限差分一致"""
        for m in (QUADRATIC, TEMPERED):
            for theta in (-0.5, 0.5, 2.0):
                for h in (0.5, 1.0, 2.0):
                    level = exit_density(m, theta, h, form="level")
                    spine = exit_density(m, theta, h, form="spine")
                    self.assertLess(abs(level - spine) / level, 1e-6)
                    d = 1e-4
                    fd = (b_theta(m, theta - d, h) - b_theta(m, theta + d, h)) / (2 * d)
                    self.assertLess(abs(level - fd) / level, 1e-5)

    def test_exit_density_window(self):
        """测试密度在窗口上的积分等于 b^{θ1} − b^{θ2}"""
        total, _ = integrate.quad(lambda t: exit_density(QUADRATIC, t, 1.0), 0.5, 1.5, epsabs=1e-10)
        expected = b_theta(QUADRATIC, 0.5, 1.0) - b_theta(QUADRATIC, 1.5, 1.0)
        self.assertAlmostEqual(total, expected, delta=1e-8)

    def test_exit_density_tail(self):
        """测试 θ 增大时密度趋于 0"""
        values = [exit_density(STABLE, theta, 1.0) for theta in (1.0, 4.0, 16.0, 64.0)]
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))
        self.assertLess(values[-1], 1e-3)

    def test_forest_laws(self):
        """测试森林的上升与退出分布及质量均值"""
        self.assertAlmostEqual(ascension_tail(QUADRATIC, -1.0), 2.0, delta=1e-9)
        self.assertAlmostEqual(forest_ascension_cdf(QUADRATIC, 1.0, -1.0), math.exp(-2.0), delta=1e-9)
        self.assertAlmostEqual(forest_ascension_cdf(QUADRATIC, 1.0, 0.5), 1.0)
        tail = exit_tail(QUADRATIC, 1.0, 1.0)
        self.assertAlmostEqual(tail, quadratic_extinction(1.0, 1.0, 1.0), delta=1e-7)
        self.assertAlmostEqual(forest_exit_cdf(QUADRATIC, 2.0, 1.0, 1.0), math.exp(-2.0 * tail), delta=1e-9)
        self.assertTrue(math.isinf(sigma_mean(QUADRATIC)))
        self.assertAlmostEqual(sigma_mean(shift(QUADRATIC, 1.0)), 0.5, delta=1e-9)

    def test_requires_critical(self):
        """测试非临界机制报错"""
        with self.assertRaises(DomainError):
            exit_density(shift(QUADRATIC, 1.0), 0.5, 1.0)

    def test_exit_given_ascension_quadratic(self):
        """测试给定上升时间的退出律与闭式一致"""
        result = exit_given_ascension(QUADRATIC, -1.0, -1.0, 1.0)
        self.assertAlmostEqual(result["p_eq"], 0.58898, delta=1e-5)
        self.assertAlmostEqual(result["p_eq"], quadratic_p_eq(1.0, -1.0, 1.0), delta=1e-8)
        self.assertAlmostEqual(result["p_eq"], result["p_eq_conjugate"], delta=1e-8)
        self.assertAlmostEqual(result["p_geq"] + result["p_eq"], 1.0, delta=1e-8)
        self.assertAlmostEqual(result["p_geq"], 0.41102, delta=1e-5)
        later = exit_given_ascension(QUADRATIC, -1.0, 0.5, 1.0)
        self.assertAlmostEqual(later["p_geq"], quadratic_p_geq(1.0, -1.0, 0.5, 1.0), delta=1e-8)
        self.assertNotIn("p_asc_given_exit", later)

    def test_p_eq_large_h(self):
        """测试 h → ∞ 时 p_eq → 1"""
        values = [exit_given_ascension(QUADRATIC, -1.0, -1.0, h)["p_eq"] for h in (1.0, 4.0, 16.0)]
        self.assertTrue(all(b > a for a, b in zip(values, values[1:])))
        self.assertGreater(values[-1], 0.9)

    def test_ascension_given_exit(self):
        """测试 N[A = A_h | A_h = θ] 在 (0,1] 内，且 c 等于 θ0 = θ 时的 p_eq"""
        result = exit_given_ascension(TEMPERED, -0.5, -0.5, 1.0)
        self.assertAlmostEqual(result["c"], result["p_eq"], delta=1e-8)
        self.assertGreater(result["p_asc_given_exit"], 0.0)
        self.assertLessEqual(result["p_asc_given_exit"], 1.0)


class TestSpineDensity(unittest.TestCase):
    """脊高度密度"""

    def test_normalized(self):
        """测试密度积分为 1"""
        total, _ = integrate.quad(lambda t: spine_density(QUADRATIC, 1.0, 1.0, t), 0.0, 1.0, limit=200)
        self.assertAlmostEqual(total, 1.0, delta=1e-6)
        self.assertAlmostEqual(spine_cdf(QUADRATIC, 1.0, 1.0, 0.999999), 1.0, delta=1e-6)

    def test_value_at_zero(self):
        """测试 f(0) = 2b^1(1) = 4/(e²−1)"""
        self.assertAlmostEqual(spine_density(QUADRATIC, 1.0, 1.0, 0.0), 4.0 / (math.e**2 - 1.0), delta=1e-9)

    def test_weight_integrable(self):
        """测试 θ < 0 时 E[e^{−ψ'(θ)ξ}] 有限"""
        _, cdf, norm = weighted_spine_law(QUADRATIC, -0.5, 1.0)
        self.assertTrue(math.isfinite(norm))
        self.assertGreater(norm, 1.0)
        self.assertAlmostEqual(cdf[-1], 1.0, places=12)


class TestRegistry(unittest.TestCase):
    """机制文本格式"""

    def test_parse_quadratic(self):
        """测试解析二次机制"""
        m = parse_mechanism("quadratic alpha=0 beta=1")
        self.assertEqual(m, QUADRATIC)
        self.assertEqual(describe_mechanism(m), "quadratic alpha=0 beta=1")

    def test_round_trip(self):
        """测试描述后再解析得到相同机制"""
        for text in (
            "stable alpha=0.5 beta=0 index=1.5 scale=0.25",
            "atoms alpha=1 beta=0.5 atoms=0.5:2,3:0.25",
            "tabulated alpha=0 beta=1 grid=0.1:10,1:1,10:0.01 left=1.2 right=1.5 rate=0.5",
        ):
            m = parse_mechanism(text)
            self.assertEqual(parse_mechanism(describe_mechanism(m)), m)

    def test_critical_alpha(self):
        """测试 alpha=critical 与校准稳定机制"""
        m = parse_mechanism("stable alpha=critical beta=0 index=1.5 scale=calibrated")
        self.assertTrue(m.critical)
        self.assertAlmostEqual(evaluate(m, 4.0), 8.0, delta=1e-9)

    def test_errors(self):
        """测试格式错误时抛出 ConfigError"""
        for text in ("", "cubic alpha=0 beta=1", "quadratic beta", "stable alpha=0 beta=0", "atoms alpha=0 beta=0 atoms=1:1"):
            with self.assertRaises(ConfigError):
                parse_mechanism(text)


if __name__ == "__main__":
    unittest.main()

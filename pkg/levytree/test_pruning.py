"""
剪枝与分解单元测试
"""

import unittest

import numpy as np

from levytree.errors import InvalidLocationError, MarkRangeError
from levytree.pruning import MarkMeasure, decompose, increasing_marks, prune_at, prune_with_marks, sample_marks
from levytree.rng import RngStream
from levytree.sampler import sample_excursion
from levytree.wtree import WTree, from_excursion, graft, summary


def random_tree(seed: int) -> WTree:
    return from_excursion(sample_excursion(1.0, 1.0, 0.01, RngStream(seed)))


def assert_same_shape(case: unittest.TestCase, a: WTree, b: WTree) -> None:
    for key, value in summary(a).items():
        case.assertAlmostEqual(value, summary(b)[key], places=9, msg=key)


class TestMarks(unittest.TestCase):
    """标记"""

    def test_mark_range(self):
        """测试标记值必须在 [0, θ_max] 内"""
        with self.assertRaises(MarkRangeError):
            MarkMeasure(1.0, np.array([1]), np.array([0.5]), np.array([1.5]))
        with self.assertRaises(MarkRangeError):
            MarkMeasure(1.0, node_marks={1: (2.0,)})

    def test_sample_marks_inside_edges(self):
        """测试抽到的骨架标记严格位于边内"""
        t = random_tree(1)
        marks = sample_marks(t, 1.0, 5.0, RngStream(2))
        marks.check(t)
        self.assertGreater(marks.n_skeleton, 0)
        self.assertTrue(np.all(marks.ske_theta <= 5.0))

    def test_marks_on_missing_edge(self):
        """测试标记不在树上时报错"""
        marks = MarkMeasure(1.0, np.array([3]), np.array([0.1]), np.array([0.5]))
        with self.assertRaises(InvalidLocationError):
            prune_at(WTree.segment(1.0), marks, 0.5)


class TestPrune(unittest.TestCase):
    """Λ_θ"""

    def setUp(self):
        self.tree = WTree.segment(2.0, weight=1.0, offset=1.5)
        self.marks = MarkMeasure(1.0, np.array([1]), np.array([1.0]), np.array([0.5]))

    def test_identity_at_zero(self):
        """测试 Λ_0 是恒等映射"""
        self.assertIs(prune_at(self.tree, self.marks, 0.0), self.tree)

    def test_skeleton_cut(self):
        """测试骨架标记处的切断"""
        pruned = prune_at(self.tree, self.marks, 0.7)
        self.assertAlmostEqual(pruned.h_max, 1.0)
        self.assertEqual(pruned.sigma, 0.0)
        self.assertAlmostEqual(prune_at(self.tree, self.marks, 0.3).h_max, 2.0)

    def test_theta_above_range(self):
        """测试 θ 超出标记范围时报错"""
        with self.assertRaises(MarkRangeError):
            prune_at(self.tree, self.marks, 1.5)

    def test_node_mark(self):
        """测试无限节点上的标记去掉该节点的全部后代"""
        t = WTree([-1, 0, 1, 1], [0.0, 1.0, 1.0, 2.0], [2, 3], [1.0, 2.0], [1.0, 1.0], {1: 3.0})
        marks = MarkMeasure(1.0, node_marks={1: (0.2,)})
        pruned = prune_at(t, marks, 0.5)
        self.assertEqual(pruned.n_nodes, 2)
        self.assertAlmostEqual(pruned.h_max, 1.0)
        self.assertEqual(pruned.sigma, 0.0)

    def test_monotone(self):
        """测试剪枝树随 θ 单调缩小"""
        t = random_tree(3)
        marks = sample_marks(t, 1.0, 4.0, RngStream(4))
        previous = t
        for theta in (0.5, 1.0, 2.0, 4.0):
            pruned = prune_at(t, marks, theta)
            self.assertLessEqual(pruned.sigma, previous.sigma + 1e-12)
            self.assertLessEqual(pruned.total_length, previous.total_length + 1e-12)
            self.assertLessEqual(pruned.h_max, previous.h_max + 1e-12)
            previous = pruned

    def test_cocycle(self):
        """测试 Λ_θ2 ∘ Λ_θ1 = Λ_{θ1+θ2}"""
        t = random_tree(5)
        marks = sample_marks(t, 1.0, 3.0, RngStream(6))
        pruned, rest = prune_with_marks(t, marks, 1.0)
        assert_same_shape(self, prune_at(pruned, rest, 0.8), prune_at(t, marks, 1.8))

    def test_increasing_marks_prune_the_same(self):
        """测试只保留递增标记不改变剪枝结果"""
        t = random_tree(7)
        marks = sample_marks(t, 1.0, 3.0, RngStream(8))
        reduced = increasing_marks(t, marks)
        self.assertLessEqual(reduced.n_skeleton, marks.n_skeleton)
        for theta in (0.3, 1.0, 2.5):
            assert_same_shape(self, prune_at(t, reduced, theta), prune_at(t, marks, theta))


class TestDecompose(unittest.TestCase):
    """剪枝分解"""

    def test_reassembly(self):
        """测试剪枝树嫁接回切下的子树后还原原树"""
        t = random_tree(9)
        marks = sample_marks(t, 1.0, 2.0, RngStream(10))
        parts = decompose(t, marks, 1.5)
        self.assertTrue(parts["grafts"])
        rebuilt = graft(parts["pruned"], [(g["tree"], g["location"]) for g in parts["grafts"]])
        assert_same_shape(self, rebuilt, t)
        for g in parts["grafts"]:
            self.assertLessEqual(g["theta"], 1.5)

    def test_no_marks(self):
        """测试没有有效标记时不切下任何子树"""
        t = WTree.segment(1.0, weight=1.0)
        parts = decompose(t, MarkMeasure(1.0), 0.5)
        self.assertEqual(parts["grafts"], [])
        assert_same_shape(self, parts["pruned"], t)


if __name__ == "__main__":
    unittest.main()

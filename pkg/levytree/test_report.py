"""
分片合并与报表单元测试
"""

import io
import math
import tempfile
import unittest
from pathlib import Path

from rich.console import Console

from levytree.errors import OutputError, SchemaMismatchError
from levytree.experiments import REPLICATE_COLUMNS, write_csv
from levytree.report import build_report, merge_shards, read_shard, render_table
from levytree.util import mean_and_se


def quiet() -> Console:
    return Console(file=io.StringIO(), width=120)


class TestReport(unittest.TestCase):
    """report 子命令"""

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)

    def shard(self, name: str, values: list[float], target: float | None = 0.5, first: int = 0) -> Path:
        rows = [{"replicate": first + i, "seed": 1, "statistic": "hit", "value": v} for i, v in enumerate(values)]
        header = ["levytree test", "command=tree-sample"]
        if target is not None:
            header.append(f"target hit={target}")
        return write_csv(self.dir / name, REPLICATE_COLUMNS, rows, header)

    def test_read_shard(self):
        """测试读取分片及其解析目标"""
        shard = read_shard(self.shard("a.csv", [1.0, 0.0, 1.0]))
        self.assertEqual(len(shard.rows), 3)
        self.assertEqual(shard.rows[1], {"replicate": 1, "seed": 1, "statistic": "hit", "value": 0.0})
        self.assertEqual(shard.targets, {"hit": 0.5})

    def test_single_shard(self):
        """测试单个分片的汇总等于分片本身的均值与标准误"""
        values = [1.0, 0.0, 1.0, 1.0]
        summary, path = build_report([self.shard("a.csv", values)], self.dir / "out", quiet())
        self.assertTrue(path.exists())
        mean, se = mean_and_se(values)
        self.assertEqual(summary[0]["n"], 4)
        self.assertAlmostEqual(summary[0]["mean"], mean)
        self.assertAlmostEqual(summary[0]["se"], se)
        self.assertEqual(summary[0]["target"], 0.5)
        self.assertTrue(summary[0]["passed"])

    def test_merged_standard_error(self):
        """测试合并 k 个分片后按全部样本重新计算标准误"""
        chunks = [[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 1.0], [0.0, 0.0, 1.0, 0.0]]
        paths = [self.shard(f"s{k}.csv", chunk, first=4 * k) for k, chunk in enumerate(chunks)]
        summary, _ = build_report(paths, self.dir / "out", quiet())
        mean, se = mean_and_se(v for chunk in chunks for v in chunk)
        self.assertEqual(summary[0]["n"], 12)
        self.assertAlmostEqual(summary[0]["mean"], mean)
        self.assertAlmostEqual(summary[0]["se"], se)
        single, _ = build_report(paths[:1], self.dir / "one", quiet())
        self.assertLess(summary[0]["se"], single[0]["se"])

    def test_without_target(self):
        """测试没有目标的统计量不判定通过与否"""
        summary, _ = build_report([self.shard("a.csv", [1.0, 2.0], target=None)], self.dir, quiet())
        self.assertNotIn("passed", summary[0])

    def test_schema_mismatch(self):
        """测试列名不符"""
        path = self.dir / "bad.csv"
        path.write_text("# levytree\nstatistic,n,mean\nhit,1,0.5\n", encoding="utf-8")
        with self.assertRaises(SchemaMismatchError):
            read_shard(path)

    def test_malformed_rows(self):
        """测试字段数或数值不对的行"""
        path = self.dir / "bad.csv"
        path.write_text("replicate,seed,statistic,value\n0,1,hit\n", encoding="utf-8")
        with self.assertRaises(SchemaMismatchError):
            read_shard(path)
        path.write_text("replicate,seed,statistic,value\n0,1,hit,high\n", encoding="utf-8")
        with self.assertRaises(SchemaMismatchError):
            read_shard(path)

    def test_conflicting_targets(self):
        """测试同名目标不一致"""
        shards = [read_shard(self.shard("a.csv", [1.0], 0.5)), read_shard(self.shard("b.csv", [1.0], 0.6))]
        with self.assertRaises(SchemaMismatchError):
            merge_shards(shards)

    def test_inputs(self):
        """测试输入为空或文件不存在"""
        with self.assertRaises(SchemaMismatchError):
            build_report([], self.dir, quiet())
        with self.assertRaises(OutputError):
            read_shard(self.dir / "missing.csv")

    def test_render_table(self):
        """测试表格行数"""
        summary = [{"statistic": "hit", "n": 2, "mean": 0.5, "se": math.nan}]
        table = render_table(summary, title="t")
        self.assertEqual(table.row_count, 1)
        self.assertEqual(len(table.columns), 6)


if __name__ == "__main__":
    unittest.main()

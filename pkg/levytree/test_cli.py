"""
命令行入口单元测试
"""

import tempfile
import unittest
from contextlib import redirect_stdout
from io import StringIO
from pathlib import Path

from levytree.cli import build_parser, main


class TestCli(unittest.TestCase):
    """levytree 命令行"""

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.out = Path(tmp.name)

    def call(self, *argv: str) -> int:
        with redirect_stdout(StringIO()):
            return main([*argv, "--log-level", "ERROR"])

    def test_psi_table(self):
        """测试 psi-table 成功并写出文件"""
        self.assertEqual(self.call("psi-table", "--seed", "1", "--out", str(self.out)), 0)
        self.assertTrue((self.out / "psi_table.csv").exists())
        self.assertTrue((self.out / "psi_table_summary.csv").exists())

    def test_config_file_and_set(self):
        """测试配置文件与 --set 覆盖"""
        config = self.out / "run.cfg"
        config.write_text("seed=5\nthetas=0.5\n", encoding="utf-8")
        code = self.call("psi-table", "--config", str(config), "--set", "lambdas=1,2", "--out", str(self.out))
        self.assertEqual(code, 0)
        text = (self.out / "psi_table.csv").read_text(encoding="utf-8")
        self.assertIn("# lambdas=1,2", text)
        self.assertIn("# seed=5", text)

    def test_config_errors_exit_2(self):
        """测试配置错误返回 2"""
        out = str(self.out)
        self.assertEqual(self.call("tree-sample", "--out", out), 2)
        self.assertEqual(self.call("tree-sample", "--seed", "1", "--replicates", "", "--out", out), 2)
        self.assertEqual(self.call("psi-table", "--seed", "1", "--set", "broken", "--out", out), 2)
        self.assertEqual(self.call("psi-table", "--seed", "1", "--h", "-1", "--out", out), 2)

    def test_missing_shard_exit_3(self):
        """测试分片不存在返回 3"""
        self.assertEqual(self.call("report", str(self.out / "missing.csv"), "--out", str(self.out)), 3)

    def test_report(self):
        """测试合并 tree-sample 的输出"""
        runs = []
        for seed in ("1", "2"):
            out = self.out / f"run{seed}"
            argv = ["tree-sample", "--seed", seed, "--replicates", "3", "--out", str(out)]
            argv += ["--mechanism", "quadratic alpha=2 beta=1", "--theta", "0", "--step", "0.005"]
            self.assertEqual(self.call(*argv), 0)
            runs.append(str(out / "tree_sample.csv"))
        self.assertEqual(self.call("report", *runs, "--out", str(self.out)), 0)
        self.assertTrue((self.out / "report.csv").exists())

    def test_parser(self):
        """测试子命令专属参数"""
        args = build_parser().parse_args(["grow", "--no-drift", "--theta-end", "0.5"])
        self.assertFalse(args.drift)
        self.assertEqual(args.theta_end, "0.5")
        args = build_parser().parse_args(["ghp-dist", "--trees", "a.wtree", "b.wtree"])
        self.assertEqual(args.trees, ["a.wtree", "b.wtree"])
        with redirect_stdout(StringIO()), self.assertRaises(SystemExit):
            build_parser().parse_args(["simulate"])


if __name__ == "__main__":
    unittest.main()

"""
配置管理单元测试
"""

import tempfile
import unittest
from pathlib import Path

from levytree.config_manager import ConfigManager
from levytree.errors import ConfigError


class TestConfigManager(unittest.TestCase):
    """ConfigManager"""

    def write(self, text: str) -> Path:
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        path = Path(tmp.name) / "experiment.cfg"
        path.write_text(text, encoding="utf-8")
        return path

    def test_defaults(self):
        """测试默认值"""
        config = ConfigManager()
        self.assertEqual(config.get_replicates(), 1000)
        self.assertEqual(config.get_float("eps"), 1e-4)
        self.assertFalse(config.get_bool("check"))
        self.assertTrue(config.get_mechanism().critical)

    def test_file_and_overrides(self):
        """测试配置文件与命令行覆盖的优先级"""
        path = self.write("# 注释\nseed = 7\nreplicates=20  # 行尾注释\n\nh=2\n")
        config = ConfigManager(path)
        config.update({"h": 0.5, "check": True, "x": None})
        self.assertEqual(config.get_seed(), 7)
        self.assertEqual(config.get_replicates(), 20)
        self.assertEqual(config.get_float("h"), 0.5)
        self.assertTrue(config.get_bool("check"))
        self.assertEqual(config.get_float("x"), 1.0)

    def test_bad_line(self):
        """测试没有等号的行"""
        with self.assertRaises(ConfigError):
            ConfigManager(self.write("seed 7\n"))

    def test_missing_file(self):
        """测试配置文件不存在"""
        with self.assertRaises(ConfigError):
            ConfigManager("/nonexistent/levytree.cfg")

    def test_seed_mandatory(self):
        """测试种子必须给出且是 64 位无符号整数"""
        config = ConfigManager()
        with self.assertRaises(ConfigError):
            config.get_seed()
        config.update({"seed": -1})
        with self.assertRaises(ConfigError):
            config.get_seed()
        config.update({"seed": 2**64})
        with self.assertRaises(ConfigError):
            config.get_seed()

    def test_invalid_values(self):
        """测试无法解析或越界的取值"""
        config = ConfigManager()
        config.update({"replicates": "", "workers": "0", "h": "high", "check": "maybe", "hs": ","})
        with self.assertRaises(ConfigError):
            config.get_replicates()
        with self.assertRaises(ConfigError):
            config.get_workers()
        with self.assertRaises(ConfigError):
            config.get_float("h")
        with self.assertRaises(ConfigError):
            config.get_bool("check")
        with self.assertRaises(ConfigError):
            config.get_float_list("hs")
        with self.assertRaises(ConfigError):
            config.get_str("nothing")

    def test_float_list(self):
        """测试逗号分隔的列表"""
        config = ConfigManager()
        self.assertEqual(config.get_float_list("thetas"), [0.25, 0.5, 1.0, 2.0])

    def test_serialize_and_rebuild(self):
        """测试规范化输出与工作进程重建"""
        config = ConfigManager()
        config.update({"seed": 3, "eps": 0.001})
        lines = config.serialize()
        self.assertEqual(lines, sorted(lines))
        self.assertIn("eps=0.001", lines)
        rebuilt = ConfigManager.from_values(config.values())
        self.assertEqual(rebuilt.serialize(), lines)
        self.assertEqual(rebuilt.get_seed(), 3)


if __name__ == "__main__":
    unittest.main()

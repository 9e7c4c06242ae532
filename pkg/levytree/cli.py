"""命令行入口

子命令：psi-table、tree-sample、ghp-dist、prune、grow、exit-times、spine、report。
命令行参数覆盖配置文件中的同名键；异常在这里统一记录并转换为退出码。
"""

from __future__ import annotations

import argparse
from collections.abc import Sequence

from rich.console import Console

from levytree.config_manager import ConfigManager
from levytree.errors import ConfigError, LevyTreeError
from levytree.experiments import COMMANDS, run
from levytree.logger import logger, setup_logging
from levytree.report import build_report, render_table
from levytree.util import load_package_version

# 每个选项：(参数名, 配置键, 帮助)
COMMON_OPTIONS = [
    ("--mechanism", "mechanism", "branching mechanism, e.g. 'quadratic alpha=0 beta=1'"),
    ("--replicates", "replicates", "number of replicates"),
    ("--seed", "seed", "64-bit seed (mandatory)"),
    ("--workers", "workers", "worker processes"),
    ("--out", "out", "output directory"),
]

COMMAND_OPTIONS: dict[str, list[tuple[str, str, str]]] = {
    "psi-table": [
        ("--thetas", "thetas", "comma separated θ grid"),
        ("--lambdas", "lambdas", "comma separated λ grid"),
        ("--a", "a", "time of the cumulant column u"),
        ("--h", "h", "height of the extinction column b"),
    ],
    "tree-sample": [
        ("--theta", "theta", "tilt θ of the sampled forest"),
        ("--x", "x", "initial mass"),
        ("--h", "h", "height threshold"),
        ("--step", "step", "height-path step"),
        ("--write-trees", "write_trees", "write the first N trees as wtree files"),
    ],
    "ghp-dist": [
        ("--mode", "mode", "upper or exact_small"),
        ("--exact-limit", "exact_limit", "node and atom limit of exact_small"),
        ("--ghp-step", "ghp_step", "grid of the random excursion pairs"),
        ("--triangles", "triangles", "number of random triangle checks"),
    ],
    "prune": [
        ("--theta", "theta", "pruning parameter θ"),
        ("--x", "x", "initial mass"),
        ("--h", "h", "height threshold"),
        ("--step", "step", "height-path step"),
    ],
    "grow": [
        ("--growth", "growth", "mass or tree"),
        ("--start", "start", "sigma or forest"),
        ("--sigma-start", "sigma_start", "initial mass of a sigma start"),
        ("--theta-start", "theta_start", "first θ of the growth"),
        ("--theta-end", "theta_end", "last θ of the growth"),
        ("--eps", "eps", "mass cutoff of the grafts"),
        ("--x", "x", "initial forest mass"),
        ("--hs", "hs", "comma separated exit heights"),
        ("--step", "step", "height-path step"),
    ],
    "exit-times": [
        ("--theta0", "theta0", "conditioning ascension time θ0"),
        ("--h", "h", "exit height"),
        ("--delta", "delta", "half width of the conditioning window"),
        ("--theta-start", "theta_start", "first θ of the growth"),
        ("--eps", "eps", "mass cutoff of the grafts"),
        ("--x", "x", "initial forest mass"),
        ("--step", "step", "height-path step"),
    ],
    "spine": [
        ("--theta", "theta", "exit time θ"),
        ("--h", "h", "exit height"),
        ("--eps", "eps", "mass cutoff of the grafts"),
        ("--step", "step", "excursion step"),
        ("--delta", "delta", "half width of the cross-check window"),
        ("--theta-start", "theta_start", "first θ of the cross-check growth"),
        ("--x", "x", "initial forest mass of the cross-check"),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levytree", description="ψ-Lévy continuum random tree experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {load_package_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    for command in COMMANDS:
        p = sub.add_parser(command)
        p.add_argument("--config", help="key=value experiment config file")
        p.add_argument("--log-level", default="INFO")
        p.add_argument("--check", action="store_true", default=None, help="exit 5 when a target is missed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
        for flag, key, text in COMMON_OPTIONS + COMMAND_OPTIONS[command]:
            p.add_argument(flag, dest=key, help=text)
        if command == "ghp-dist":
            p.add_argument("--trees", nargs="+", help="wtree files compared pairwise")
        if command == "grow":
            p.add_argument("--no-drift", dest="drift", action="store_false", default=None)
        if command == "spine":
            p.add_argument("--cross-check", dest="cross_check", action="store_true", default=None)

    report = sub.add_parser("report")
    report.add_argument("inputs", nargs="+", help="replicate CSV shards")
    report.add_argument("--out", default="out")
    report.add_argument("--log-level", default="INFO")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, object | None]:
    overrides: dict[str, object | None] = {}
    for _, key, _ in COMMON_OPTIONS + COMMAND_OPTIONS[args.command]:
        overrides[key] = getattr(args, key)
    overrides["check"] = args.check
    for name in ("drift", "cross_check"):
        overrides[name] = getattr(args, name, None)
    if getattr(args, "trees", None):
        overrides["trees"] = ",".join(args.trees)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def main(argv: Sequence[str] | None = None) -> int:
    """运行一个子命令，返回退出码（0 成功，2 配置，3 输入输出，4 数值，5 检查未通过）"""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        if args.command == "report":
            build_report(args.inputs, args.out)
            return 0
        config = ConfigManager(args.config)
        config.update(_overrides(args))
        logger.info(f"开始 {args.command}")
        result = run(args.command, config)
        if result.summary:
            Console().print(render_table(result.summary, title=args.command))
        for row in result.failed:
            logger.warning(f"{row['statistic']} 未达到目标")
        logger.info(f"完成 {args.command}, 产物 {len(result.artifacts)} 个")
        return 0
    except LevyTreeError as e:
        logger.error(f"{args.command} 失败: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} 读写失败: {e}")
        return 3

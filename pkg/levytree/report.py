"""重复实验分片的合并与报表

读取若干个 replicate,seed,statistic,value 格式的 CSV 分片，按统计量汇总重新计算均值与标准误，
写出 report.csv 并用 rich 打印表格。分片文件头里的 `target <statistic>=<value>` 行提供解析目标。
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from rich.console import Console
from rich.table import Table

from levytree.errors import OutputError, SchemaMismatchError
from levytree.experiments import REPLICATE_COLUMNS, SUMMARY_COLUMNS, summarize, write_csv
from levytree.logger import logger
from levytree.types import ReplicateRow, SummaryRow
from levytree.util import format_float, load_package_version


@dataclass
class Shard:
    """一个 CSV 分片"""

    path: Path
    rows: list[ReplicateRow] = field(default_factory=list)
    targets: dict[str, float] = field(default_factory=dict)


def _parse_target(line: str, path: Path) -> tuple[str, float] | None:
    body = line.lstrip("#").strip()
    if not body.startswith("target "):
        return None
    name, sep, value = body[len("target ") :].partition("=")
    if not sep:
        raise SchemaMismatchError(f"{path}: malformed target line {line!r}")
    try:
        return name.strip(), float(value)
    except ValueError as e:
        raise SchemaMismatchError(f"{path}: target {name!r} is not a number") from e


def read_shard(path: str | Path) -> Shard:
    """读取分片，列名必须是 replicate,seed,statistic,value

    Raises:
        OutputError: 文件无法读取
        SchemaMismatchError: 列名不符或数值无法解析
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise OutputError(f"cannot read shard {path}: {e}") from e
    shard = Shard(path)
    data: list[str] = []
    for line in text.splitlines():
        if line.startswith("#"):
            if target := _parse_target(line, path):
                shard.targets[target[0]] = target[1]
        elif line.strip():
            data.append(line)
    reader = csv.reader(data)
    columns = next(reader, None)
    if columns != REPLICATE_COLUMNS:
        raise SchemaMismatchError(f"{path}: expected columns {','.join(REPLICATE_COLUMNS)}, got {columns}")
    for number, record in enumerate(reader, start=2):
        if len(record) != len(REPLICATE_COLUMNS):
            raise SchemaMismatchError(f"{path}: data row {number} has {len(record)} fields")
        try:
            shard.rows.append(
                {"replicate": int(record[0]), "seed": int(record[1]), "statistic": record[2], "value": float(record[3])}
            )
        except ValueError as e:
            raise SchemaMismatchError(f"{path}: data row {number}: {e}") from e
    logger.debug(f"读取分片 {path}: {len(shard.rows)} 行")
    return shard


def merge_shards(shards: Sequence[Shard]) -> tuple[list[ReplicateRow], dict[str, float]]:
    """拼接分片并合并解析目标（同名目标必须一致）"""
    rows: list[ReplicateRow] = []
    targets: dict[str, float] = {}
    for shard in shards:
        rows.extend(shard.rows)
        for name, value in shard.targets.items():
            known = targets.setdefault(name, value)
            if not math.isclose(known, value, rel_tol=1e-12, abs_tol=0.0):
                raise SchemaMismatchError(f"{shard.path}: target {name}={value} differs from {known}")
    return rows, targets


def render_table(summary: Sequence[SummaryRow], title: str = "levytree report") -> Table:
    table = Table(title=title)
    for column in SUMMARY_COLUMNS:
        table.add_column(column, justify="left" if column == "statistic" else "right")
    for row in summary:
        passed = row.get("passed")
        mark = "" if passed is None else ("[green]yes[/green]" if passed else "[red]no[/red]")
        target = row.get("target")
        table.add_row(
            row["statistic"],
            str(row["n"]),
            format_float(row["mean"]),
            format_float(row["se"]),
            "" if target is None else format_float(target),
            mark,
        )
    return table


def build_report(
    inputs: Sequence[str | Path], out: str | Path, console: Console | None = None
) -> tuple[list[SummaryRow], Path]:
    """合并分片，写出 <out>/report.csv 并打印表格

    Returns:
        (汇总行, report.csv 路径)
    """
    if not inputs:
        raise SchemaMismatchError("report needs at least one input shard")
    shards = [read_shard(p) for p in inputs]
    rows, targets = merge_shards(shards)
    summary = summarize(rows, targets)
    header = [f"levytree {load_package_version()}".rstrip(), "command=report"]
    header.extend(f"input={shard.path}" for shard in shards)
    header.extend(f"target {name}={format_float(value)}" for name, value in targets.items())
    path = write_csv(Path(out) / "report.csv", SUMMARY_COLUMNS, summary, header)
    (console or Console()).print(render_table(summary))
    logger.info(f"合并 {len(shards)} 个分片, {len(rows)} 行")
    return summary, path

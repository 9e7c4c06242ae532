"""包级日志

各模块通过 ``from levytree.logger import logger`` 使用同一个 logger。
处理器只在命令行入口调用 setup_logging 时安装。
"""

import logging

from rich.logging import RichHandler

logger = logging.getLogger("levytree")
logger.addHandler(logging.NullHandler())


def setup_logging(level: str = "INFO", rich_console: bool = True) -> None:
    """安装日志处理器（重复调用只调整级别）

    Args:
        level: 日志级别名称，如 "INFO"、"DEBUG"
        rich_console: 是否使用 rich 的彩色控制台输出
    """
    logger.setLevel(level.upper())
    if any(not isinstance(h, logging.NullHandler) for h in logger.handlers):
        return
    if rich_console:
        handler: logging.Handler = RichHandler(show_path=False, rich_tracebacks=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
    else:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)

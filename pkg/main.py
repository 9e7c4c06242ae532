"""levytree 命令行入口

源码目录直接运行：python main.py <子命令> ...
"""

import sys  # noqa: E402
from pathlib import Path  # noqa: E402

repo_dir = Path(__file__).parent.resolve()
if str(repo_dir) not in sys.path:
    sys.path.insert(0, str(repo_dir))

from levytree.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())

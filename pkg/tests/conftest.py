import sys
from pathlib import Path

# 让测试可以直接 import genie_secretary 与 config
PROJECT_ROOT = Path(__file__).parent.parent
for path in (PROJECT_ROOT, PROJECT_ROOT / 'src'):
    if str(path) not in sys.path:
        sys.path.insert(0, str(path))


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: 完整θ网格或大规模模拟，耗时较长')

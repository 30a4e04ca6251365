import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from leoscale.link_dynamics import LinkDynamics  # noqa: E402
import pytest  # noqa: E402


GRID = [0.05 + 0.15 * i for i in range(1, 6)]  # 5 interior points of (0.05, 0.95)


@pytest.fixture
def dyn23():
    return LinkDynamics(0.2, 0.3)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda s: int(s.split()[0])):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")

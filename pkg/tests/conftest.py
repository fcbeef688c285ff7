import numpy as np
import pytest

from mochlab.grid import make_grid
from mochlab.littlewood_paley import build_partition


@pytest.fixture(scope="session")
def grid1024():
    return make_grid(1024)


@pytest.fixture(scope="session")
def part1024(grid1024):
    return build_partition(grid1024)


@pytest.fixture(scope="session")
def grid256():
    return make_grid(256)


@pytest.fixture(scope="session")
def part256(grid256):
    return build_partition(grid256)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> list of (check, passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, list] = {}


@pytest.fixture(scope="session")
def acceptance():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[number]
        verdict = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        detail = "; ".join(f"{name} {'ok' if ok else 'FAIL'} ({info})" for name, ok, info in checks)
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  {detail}")

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import gridrobust  # noqa: E402
from gridrobust import Grid, Line, _backend, bundled_grid  # noqa: E402


@pytest.fixture(params=gridrobust.available_backends())
def backend(request):
    """Run the test once per available kernel backend."""
    previous = _backend.name
    gridrobust.set_backend(request.param)
    yield request.param
    gridrobust.set_backend(previous)


@pytest.fixture(scope="session")
def grid14():
    return bundled_grid()


def two_bus(b=1.0, limit=100.0, attackable=(1,)):
    return Grid(("A", "B"), "A", (Line(1, "A", "B", b, limit),), frozenset(attackable))


def triangle(limits=(100.0, 100.0, 100.0)):
    """Three buses, slack A; lines 1 A-B, 2 B-C, 3 A-C with equal susceptance."""
    lines = (Line(1, "A", "B", 10.0, limits[0]), Line(2, "B", "C", 10.0, limits[1]),
             Line(3, "A", "C", 10.0, limits[2]))
    return Grid(("A", "B", "C"), "A", lines, frozenset({1, 2, 3}),
                base_loads=(("C", 60.0),), base_gens=(("A", 60.0),))


def balanced(grid, rng, scale=100.0):
    p = rng.uniform(-scale, scale, grid.n_buses)
    p[grid.slack_index] -= p.sum()
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting -------------------------------------------------------

ACCEPTANCE_TITLES = {
    1: "weight decay calibration for 10 lines",
    2: "weighted reward identities on random binary scores",
    3: "flow solver and N-1 scores against independent re-solves",
    4: "opponent constraints over 100 seeded episodes",
    5: "opponent sampling distribution",
    6: "baseline ordering on the 24-scenario suite",
    7: "load and smoothed N-1 reward derivative correlation",
    8: "determinism of two identical runs",
}
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {ACCEPTANCE_TITLES[number]} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in ACCEPTANCE_TITLES.items():
        if n in ACCEPTANCE_RESULTS:
            ok, detail = ACCEPTANCE_RESULTS[n]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} ({detail})")
        else:
            terminalreporter.write_line(f"NOT RUN criterion {n}: {title}")

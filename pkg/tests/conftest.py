import time

import pytest
from hypothesis import HealthCheck, settings

from invrob.bicriteria import budget_grid, solve_example_grid

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def example_grid():
    """The 11 x 11 budget grid of the bi-criteria example, solved once per session."""
    grid = budget_grid()
    t0 = time.perf_counter()
    cells = solve_example_grid(grid, workers=1)
    return cells, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

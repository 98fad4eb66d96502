import functools

import pytest
from hypothesis import settings

from simplexot import Grid, make_measure, solve_exact

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def solved(d, r, mu="uniform", nu="uniform"):
    """Exact orbit-reduced solution, cached across the session."""
    g = Grid.build(d, r)
    return solve_exact(make_measure(mu, g), make_measure(nu, g.mirror()))


@pytest.fixture(scope="session")
def solve():
    return solved


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(_ACCEPTANCE[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])

import numpy as np
import pytest

from pathctl.fields import SpaceGrid
from pathctl.problem import ProblemSpec, make_entry
from pathctl.randomness import BrownianPath, TimeGrid, generate_path


def make_spec(dim=1, nu=0.25, N=40, M=81, lower=-4.0, upper=4.0, potential=None, terminal=None, **kw):
    return ProblemSpec(dim, nu, TimeGrid(0.0, 1.0, N), SpaceGrid(dim, lower, upper, M),
                       potential or make_entry("zero"), terminal or make_entry("zero"), **kw)


def still_path(grid, dim=1):
    """A path with no increments: the noise term vanishes identically."""
    return BrownianPath(grid, dim, np.zeros((grid.N + 1, dim)), seed=None)


@pytest.fixture
def quad1d():
    spec = make_spec(N=100, M=101, terminal=make_entry("quadratic"))
    return spec, generate_path(3, spec.horizon, 1)


ACCEPTANCE: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)

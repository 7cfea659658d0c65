import numpy as np
import pytest

from pathctl.closed_form import closed_form_for
from pathctl.errors import ConfigurationError, NumericalRangeError
from pathctl.fields import ScalarField, SpaceGrid
from pathctl.pathwise_value import (METHODS, dpp_residual, hopf_cole_gaussian, hopf_cole_reference, solve,
                                    value_summary)
from pathctl.problem import make_entry
from pathctl.randomness import BrownianPath, TimeGrid, generate_path

from conftest import make_spec


@pytest.mark.parametrize("method", METHODS)
def test_zero_problem(method):
    spec = make_spec()
    vf = solve(spec, generate_path(0, spec.horizon, 1), method)
    assert np.all(vf.values == 0.0)


@pytest.mark.parametrize("method", METHODS)
def test_terminal_exactness(method):
    spec = make_spec(terminal=make_entry("cosine", k=2.0), potential=make_entry("cosine"))
    vf = solve(spec, generate_path(1, spec.horizon, 1), method)
    assert np.array_equal(vf.values[-1], spec.terminal.value(spec.space.points))


@pytest.mark.parametrize("method", METHODS)
def test_linear_closed_form(method):
    spec = make_spec(N=100, M=201, terminal=make_entry("linear", a=0.8))
    path = generate_path(2, spec.horizon, 1)
    s = value_summary(solve(spec, path, method), spec, path)
    assert s["core_error"] < 1e-10


@pytest.mark.parametrize("method", METHODS)
def test_quadratic_closed_form(method, quad1d):
    spec, path = quad1d
    s = value_summary(solve(spec, path, method), spec, path)
    assert s["core_error"] < 0.1


@pytest.mark.parametrize("method", METHODS)
def test_constant_shift(method):
    spec = make_spec(potential=make_entry("cosine"), terminal=make_entry("cosine"))
    path = generate_path(4, spec.horizon, 1)
    a = solve(spec, path, method).values
    b = solve(spec.replace(terminal=make_entry("cosine", offset=2.5)), path, method).values
    assert np.max(np.abs(b - a - 2.5)) < 1e-12


def test_methods_agree(quad1d):
    spec, path = quad1d
    core = (slice(None),) + spec.space.core_slices()
    gap = np.max(np.abs(solve(spec, path, "shift").values[core] - solve(spec, path, "splitting").values[core]))
    assert gap < 0.05


def test_value_depends_on_the_future_of_the_path(quad1d):
    spec, path = quad1d
    k = 50
    vals = path.values.copy()
    vals[k + 1:] += 0.7
    other = BrownianPath(path.grid, 1, vals, seed=None)
    a, b = solve(spec, path).values[k], solve(spec, other).values[k]
    core = spec.space.core_slices()[0]
    assert np.max(np.abs(a[core] - b[core])) > 0.05
    cf = closed_form_for(spec, other)
    assert np.max(np.abs(b[core] - cf.value(k, spec.space.points)[core])) < 0.05


def test_grid_mismatch():
    spec = make_spec(N=40)
    with pytest.raises(ConfigurationError):
        solve(spec, generate_path(0, TimeGrid(0.0, 1.0, 20), 1))
    with pytest.raises(ConfigurationError):
        solve(spec, generate_path(0, spec.horizon, 2))


def test_dpp_trivial_cases():
    spec = make_spec(N=20, M=41)
    path = generate_path(0, spec.horizon, 1)
    assert dpp_residual(solve(spec, path), spec, path, 3, [0.5], 2) == 0.0
    spec = make_spec(N=20, M=41, potential=make_entry("constant", c=0.9))
    vf = solve(spec, path)
    for k, m in [(0, 1), (5, 3), (10, 10)]:
        assert dpp_residual(vf, spec, path, k, [0.3], m) <= 1e-10


def test_dpp_quadratic_consistency(quad1d):
    spec, path = quad1d
    vf = solve(spec, path)
    rng = np.random.default_rng(5)
    res = [dpp_residual(vf, spec, path, int(rng.integers(0, 99)), rng.uniform(-2, 2, 1), 1) for _ in range(20)]
    assert max(res) < 0.02


def test_dpp_bounds():
    spec = make_spec(N=10, M=21)
    path = generate_path(0, spec.horizon, 1)
    with pytest.raises(ConfigurationError):
        dpp_residual(solve(spec, path), spec, path, 8, [0.0], 3)


class TestHeatReference:
    grid = SpaceGrid(1, -6.0, 6.0, 241)
    path = generate_path(7, TimeGrid(0.0, 1.0, 100), 1)

    def test_zero_and_constant(self):
        r = hopf_cole_reference(0.25, self.path, self.grid, ScalarField(self.grid, np.zeros(241)))
        assert np.max(np.abs(r.eta.values - 1.0)) < 1e-12
        assert r.residual <= 1e-10
        r = hopf_cole_reference(0.25, self.path, self.grid, ScalarField(self.grid, np.full(241, 0.4)))
        assert np.max(np.abs(r.eta.values - np.exp(0.4))) < 1e-12

    def test_gaussian(self):
        f = ScalarField.from_function(self.grid, lambda y: -0.5 * y[..., 0] ** 2)
        r = hopf_cole_reference(0.25, self.path, self.grid, f)
        core = self.grid.core_slices()[0]
        exact = hopf_cole_gaussian(0.25, self.path, self.grid)
        assert np.max(np.abs(r.eta.values[:, core] - exact[:, core])) < 1e-5
        assert r.residual < 0.05

    def test_direct_mode_underflow(self):
        f = ScalarField(self.grid, np.full(241, -800.0))
        with pytest.raises(NumericalRangeError, match="logsumexp"):
            hopf_cole_reference(0.25, self.path, self.grid, f, accumulation="direct")
        r = hopf_cole_reference(0.25, self.path, self.grid, f)
        assert np.allclose(r.logeta.values, -800.0)

    def test_one_dimensional_only(self):
        g2 = SpaceGrid(2, -1.0, 1.0, 5)
        with pytest.raises(ConfigurationError):
            hopf_cole_reference(0.25, self.path, g2, ScalarField(g2, np.zeros((5, 5))))

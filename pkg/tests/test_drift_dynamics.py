import numpy as np
import pytest

from pathctl.closed_form import closed_form_for
from pathctl.drift_dynamics import (drift_spde_residual, dump_trajectory_csv, extract_drift, momentum_residual,
                                    momentum_terms, simulate_optimal)
from pathctl.errors import ConfigurationError, PreconditionError
from pathctl.pathwise_value import METHODS, solve
from pathctl.problem import make_entry
from pathctl.randomness import generate_path, refine_path

from conftest import make_spec, still_path


def test_zero_problem():
    spec = make_spec()
    path = generate_path(0, spec.horizon, 1)
    d = extract_drift(solve(spec, path), spec.C)
    assert np.all(d.values == 0.0)
    opt = simulate_optimal(spec, path, d, 0, [0.3])
    assert np.allclose(opt.state.values[:, 0], 0.3 + 0.5 * path.values[:, 0])
    assert drift_spde_residual(d, path, spec) == 0.0


@pytest.mark.parametrize("method", METHODS)
def test_linear_case(method):
    spec = make_spec(N=50, M=101, terminal=make_entry("linear", a=0.8))
    path = generate_path(1, spec.horizon, 1)
    d = extract_drift(solve(spec, path, method), spec.C)
    assert np.max(np.abs(d.values[:, 1:-1, 0] + 0.8)) < 1e-10
    opt = simulate_optimal(spec, path, d, 0, [0.2])
    assert momentum_residual(d, opt.state, spec) < 1e-8
    assert drift_spde_residual(d, path, spec) < 1e-8


def test_constant_potential_behaves_like_zero():
    path = generate_path(2, make_spec(N=50).horizon, 1)
    res = []
    for pot in (make_entry("zero"), make_entry("constant", c=1.3)):
        spec = make_spec(N=50, M=101, potential=pot, terminal=make_entry("linear", a=0.4))
        d = extract_drift(solve(spec, path), spec.C)
        res.append(momentum_residual(d, simulate_optimal(spec, path, d, 0, [0.0]).state, spec))
    assert res[0] == pytest.approx(res[1], abs=1e-12)


def test_quadratic_drift_matches_closed_form(quad1d):
    spec, path = quad1d
    d = extract_drift(solve(spec, path), spec.C)
    exact = closed_form_for(spec, path).drift_table()
    core = (slice(None),) + spec.space.core_slices()
    assert np.max(np.abs(d.values[core] - exact[core])) < 0.05


def test_quadratic_characteristic_without_noise():
    spec = make_spec(N=100, M=201, terminal=make_entry("quadratic"))
    quiet = still_path(spec.horizon)
    d = extract_drift(solve(spec, quiet), spec.C)
    opt = simulate_optimal(spec, quiet, d, 0, [1.0])
    # straight line from 1 toward the point reached by the constant optimal control -1/2
    line = 1.0 - 0.5 * spec.horizon.nodes
    assert np.max(np.abs(opt.state.values[:, 0] - line)) < 0.02


@pytest.mark.parametrize("scheme", ["euler", "heun"])
def test_momentum_converges(scheme):
    spec = make_spec(N=50, M=101, terminal=make_entry("quadratic"))
    path = generate_path(6, spec.horizon, 1)
    out = []
    for _ in range(2):
        d = extract_drift(solve(spec, path), spec.C)
        out.append(momentum_terms(d, simulate_optimal(spec, path, d, 0, [0.5], scheme).state, spec))
        path = refine_path(path)
        spec = spec.replace(horizon=spec.horizon.refined(), space=spec.space.refined())
    assert out[1][0] < 0.6 * out[0][0]
    assert out[1][1] < 1e-8


def test_drift_residual_converges(quad1d):
    spec, path = quad1d
    r = []
    for _ in range(2):
        r.append(drift_spde_residual(extract_drift(solve(spec, path), spec.C), path, spec))
        path = refine_path(path)
        spec = spec.replace(horizon=spec.horizon.refined(), space=spec.space.refined())
    assert r[1] < r[0] / 1.6


def test_clamping_and_strict_mode():
    spec = make_spec(N=20, M=41, terminal=make_entry("linear", a=0.8))
    vf = solve(spec, generate_path(0, spec.horizon, 1))
    d = extract_drift(vf, 0.5)
    assert d.clamped > 0 and np.max(np.linalg.norm(d.values, axis=-1)) <= 0.5 + 1e-12
    with pytest.raises(PreconditionError):
        extract_drift(vf, 0.5, strict=True)


def test_exit_flag_and_bad_scheme():
    spec = make_spec(N=20, M=41, lower=-1.0, upper=1.0, terminal=make_entry("linear", a=-3.0), control_bound=5.0)
    path = still_path(spec.horizon)
    d = extract_drift(solve(spec, path), spec.C)
    assert simulate_optimal(spec, path, d, 0, [0.5]).exited
    with pytest.raises(ConfigurationError):
        simulate_optimal(spec, path, d, 0, [0.0], scheme="rk4")


def test_trajectory_csv(tmp_path):
    spec = make_spec(dim=2, N=5, M=9)
    path = generate_path(0, spec.horizon, 2)
    d = extract_drift(solve(spec, path), spec.C)
    dump_trajectory_csv(simulate_optimal(spec, path, d, 1, [0.0, 0.1]), tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "k,t,z_1,z_2,ustar_1,ustar_2"
    assert len(lines) == 6 and lines[1].startswith("1,")

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathctl.drift_dynamics import extract_drift, simulate_optimal
from pathctl.errors import ConfigurationError
from pathctl.invariants import SymmetryField, conserved_quantity, strat_integral, strat_partial_sums, symmetry_residual
from pathctl.pathwise_value import solve
from pathctl.problem import make_entry
from pathctl.randomness import TimeGrid, generate_path

from conftest import make_spec

ROT = [[0.0, -1.0], [1.0, 0.0]]


def test_strat_examples():
    p = generate_path(3, TimeGrid(0.0, 1.0, 50), 1)
    w = p.values[:, 0]
    assert strat_integral(np.zeros(51), p) == 0.0
    assert strat_integral(np.full(51, 2.5), p) == pytest.approx(2.5 * w[-1])
    assert strat_integral(w[10:41], p, 10, 40) == pytest.approx(0.5 * (w[40] ** 2 - w[10] ** 2), abs=1e-12)


@given(seed=st.integers(0, 1000), a=st.floats(-3, 3), b=st.floats(-3, 3), cut=st.integers(1, 19))
@settings(max_examples=30, deadline=None)
def test_strat_linear_and_additive(seed, a, b, cut):
    p = generate_path(seed, TimeGrid(0.0, 1.0, 20), 2)
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=(21, 2)), rng.normal(size=(21, 2))
    lhs = strat_integral(a * f + b * g, p)
    assert lhs == pytest.approx(a * strat_integral(f, p) + b * strat_integral(g, p), abs=1e-10)
    split = strat_integral(f[:cut + 1], p, 0, cut) + strat_integral(f[cut:], p, cut, 20)
    assert split == pytest.approx(strat_integral(f, p), abs=1e-12)


def test_partial_sums_shape_check():
    p = generate_path(0, TimeGrid(0.0, 1.0, 4), 1)
    assert strat_partial_sums(np.ones(5), p)[0] == 0.0
    with pytest.raises(ConfigurationError):
        strat_partial_sums(np.ones(4), p)


@given(v=st.lists(st.floats(-10, 10), min_size=2, max_size=2), w=st.floats(-5, 5))
@settings(max_examples=50, deadline=None)
def test_rotation_form_is_antisymmetric(v, w):
    A = np.array([[0.0, -w], [w, 0.0]])
    sym = SymmetryField.rotation(A)
    v = np.array(v)
    assert abs(v @ (sym.generator @ v)) <= 1e-12 * max(1.0, v @ v * abs(w))


def test_rotation_rejects_symmetric_generator():
    with pytest.raises(ConfigurationError):
        SymmetryField.rotation([[1.0, 0.0], [0.0, 1.0]])


def _run(spec, seed, x, sym):
    path = generate_path(seed, spec.horizon, spec.dim)
    d = extract_drift(solve(spec, path), spec.C)
    st_ = simulate_optimal(spec, path, d, 0, x).state
    return conserved_quantity(sym, d, st_, spec, path), symmetry_residual(sym, d, st_, spec), path


def test_null_symmetry():
    spec = make_spec(N=20, M=41, terminal=make_entry("cosine"))
    zero = lambda s, x: np.zeros_like(np.asarray(x, dtype=float))
    sym = SymmetryField.custom(1, lambda s: 0.0, lambda s: 0.0, zero, zero,
                               lambda s, x: np.zeros(np.shape(x) + (1,)), zero)
    tr, res, _ = _run(spec, 0, [0.2], sym)
    assert np.all(tr.Q == 0) and np.all(tr.residual == 0) and res == 0.0


def test_time_translation_linear():
    spec = make_spec(N=40, M=81, terminal=make_entry("linear", a=0.6))
    tr, res, _ = _run(spec, 1, [0.0], SymmetryField.time_translation(1))
    assert np.allclose(tr.Q, -0.18, atol=1e-8)
    assert tr.max_residual < 1e-8 and res == 0.0


def test_rotation_quadratic_two_dimensional():
    spec = make_spec(dim=2, N=40, M=41, terminal=make_entry("quadratic"))
    tr, res, _ = _run(spec, 2, [0.2, -0.1], SymmetryField.rotation(ROT))
    assert tr.max_residual <= 0.05 * (1 + np.max(np.abs(tr.Q)))
    assert res < 1e-10


def test_radial_potential_rotation():
    spec = make_spec(dim=2, N=20, M=41, potential=make_entry("radial_cosine"), terminal=make_entry("quadratic"))
    _, res, _ = _run(spec, 3, [0.5, 0.5], SymmetryField.rotation(ROT))
    assert res < 1e-8


def test_trace_csv(tmp_path):
    spec = make_spec(N=5, M=11)
    tr, _, _ = _run(spec, 0, [0.0], SymmetryField.time_translation(1))
    tr.dump_csv(tmp_path / "q.csv")
    lines = (tmp_path / "q.csv").read_text().splitlines()
    assert lines[0] == "k,t,Q,noise_integral,residual" and len(lines) == 7

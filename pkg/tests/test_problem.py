import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathctl.errors import ConfigurationError, ProvenanceWarning
from pathctl.problem import (CATALOG, catalog_eval, control_lattice, hamiltonian_min, lagrangian_gradient,
                             lagrangian_value, make_entry)

from conftest import make_spec

ENTRIES = [
    make_entry("zero"),
    make_entry("constant", c=1.5),
    make_entry("linear", a=[0.8, -0.3]),
    make_entry("cosine", kappa=1.2, k=[1.0, 0.5], phase=0.3),
    make_entry("quadratic", kappa=0.7),
    make_entry("radial_cosine", kappa=1.0, k=2.0),
]


def test_examples():
    z = catalog_eval(make_entry("zero"), [1.0, 2.0])
    assert z["value"] == 0 and np.all(z["gradient"] == 0) and z["laplacian"] == 0
    q = catalog_eval(make_entry("quadratic"), [3.0, 4.0])
    assert q["value"] == 12.5 and np.allclose(q["gradient"], [3, 4]) and q["laplacian"] == 2
    c = catalog_eval(make_entry("cosine"), [0.4])
    assert c["value"] == pytest.approx(np.cos(0.4))
    assert c["gradient"][0] == pytest.approx(-np.sin(0.4))
    assert c["laplacian"] == pytest.approx(-np.cos(0.4))


@pytest.mark.parametrize("entry", ENTRIES, ids=lambda e: e.identifier)
def test_derivatives_match_central_differences(entry):
    rng = np.random.default_rng(1)
    x = rng.uniform(-2, 2, size=(100, 2))
    h = 1e-4
    _, grad, lap = entry.evaluate(x)
    fd_lap = np.zeros(100)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        up, mid, dn = entry.value(x + e), entry.value(x), entry.value(x - e)
        assert np.allclose((up - dn) / (2 * h), grad[:, i], atol=1e-6)
        fd_lap += (up - 2 * mid + dn) / h ** 2
    assert np.allclose(fd_lap, lap, atol=1e-4)


def test_radial_regular_at_origin():
    v, g, lap = make_entry("radial_cosine", k=2.0).evaluate(np.zeros((1, 2)))
    assert np.all(np.isfinite(g)) and np.all(g == 0)
    assert lap[0] == pytest.approx(-8.0)


def test_entry_validation():
    with pytest.raises(ConfigurationError):
        make_entry("nonsense")
    with pytest.raises(ConfigurationError):
        make_entry("cosine", a=1.0)
    with pytest.raises(ConfigurationError):
        make_entry("linear")
    assert set(CATALOG) >= {e.identifier for e in ENTRIES}


def test_lattice():
    lat = control_lattice(1, 2.0, 5)
    assert lat.shape == (11, 1)
    assert lat[0, 0] == 0.0
    lat2 = control_lattice(2, 1.0, 4)
    norms = np.linalg.norm(lat2, axis=1)
    assert np.all(norms <= 1.0 + 1e-12)
    assert np.all(np.diff(norms) >= -1e-12)


@pytest.mark.parametrize("p,C,u,val", [([0.0, 0.0], 10.0, [0.0, 0.0], 0.0),
                                       ([1.0, 0.0], 10.0, [-1.0, 0.0], -0.5),
                                       ([3.0, 0.0], 1.0, [-1.0, 0.0], -2.5)])
def test_hamiltonian_examples(p, C, u, val):
    spec = make_spec(dim=2, M=5, control_bound=C)
    out = hamiltonian_min(p, spec)
    assert np.allclose(out["u_star"], u) and out["value"] == pytest.approx(val)


@given(r1=st.floats(0, 20), r2=st.floats(0, 20))
@settings(max_examples=50, deadline=None)
def test_hamiltonian_monotone_in_norm(r1, r2):
    spec = make_spec(dim=1, M=5, control_bound=3.0)
    lo, hi = sorted([r1, r2])
    assert hamiltonian_min([hi], spec)["value"] <= hamiltonian_min([lo], spec)["value"] + 1e-12


@pytest.mark.parametrize("name", ["absolute", "huber"])
def test_lattice_hamiltonian_for_other_lagrangians(name):
    spec = make_spec(dim=1, M=5, control_bound=2.0, lagrangian=name, control_K=40)
    out = hamiltonian_min([0.5], spec)
    lat = spec.lattice()
    assert out["value"] == pytest.approx(np.min(lagrangian_value(name, lat) + 0.5 * lat[:, 0]))


@pytest.mark.parametrize("name", ["quadratic", "absolute", "huber"])
def test_lagrangian_gradients(name):
    u = np.random.default_rng(2).normal(size=(20, 2)) * 2
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (lagrangian_value(name, u + e) - lagrangian_value(name, u - e)) / (2 * h)
        assert np.allclose(fd, lagrangian_gradient(name, u)[:, i], atol=1e-5)


def test_default_bound_and_provenance():
    with pytest.warns(ProvenanceWarning):
        spec = make_spec(terminal=make_entry("quadratic"))
    assert spec.C == pytest.approx(40.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spec = make_spec(potential=make_entry("cosine"), terminal=make_entry("cosine"))
    assert spec.C == pytest.approx(20.0)


@pytest.mark.parametrize("kw", [dict(nu=0.0), dict(control_bound=-1.0), dict(lagrangian="cubic"),
                                dict(control_K=0)])
def test_spec_rejects_bad_input(kw):
    with pytest.raises(ConfigurationError):
        make_spec(**kw)

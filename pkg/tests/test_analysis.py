import numpy as np
import pytest

from pathctl.analysis import (comparison_check, continuity_moduli, convergence_study, cross_method_gaps,
                              fit_slope, refinement_levels)
from pathctl.errors import ConfigurationError, PreconditionError
from pathctl.pathwise_value import solve
from pathctl.problem import make_entry
from pathctl.randomness import generate_path

from conftest import make_spec


def test_comparison_constant_offset():
    spec = make_spec(N=40, M=81, potential=make_entry("cosine"))
    path = generate_path(0, spec.horizon, 1)
    S1 = make_entry("cosine", offset=-0.5)
    S2 = make_entry("cosine", offset=0.7)
    rep = comparison_check(spec, path, S1, S2)
    assert rep.passed and rep.positive_part == 0.0
    assert rep.offset == pytest.approx(1.2)
    assert rep.offset_gap < 1e-10


def test_comparison_ordered_terminals():
    spec = make_spec(N=40, M=81)
    path = generate_path(1, spec.horizon, 1)
    rep = comparison_check(spec, path, make_entry("cosine", kappa=-1, offset=-1),
                           make_entry("cosine", kappa=1, offset=1), method="splitting")
    assert rep.passed and rep.offset is None


def test_comparison_rejects_unordered():
    spec = make_spec(N=10, M=21)
    path = generate_path(0, spec.horizon, 1)
    with pytest.raises(PreconditionError, match="node"):
        comparison_check(spec, path, make_entry("linear", a=1.0), make_entry("zero"))


def test_moduli_of_zero_problem_are_degenerate():
    spec = make_spec(N=40, M=41)
    m = continuity_moduli(solve(spec, generate_path(0, spec.horizon, 1)))
    assert m == {"lip_x": 0.0, "holder_t": 0.0, "degenerate": True}


def test_moduli_linear_terminal():
    spec = make_spec(N=80, M=81, terminal=make_entry("linear", a=0.6))
    m = continuity_moduli(solve(spec, generate_path(3, spec.horizon, 1)))
    assert m["lip_x"] == pytest.approx(0.6, abs=1e-9)
    # value moves with the noise, so the time exponent sits near one half
    assert 0.2 < m["holder_t"] < 0.8


def test_fit_slope():
    d = np.array([0.1, 0.05, 0.025])
    assert fit_slope(d, 3 * d) == pytest.approx(1.0)
    assert fit_slope(d, [1.0, 0.0, 1.0]) is None


def test_refinement_levels_share_path():
    spec = make_spec(N=10, M=11)
    path = generate_path(4, spec.horizon, 1)
    lv = refinement_levels(spec, path, 3)
    assert [sp.horizon.N for sp, _ in lv] == [10, 20, 40]
    assert [sp.space.M for sp, _ in lv] == [11, 21, 41]
    assert np.array_equal(lv[2][1].values[::4], path.values)
    with pytest.raises(ConfigurationError):
        refinement_levels(spec, generate_path(0, make_spec(N=5).horizon, 1), 2)


def test_convergence_against_closed_form():
    spec = make_spec(N=25, M=51, terminal=make_entry("quadratic"))
    rep = convergence_study(spec, generate_path(5, spec.horizon, 1), 3)
    assert rep.strictly_decreasing() and rep.slope > 0.8


def test_convergence_finest_and_zero():
    spec = make_spec(N=25, M=51, potential=make_entry("cosine"), terminal=make_entry("cosine"))
    rep = convergence_study(spec, generate_path(5, spec.horizon, 1), 3, reference="finest")
    assert rep.strictly_decreasing() and rep.slope > 0.5
    z = convergence_study(make_spec(N=10, M=11), generate_path(0, make_spec(N=10).horizon, 1), 3)
    assert z.slope is None and max(z.errors) == 0.0
    with pytest.raises(ConfigurationError):
        convergence_study(spec, generate_path(5, spec.horizon, 1), 3)
    with pytest.raises(ConfigurationError):
        convergence_study(spec, generate_path(5, spec.horizon, 1), 2, reference="finest")


def test_convergence_csv(tmp_path):
    spec = make_spec(N=10, M=21, terminal=make_entry("quadratic"))
    rep = convergence_study(spec, generate_path(0, spec.horizon, 1), 3)
    rep.dump_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "level,delta,h,error" and len(lines) == 4


def test_cross_method_gaps_shrink():
    spec = make_spec(N=25, M=51, terminal=make_entry("quadratic"))
    g = cross_method_gaps(spec, generate_path(2, spec.horizon, 1), 3)
    assert g[2] < g[1] < g[0]

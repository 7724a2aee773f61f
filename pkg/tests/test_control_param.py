import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from sirc_ce.ce_core import DimensionError, ParameterError
from sirc_ce.control_param import ControlGrid, DomainError, eval_control, hat_basis

GRID = ControlGrid.uniform(0.0, 1.0, 20)
node_values = hnp.arrays(float, 21, elements=st.floats(-2, 2))
times = st.floats(0.0, 1.0)


def test_grid_validation():
    with pytest.raises(ParameterError):
        ControlGrid([0.0, 0.0, 1.0])
    with pytest.raises(ParameterError):
        ControlGrid([0.0])
    with pytest.raises(ParameterError):
        ControlGrid([0.0, 1.0], lower=0.5, upper=0.1)
    with pytest.raises(ParameterError):
        ControlGrid([0.0, 1.0], lower=-0.1)
    g = ControlGrid.uniform(0.0, 1.0)
    assert g.size == 21 and g.start == 0.0 and g.end == 1.0 and g.midpoint == 0.45


def test_hat_kronecker_property():
    for i in range(GRID.size):
        for j in range(GRID.size):
            assert hat_basis(i, GRID.nodes[j], GRID) == (1.0 if i == j else 0.0)


def test_hat_partition_of_unity():
    ts = np.random.default_rng(0).uniform(0, 1, 100)
    total = sum(hat_basis(i, ts, GRID) for i in range(GRID.size))
    np.testing.assert_allclose(total, 1.0, rtol=0, atol=1e-14)


def test_hat_domain_errors():
    with pytest.raises(DomainError):
        hat_basis(0, 1.5, GRID)
    with pytest.raises(DomainError):
        hat_basis(GRID.size, 0.5, GRID)


def test_eval_examples():
    assert all(eval_control(np.full(21, 0.5), t, GRID) == 0.5 for t in np.linspace(0, 1, 37))
    c = np.zeros(21)
    c[7] = 2.0
    assert eval_control(c, GRID.nodes[7], GRID) == 0.9
    small = ControlGrid([0.0, 0.5, 1.0], 0.0, 1.0)
    assert eval_control([0.0, 1.0, 0.0], 0.25, small) == 0.5


def test_eval_errors():
    with pytest.raises(DomainError):
        eval_control(np.zeros(21), -0.01, GRID)
    with pytest.raises(DimensionError):
        eval_control(np.zeros(20), 0.5, GRID)


def test_eval_vectorized_matches_scalar():
    c = np.random.default_rng(1).uniform(-0.5, 1.5, 21)
    ts = np.linspace(0, 1, 101)
    assert np.array_equal(eval_control(c, ts, GRID), [eval_control(c, t, GRID) for t in ts])


@given(node_values)
def test_interpolates_clamped_nodes(c):
    got = np.array([eval_control(c, t, GRID) for t in GRID.nodes])
    assert np.array_equal(got, np.clip(c, 0.0, 0.9))


@given(node_values, times)
def test_output_within_bounds(c, t):
    assert 0.0 <= eval_control(c, t, GRID) <= 0.9


@given(node_values, st.floats(0, 1), st.floats(0, 1), st.integers(0, 19))
def test_lipschitz_within_segment(c, a, b, seg):
    lo, hi = GRID.nodes[seg], GRID.nodes[seg + 1]
    t, s = lo + a * (hi - lo), lo + b * (hi - lo)
    slope = np.max(np.abs(np.diff(c) / np.diff(GRID.nodes)))
    assert abs(eval_control(c, t, GRID) - eval_control(c, s, GRID)) <= slope * abs(t - s) + 1e-12


@given(
    hnp.arrays(float, 21, elements=st.floats(0, 0.9)),
    hnp.arrays(float, 21, elements=st.floats(0, 0.9)),
    st.floats(0, 1),
    times,
)
def test_linear_inside_bounds(c, d, lam, t):
    mix = lam * c + (1 - lam) * d
    want = lam * eval_control(c, t, GRID) + (1 - lam) * eval_control(d, t, GRID)
    assert eval_control(mix, t, GRID) == pytest.approx(want, abs=1e-12)


@given(node_values, times)
def test_eval_equals_hat_expansion_before_clamp(c, t):
    wide = ControlGrid(GRID.nodes, 0.0, 10.0)
    shifted = c + 2.0  # keeps every value inside [0, 10]
    expansion = sum(shifted[i] * hat_basis(i, t, wide) for i in range(wide.size))
    assert eval_control(shifted, t, wide) == pytest.approx(expansion, abs=1e-12)

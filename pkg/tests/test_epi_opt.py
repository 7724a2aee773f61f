import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from sirc_ce.ce_core import CeSettings, GaussianPopulationModel, ParameterError
from sirc_ce.control_param import eval_control
from sirc_ce.epi_opt import (
    CostWeights,
    cost_batch,
    cost_index,
    developed_scenario,
    optimize_alternating,
    optimize_joint,
    scenario,
    simulate,
    start_scenario,
    trajectory_cost,
)
from sirc_ce.ode_sim import SircParameters, SircState

ZERO = np.zeros(21)
FAST = CeSettings(60, 6, 0.7, 1e-4, 60, seed=3)


def test_horizon_override_rebuilds_grids():
    sc = start_scenario(horizon=(1.0, 3.0))
    assert sc.u_grid.start == 1.0 and sc.v_grid.end == 3.0 and sc.times[-1] == 3.0


def test_scenarios():
    s = start_scenario()
    assert s.initial.as_array().tolist() == [1 - 1e-6, 1e-6, 0.0, 0.0]
    d = developed_scenario()
    assert d.initial.as_array().tolist() == [0.99, 5e-3, 3e-3, 2e-3]
    assert scenario("developed").initial == d.initial
    with pytest.raises(ParameterError):
        scenario("late")
    with pytest.raises(ParameterError):
        start_scenario(initial=SircState(0.5, 0.1, 0.0, 0.0))
    with pytest.raises(ParameterError):
        CostWeights(alpha1=-1)


def test_kernel_matches_reference_path():
    rng = np.random.default_rng(0)
    for sc in (start_scenario(), developed_scenario()):
        for _ in range(3):
            u, v = rng.uniform(-0.2, 1.1, (2, 21))
            want = trajectory_cost(simulate(u, v, sc), sc.weights)
            assert cost_index(u, v, sc) == pytest.approx(want, rel=1e-12)


def test_batch_rows_independent():
    sc = start_scenario()
    cu = np.random.default_rng(1).uniform(0, 0.9, (5, 21))
    cv = np.random.default_rng(2).uniform(0, 0.9, (5, 21))
    batch = cost_batch(cu, cv, sc)
    single = [cost_batch(cu[i:i + 1], cv[i:i + 1], sc)[0] for i in range(5)]
    assert batch.tobytes() == np.array(single).tobytes()


def test_uncontrolled_cost_values():
    # printed reference values are 0.00799 and 0.00789; see the acceptance suite
    assert cost_index(ZERO, ZERO, start_scenario()) == pytest.approx(0.0112943, rel=1e-5)
    assert cost_index(ZERO, ZERO, developed_scenario()) == pytest.approx(0.0111484, rel=1e-5)


@given(st.floats(0, 0.9), st.sampled_from([(0.0, 1.0), (0.0, 0.5), (1.0, 3.0)]))
@settings(max_examples=10, deadline=None)
def test_constant_control_cost(u0, horizon):
    sc = start_scenario(weights=CostWeights(0.0, 0.0, 1e-3, 1e-3), horizon=horizon)
    j = cost_index(np.full(21, u0), ZERO, sc)
    assert j == pytest.approx(0.5 * 1e-3 * u0**2 * (horizon[1] - horizon[0]), rel=1e-12, abs=1e-18)


def test_controls_reduce_infection():
    sc = start_scenario()
    assert cost_index(np.full(21, 0.5), ZERO, sc) < cost_index(ZERO, ZERO, sc)


@settings(max_examples=10, deadline=None)
@given(hnp.arrays(float, 21, elements=st.floats(0, 0.9)), hnp.arrays(float, 21, elements=st.floats(0, 0.9)))
def test_conservation_under_controls(u, v):
    tr = simulate(u, v, developed_scenario())
    assert np.max(np.abs(tr.states.sum(axis=1) - 1)) < 1e-8


def test_shape_errors():
    with pytest.raises(Exception):
        cost_index(np.zeros(20), ZERO, start_scenario())
    with pytest.raises(ParameterError):
        cost_batch(np.zeros((2, 21)), np.zeros((3, 21)), start_scenario())


def test_alternating_zero_iterations():
    sc = start_scenario()
    res = optimize_alternating(sc, CeSettings(20, 2, max_iterations=0))
    assert res.log == []
    assert np.all(res.u == 0.45) and np.all(res.v == 0.45)
    assert res.cost == cost_index(np.full(21, 0.45), np.full(21, 0.45), sc)


@pytest.mark.parametrize("opt", [optimize_alternating, optimize_joint])
def test_optimizers_improve_and_roundtrip(opt):
    sc = start_scenario()
    res = opt(sc, FAST)
    assert res.cost < cost_index(ZERO, ZERO, sc)
    assert res.cost == cost_index(res.u, res.v, sc)
    ts = np.random.default_rng(5).uniform(0, 1, 1000)
    for c in (res.u, res.v):
        vals = eval_control(c, ts, sc.u_grid)
        assert np.all((vals >= 0) & (vals <= 0.9))
    stages = {r.stage for r in res.log}
    assert stages == ({"u", "v"} if opt is optimize_alternating else {"joint"})


def test_joint_deterministic_under_seed():
    sc = developed_scenario()
    a = optimize_joint(sc, FAST)
    b = optimize_joint(sc, FAST)
    assert a.u.tobytes() == b.u.tobytes() and a.cost == b.cost


def test_no_transmission_prefers_no_control():
    # alpha1 = 0 keeps the state terms of the cost independent of the controls
    sc = start_scenario(initial=SircState(1.0, 0.0, 0.0, 0.0), params=SircParameters(beta=0.0),
                        weights=CostWeights(alpha1=0.0))
    init = GaussianPopulationModel.constant(21, 0.45, 0.5)
    # default population: smaller ones stall on nodes whose cost effect is below the sampling noise
    res = optimize_joint(sc, CeSettings(seed=0), u_init=init, v_init=init)
    ts = np.linspace(0, 1, 201)
    assert np.max(eval_control(res.u, ts, sc.u_grid)) <= 0.05
    assert np.max(eval_control(res.v, ts, sc.v_grid)) <= 0.05


def test_decoupled_controls_go_to_zero():
    sc = start_scenario(params=SircParameters(rho1=0.0, rho2=0.0))
    res = optimize_joint(sc, CeSettings(100, 10, 0.7, 1e-4, 300, seed=2))
    assert np.max(np.clip(res.u, 0, 0.9)) <= 0.05 and np.max(np.clip(res.v, 0, 0.9)) <= 0.05


def test_alternating_fixed_v():
    sc = start_scenario()
    res = optimize_alternating(sc, FAST, v_fixed=np.full(21, 0.2))
    assert len(res.log) > 0 and np.isfinite(res.cost)

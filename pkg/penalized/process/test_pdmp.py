"""PDMP simulation, flows and continuous-time weights."""

import numpy as np
import pytest
from scipy.linalg import expm

from penalized.errors import InvalidParameter, InvalidPenalty, InvalidState
from penalized.models import bistable_pdmp, switched_linear
from penalized.process import (
    RK4,
    PdmpModel,
    constant_rate,
    constant_survival,
    continuous_penalty,
    cubic_flow,
    expm_2x2,
    initial_states,
    mode_rate_penalty,
    monotonicity_constant,
    propagate,
    rk4_flow,
    simulate_pdmp,
    weight_continuous,
)
from utils.rng import stream_rng


def _still_model(rates=((-1.0, 1.0), (1.0, -1.0))):
    return PdmpModel(
        name="still",
        modes=(0, 1),
        rate_matrix=np.asarray(rates),
        vector_fields=(lambda x: 0.0 * x, lambda x: 0.0 * x),
        flow_integrator=RK4,
        radius=1.0,
        dim=1,
    )


@pytest.mark.parametrize("A", [[[-0.3, 0.2], [-0.1, -0.5]], [[-1.0, 2.0], [-2.0, -1.0]], [[-0.4, 1.0], [0.0, -0.4]]])
def test_expm_2x2_matches_scipy(A):
    A = np.asarray(A)
    t = np.array([0.0, 0.3, 2.5])
    for k, tk in enumerate(t):
        assert np.allclose(expm_2x2(A, t)[k], expm(A * tk), atol=1e-12)


def test_rate_matrix_validation():
    with pytest.raises(InvalidParameter):
        _still_model(((-1.0, 0.5), (1.0, -1.0)))
    with pytest.raises(InvalidParameter):
        _still_model(((1.0, -1.0), (1.0, -1.0)))


def test_linear_decay_is_exact():
    model = switched_linear(-np.eye(2), [0.0, 0.0])
    x = np.array([[0.6, -0.3], [0.1, 0.2]])
    t = np.array([0.5, 3.0])
    expected = x * np.exp(-t)[:, None]
    assert np.allclose(model.flow(x, np.array([0, 1]), t), expected, atol=1e-9)
    path = simulate_pdmp(model, (np.array([0.6, -0.3]), 0), 2.0, seed=1)
    assert np.allclose(path.state_at(1.7)[:2], np.array([0.6, -0.3]) * np.exp(-1.7), atol=1e-9)


def test_single_segment_when_no_jump():
    model = _still_model(((-1e-12, 1e-12), (1e-12, -1e-12)))
    path = simulate_pdmp(model, (np.array([0.2]), 1), 1.0, seed=0)
    assert len(path.segments) == 1
    assert path.segments[0].mode == 1


def test_bistable_equilibrium_stays_put():
    model, _ = bistable_pdmp(2.0, -1.0, 0.5)
    path = simulate_pdmp(model, (np.array([0.0]), 0), 5.0, seed=2)
    assert all(state[0] == 0.0 for state in path.states)
    assert path.state_at(3.3)[0] == 0.0


def test_start_outside_ball_is_rejected():
    model, _ = bistable_pdmp(2.0, -1.0, 0.5)
    with pytest.raises(InvalidState):
        simulate_pdmp(model, (np.array([5.0]), 0), 1.0)
    with pytest.raises(InvalidParameter):
        simulate_pdmp(model, (np.array([0.5]), 0), 0.0)


def test_holding_time_means():
    rates = ((-2.0, 2.0), (0.5, -0.5))
    model = _still_model(rates)
    path = simulate_pdmp(model, (np.array([0.0]), 0), 4000.0, seed=7)
    for mode, rate in [(0, 2.0), (1, 0.5)]:
        durations = np.array([s.duration for s in path.segments[:-1] if s.mode == mode])
        assert abs(durations.mean() - 1 / rate) <= 3 * (1 / rate) / np.sqrt(len(durations))


def test_weight_continuous_examples():
    model, penalty = bistable_pdmp(2.0, -1.0, 0.8)
    path = simulate_pdmp(model, (np.array([0.5]), 0), 6.0, seed=3)
    time_plus = sum(s.duration for s in path.segments if s.mode == 1)
    assert weight_continuous(path, penalty) == pytest.approx(np.exp(-0.8 * time_plus), rel=1e-12)
    assert weight_continuous(path, mode_rate_penalty((0.0, 0.0))) == 1.0

    still = _still_model()
    rho = continuous_penalty(lambda s: np.abs(s[:, 0]), 1.0, 0.0, 1.0, name="abs")
    path = simulate_pdmp(still, (np.array([0.5]), 0), 2.0, seed=4)
    assert weight_continuous(path, rho) == pytest.approx(np.exp(-1.0), abs=1e-8)
    with pytest.raises(InvalidPenalty):
        weight_continuous(path, constant_survival(0.5))


def test_weight_continuous_with_simpson_is_multiplicative():
    model = switched_linear([[-0.3, 0.0], [0.0, -0.5]], [1.0, 0.0])
    rho = continuous_penalty(lambda s: 0.1 + 0.2 * np.linalg.norm(s[:, :2], axis=1) / 2.0, 0.4, 0.1, 0.3)
    rng = stream_rng(5, 0)
    states = initial_states(model, (np.array([1.5, 0.0]), 0), 64)
    mid, first = propagate(model, rho, states, 1.2, rng)
    end, second = propagate(model, rho, mid, 0.8, rng)
    assert np.all((first + second) <= 0)
    assert np.all(np.exp(first + second) > 0)
    assert np.all(model.contains(end))


def test_monotonicity_constant_of_diagonal_system():
    model = switched_linear([[-0.3, 0.0], [0.0, -0.5]], [1.0, 0.0])
    assert monotonicity_constant(model, samples=2000) == pytest.approx(0.3, abs=0.02)


def test_trajectory_frame_columns():
    model, penalty = bistable_pdmp(2.0, -1.0, 0.5)
    frame = simulate_pdmp(model, (np.array([0.5]), 1), 3.0, seed=9).to_frame(penalty)
    assert list(frame.columns) == ["time", "x1", "mode", "log_weight"]
    assert frame["time"].is_monotonic_increasing
    assert frame["log_weight"].iloc[0] == 0.0
    assert constant_rate(0.0).rho(frame[["x1", "mode"]].to_numpy()).sum() == 0.0


def test_rk4_matches_closed_form_cubic_flow():
    x = np.array([[0.5], [-1.2], [1.5]])
    t = np.array([0.3, 1.0, 1.0])
    approx = rk4_flow(lambda y: 2.0 * y - y**3, x, t, keep_sign=True)
    assert np.allclose(approx, cubic_flow(2.0)(x, t), atol=1e-7)

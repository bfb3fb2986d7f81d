"""Synchronous and merge couplings."""

import numpy as np
import pytest

from penalized.models import bernoulli_convolution, identity_half_mixture, switched_linear
from penalized.process import constant_survival, couple_pdmp_merge, couple_synchronous, exact_coupled_expectation, initial_states, propagate
from utils.rng import stream_rng


def test_synchronous_bernoulli_contracts_exactly():
    coupled = couple_synchronous(bernoulli_convolution())
    path_x, path_y = coupled.simulate(-2.0, 2.0, 40, seed=1)
    for n, (x, y) in enumerate(zip(path_x.states, path_y.states)):
        assert abs(x - y) == 4.0 * 2.0**-n
    assert abs(path_x.states[1] - path_y.states[1]) == 2.0


def test_synchronous_equal_starts_stay_equal():
    path_x, path_y = couple_synchronous(bernoulli_convolution()).simulate(0.7, 0.7, 20, seed=2)
    assert path_x.states == path_y.states


def test_iterated_functions_distance_is_nonincreasing():
    coupled = couple_synchronous(identity_half_mixture(0.4))
    path_x, path_y = coupled.simulate(-1.5, 1.0, 30, seed=3)
    gaps = np.abs(np.array(path_x.states) - np.array(path_y.states))
    assert np.all(np.diff(gaps) <= 0)


def test_synchronous_exact_paths_match_marginals():
    model = bernoulli_convolution()
    prob, xs, ys, _, _ = couple_synchronous(model).exact_paths(None, -1.0, 1.0, 5)
    assert prob.sum() == pytest.approx(1.0)
    assert np.allclose(np.abs(xs - ys), 2.0 / 2**5)


@pytest.fixture
def linear():
    return switched_linear([[-0.3, 0.0], [0.0, -0.5]], [1.0, 0.0])


def test_merge_with_equal_modes_starts_merged(linear):
    path_x, path_y, merge_time = couple_pdmp_merge(linear).simulate((np.array([1.5, 0.0]), 0), (np.array([-1.0, 1.2]), 0), 5.0, seed=4)
    assert merge_time == 0.0
    assert [s.mode for s in path_x.segments] == [s.mode for s in path_y.segments]


def test_merge_contracts_after_agreement(linear):
    coupled = couple_pdmp_merge(linear)
    us = initial_states(linear, (np.array([1.5, 0.0]), 0), 500)
    vs = initial_states(linear, (np.array([-1.0, 1.2]), 0), 500)
    pairs = coupled.propagate_pairs(None, us, vs, 3.0, stream_rng(5, 0))
    gap = np.linalg.norm(pairs.xs[:, :2] - pairs.ys[:, :2], axis=1)
    start = np.linalg.norm([2.5, -1.2])
    assert np.all(gap <= np.exp(-0.3 * 3.0) * start + 1e-9)
    assert np.all(pairs.xs[:, 2] == pairs.ys[:, 2])
    assert np.all(pairs.merge_times == 0.0)


def test_merge_marginal_matches_direct_simulation(linear):
    size = 4000
    coupled = couple_pdmp_merge(linear)
    us = initial_states(linear, (np.array([1.5, 0.0]), 0), size)
    vs = initial_states(linear, (np.array([-1.0, 1.2]), 1), size)
    pairs = coupled.propagate_pairs(None, us, vs, 1.5, stream_rng(6, 0))
    direct, _ = propagate(linear, None, vs, 1.5, stream_rng(6, 1))
    freq_coupled = pairs.ys[:, 2].mean()
    freq_direct = direct[:, 2].mean()
    spread = np.sqrt(2 * 0.25 / size)
    assert abs(freq_coupled - freq_direct) <= 3 * spread
    x_coupled, x_direct = pairs.ys[:, 0], direct[:, 0]
    se = np.sqrt(x_coupled.var() / size + x_direct.var() / size)
    assert abs(x_coupled.mean() - x_direct.mean()) <= 3 * se
    assert np.all(np.isfinite(pairs.merge_times) | (pairs.xs[:, 2] != pairs.ys[:, 2]))


def test_exact_coupled_expectation_of_distance():
    model = bernoulli_convolution()
    value = exact_coupled_expectation(model, None, -1.0, 1.0, 4, lambda xs, ys, zx, zy: np.abs(xs - ys))
    assert value == pytest.approx(2.0 / 2**4)
    penalty = constant_survival(0.5)
    weights = exact_coupled_expectation(model, penalty, -1.0, 1.0, 3, lambda xs, ys, zx, zy: zx * zy)
    assert weights == pytest.approx(0.5**6)

"""Discrete kernels, weights and the exact enumeration oracle."""

from fractions import Fraction

import numpy as np
import pytest

from penalized.errors import InstanceTooLarge, InvalidPenalty, InvalidState, UnsupportedModel
from penalized.models import bernoulli_convolution, lipschitz_demo_penalty, penalty_counterexample_abs
from penalized.process import (
    DiscreteModel,
    StateSpace,
    constant_rate,
    constant_survival,
    enumerate_paths,
    exact_conditional_law,
    exact_feynman_kac,
    initial_states,
    propagate,
    simulate_discrete,
    weight_discrete,
)
from utils.rng import stream_rng


@pytest.fixture
def bernoulli():
    return bernoulli_convolution()


def test_simulate_discrete_follows_given_noise(bernoulli):
    assert simulate_discrete(bernoulli, 0, 1, noises=[1]).states[-1] == 1
    assert simulate_discrete(bernoulli, -2.0, 2, noises=[1, 1]).states[-1] == 1.0
    assert simulate_discrete(bernoulli, 0.5, 0).states == [0.5]


def test_simulate_discrete_is_reproducible(bernoulli):
    first = simulate_discrete(bernoulli, 0.3, 25, seed=11).states
    assert simulate_discrete(bernoulli, 0.3, 25, seed=11).states == first
    assert simulate_discrete(bernoulli, 0.3, 25, seed=12).states != first


def test_simulate_discrete_rejects_outside_start(bernoulli):
    with pytest.raises(InvalidState):
        simulate_discrete(bernoulli, 3.0, 4)
    with pytest.raises(InvalidState):
        simulate_discrete(bernoulli_convolution(punctured=True), 0.0, 4)


def test_model_rejects_bad_noise_law():
    with pytest.raises(ValueError):
        DiscreteModel("bad", lambda x, t: x / 2 + t, StateSpace(-2, 2), (-1, 1), (0.5, 0.6))
    with pytest.raises(ValueError):
        DiscreteModel("escapes", lambda x, t: x + t, StateSpace(-2, 2), (-1, 1), (0.5, 0.5))


def test_weight_discrete_examples(bernoulli):
    path = simulate_discrete(bernoulli_convolution(punctured=True), Fraction(1), 2, noises=[1, 1])
    assert weight_discrete(path, penalty_counterexample_abs()) == Fraction(3, 8)
    assert weight_discrete(simulate_discrete(bernoulli, 0.2, 0), constant_survival(0.7)) == 1
    path = simulate_discrete(bernoulli, 0.2, 6, seed=3)
    assert weight_discrete(path, constant_survival(0.7)) == pytest.approx(0.7**6)


def test_weight_discrete_is_multiplicative(bernoulli):
    penalty = lipschitz_demo_penalty()
    noises = list(np.random.default_rng(4).choice([-1, 1], size=10))
    path = simulate_discrete(bernoulli, 0.2, 10, noises=noises)
    head = simulate_discrete(bernoulli, 0.2, 4, noises=noises[:4])
    tail = simulate_discrete(bernoulli, path.states[4], 6, noises=noises[4:])
    assert weight_discrete(path, penalty) == pytest.approx(weight_discrete(head, penalty) * weight_discrete(tail, penalty), rel=1e-12)


def test_weight_discrete_rejects_rate_penalty(bernoulli):
    with pytest.raises(InvalidPenalty):
        weight_discrete(simulate_discrete(bernoulli, 0.2, 3), constant_rate(1.0))


def test_enumerate_paths_probabilities(bernoulli):
    paths = enumerate_paths(bernoulli, Fraction(0), 1)
    assert [p for _, p in paths] == [Fraction(1, 2), Fraction(1, 2)]
    assert sum(p for _, p in enumerate_paths(bernoulli, Fraction(0), 3)) == 1
    endpoints = sorted(float(states[-1]) for states, _ in enumerate_paths(bernoulli, 0, 2))
    assert endpoints == [-1.5, -0.5, 0.5, 1.5]


def test_enumerate_paths_limits(bernoulli):
    with pytest.raises(InstanceTooLarge):
        enumerate_paths(bernoulli, 0, 12, cap=1024)
    sampled = DiscreteModel("sampled", lambda x, t: x / 2 + t, StateSpace(-2, 2), sampler=lambda rng, n: rng.uniform(-1, 1, n))
    with pytest.raises(UnsupportedModel):
        enumerate_paths(sampled, 0, 2)


def test_exact_feynman_kac_conservative_case(bernoulli):
    assert exact_feynman_kac(bernoulli, None, Fraction(1, 3), 5) == 1
    assert exact_feynman_kac(bernoulli, constant_survival(1), 0.25, 6) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2, 5, 12])
def test_counterexample_abs_identities(n):
    model = bernoulli_convolution(punctured=True)
    penalty = penalty_counterexample_abs()
    x = Fraction(3, 5)
    prefactor = (abs(x) / 2) / 2 ** (n - 1)
    # P_n f(x) = (|x|/2) 2^{1-n} E_x[|X_1|...|X_{n-1}| f(X_n)]
    assert exact_feynman_kac(model, penalty, x, n, f=lambda y: y) == prefactor * x / 2
    assert exact_feynman_kac(model, penalty, x, n) == prefactor


def test_exact_conditional_law_is_normalized(bernoulli):
    law = exact_conditional_law(bernoulli, lipschitz_demo_penalty(), 0.4, 6)
    assert law.weights.sum() == pytest.approx(1.0)
    assert law.info["survival"] == pytest.approx(exact_feynman_kac(bernoulli, lipschitz_demo_penalty(), 0.4, 6))


def test_monte_carlo_matches_exact_within_three_sigma(bernoulli):
    penalty = lipschitz_demo_penalty()
    n, size = 8, 100_000
    states, log_weights = propagate(bernoulli, penalty, initial_states(bernoulli, 0.3, size), n, stream_rng(21, 0))
    samples = np.exp(log_weights) * states
    exact = exact_feynman_kac(bernoulli, penalty, 0.3, n, f=lambda y: y)
    assert abs(samples.mean() - exact) <= 3 * samples.std(ddof=1) / np.sqrt(size)

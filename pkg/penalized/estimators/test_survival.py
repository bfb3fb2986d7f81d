import logging

import numpy as np
import pytest

from penalized.errors import InvalidCurve, InvalidParameter
from penalized.estimators import SurvivalCurve, estimate_eta, estimate_lambda0, exact_survival_curve, survival_curve
from penalized.metric import absolute_metric
from penalized.models import bernoulli_convolution, bistable_pdmp, lipschitz_demo_penalty
from penalized.process import constant_survival


@pytest.fixture
def bernoulli():
    return bernoulli_convolution()


def test_constant_penalty_survival_is_geometric(bernoulli):
    curve = survival_curve(bernoulli, constant_survival(0.8), 0.1, [0, 1, 4, 9], 200, seed=1)
    assert np.allclose(curve.estimates, 0.8 ** np.array([0, 1, 4, 9]), rtol=1e-12)
    assert np.allclose(curve.stderr, 0.0, atol=1e-15)
    assert curve.estimates[0] == 1.0


def test_survival_curve_rejects_bad_times(bernoulli):
    with pytest.raises(InvalidParameter):
        survival_curve(bernoulli, constant_survival(0.8), 0.1, [], 10)
    with pytest.raises(InvalidParameter):
        survival_curve(bernoulli, constant_survival(0.8), 0.1, [3, 2], 10)


def test_monte_carlo_curve_brackets_exact_curve(bernoulli):
    penalty = lipschitz_demo_penalty()
    times = [2, 5, 8]
    curve = survival_curve(bernoulli, penalty, 0.5, times, 20_000, seed=2)
    exact = exact_survival_curve(bernoulli, penalty, 0.5, times)
    assert np.all(np.abs(curve.estimates - exact.estimates) <= 3 * curve.stderr + 1e-12)
    assert np.all(np.diff(curve.estimates) <= 2 * curve.stderr[1:])


def test_bistable_survival_is_decreasing_in_the_killing_rate():
    model, penalty = bistable_pdmp(2.0, -1.0, 0.5)
    curve = survival_curve(model, penalty, (np.array([0.5]), 1), [0.5, 1.0, 2.0], 2000, seed=3)
    assert np.all(curve.estimates <= 1.0)
    assert np.all(curve.estimates >= np.exp(-0.5 * np.array([0.5, 1.0, 2.0])) - 1e-12)
    assert np.all(np.diff(curve.estimates) <= 0)


def test_lambda0_of_constant_penalty(bernoulli):
    curve = exact_survival_curve(bernoulli, constant_survival(0.8), 0.3, range(0, 11))
    fit = estimate_lambda0(curve)
    assert fit.value == pytest.approx(-np.log(0.8), abs=1e-12)
    assert fit.window == (5.0, 10.0)


def test_lambda0_two_point_fit_is_exact():
    curve = SurvivalCurve(np.array([1.0, 3.0]), np.exp(-0.4 * np.array([1.0, 3.0])), np.zeros(2), np.zeros(2))
    fit = estimate_lambda0(curve, window=(0.0, 3.0))
    assert fit.value == pytest.approx(0.4, abs=1e-14)
    assert fit.stderr == 0.0


def test_lambda0_is_stable_across_windows(bernoulli):
    curve = exact_survival_curve(bernoulli, lipschitz_demo_penalty(), 0.0, range(0, 15))
    assert estimate_lambda0(curve, window=(6, 14)).value == pytest.approx(estimate_lambda0(curve, window=(10, 14)).value, abs=1e-3)


def test_lambda0_rejects_bad_curves():
    curve = SurvivalCurve(np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.0, 0.1]), np.zeros(3), np.zeros(3))
    with pytest.raises(InvalidCurve):
        estimate_lambda0(curve, window=(1.0, 3.0))
    with pytest.raises(InvalidCurve):
        estimate_lambda0(curve, window=(2.5, 3.0))


def test_eta_of_constant_penalty_is_one(bernoulli):
    grid = bernoulli.state_space.sample_grid(16)
    eta = estimate_eta(bernoulli, constant_survival(0.7), grid, 6, -np.log(0.7), 50, seed=4)
    assert np.allclose(eta.values, 1.0)


def test_eta_is_positive_and_lipschitz(bernoulli):
    penalty = lipschitz_demo_penalty()
    curve = exact_survival_curve(bernoulli, penalty, 0.0, range(0, 13))
    lambda0 = estimate_lambda0(curve).value
    metric = absolute_metric()
    grid = bernoulli.state_space.sample_grid(32)
    quotients = []
    for t in (6, 9, 12):
        eta = estimate_eta(bernoulli, penalty, grid, t, lambda0, 0, exact=True)
        assert eta.values.min() > 0.5
        assert np.mean(eta.values) == pytest.approx(1.0)
        quotients.append(eta.lipschitz_quotient(metric))
    assert max(quotients) < 1.0
    assert max(quotients) - min(quotients) < 1e-2


def test_eta_flags_times_inside_the_fit_window(bernoulli, caplog):
    penalty = lipschitz_demo_penalty()
    fit = estimate_lambda0(exact_survival_curve(bernoulli, penalty, 0.0, range(0, 13)))
    assert fit.window == (6.0, 12.0)
    grid = bernoulli.state_space.sample_grid(8)
    with caplog.at_level(logging.WARNING, logger="penalized.estimators.survival"):
        early = estimate_eta(bernoulli, penalty, grid, 8, fit, 0, exact=True)
    assert early.info["before_fit_window"]
    assert "precedes" in caplog.text
    late = estimate_eta(bernoulli, penalty, grid, 12, fit, 0, exact=True)
    assert not late.info["before_fit_window"]
    assert np.array_equal(late.values, estimate_eta(bernoulli, penalty, grid, 12, fit.value, 0, exact=True).values)

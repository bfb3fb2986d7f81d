import numpy as np
import pytest

from penalized.errors import InvalidParameter
from penalized.estimators import nu_q, q_process_marginal, qsd_fixed_point, quasi_stationarity_residual
from penalized.metric import WeightedEnsemble, w1_quantile, w1_uniform
from penalized.models import bernoulli_convolution, lipschitz_demo_penalty
from penalized.process import constant_survival


@pytest.fixture
def bernoulli():
    return bernoulli_convolution()


def test_constant_penalty_fixed_point_is_uniform(bernoulli):
    qsd = qsd_fixed_point(bernoulli, constant_survival(0.9), N=10_000, tol=0.01, seed=1, with_eta=False)
    assert qsd.converged
    assert w1_uniform(qsd.measure, -2.0, 2.0) <= 0.05
    assert qsd.lambda0 == pytest.approx(-np.log(0.9), abs=1e-12)


def test_fixed_point_is_invariant_and_unique(bernoulli):
    penalty = lipschitz_demo_penalty()
    tol = 0.01
    first = qsd_fixed_point(bernoulli, penalty, N=2000, tol=tol, seed=2, eta_N=200)
    second = qsd_fixed_point(bernoulli, penalty, N=2000, tol=tol, seed=3, initial=WeightedEnsemble.from_samples(np.full(2000, 1.5)), with_eta=False)
    assert first.converged and second.converged
    assert quasi_stationarity_residual(first, bernoulli, penalty) <= 2 * tol
    assert w1_quantile(first.measure, second.measure) <= 3 * tol
    assert first.lambda0 > 0
    assert np.all(first.eta.values > 0)


def test_non_convergence_is_flagged_not_raised(bernoulli):
    qsd = qsd_fixed_point(bernoulli, lipschitz_demo_penalty(), N=500, tol=1e-12, max_iter=2, seed=4, with_eta=False)
    assert not qsd.converged
    assert qsd.diagnostics["iterations"] == 2
    with pytest.raises(InvalidParameter):
        qsd_fixed_point(bernoulli, lipschitz_demo_penalty(), tol=0.0)


def test_monte_carlo_iteration_with_resampling(bernoulli):
    qsd = qsd_fixed_point(bernoulli, lipschitz_demo_penalty(), N=2000, tol=0.08, max_iter=20, seed=5, compression="stratified", cap=1, with_eta=False)
    assert qsd.converged
    assert qsd.measure.size == 2000


def test_nu_q_reweights_by_eta(bernoulli):
    flat = qsd_fixed_point(bernoulli, constant_survival(0.9), N=1000, seed=6, eta_N=20)
    assert np.allclose(nu_q(flat).weights, flat.measure.weights)

    penalty = lipschitz_demo_penalty()
    qsd = qsd_fixed_point(bernoulli, penalty, N=1000, seed=7, eta_N=400)
    law = nu_q(qsd)
    assert law.info["interpolated"]
    assert np.all(law.weights > 0)
    assert law.weights.sum() == pytest.approx(1.0)
    # the Q-process started from nu_Q stays there
    marginal = q_process_marginal(bernoulli, penalty, law, 3, T=15, N=20_000, seed=8)
    assert w1_quantile(marginal, law) <= 0.05


def test_eta_normalized_against_qsd(bernoulli):
    qsd = qsd_fixed_point(bernoulli, lipschitz_demo_penalty(), N=1000, seed=9, eta_N=400)
    values, _ = qsd.eta.interpolate(qsd.measure.points)
    assert np.dot(qsd.measure.weights, values) == pytest.approx(1.0)

"""Tests for the exact Wasserstein solvers and the duality-gap diagnostic."""

import numpy as np
import pytest

from penalized.errors import InstanceTooLarge, InvalidTestFunction, UnsupportedMetric
from penalized.metric import (
    WeightedEnsemble,
    absolute_metric,
    custom_metric,
    ensemble_w1,
    independent_plan,
    kantorovich_gap,
    pdmp_metric,
    truncate_metric,
    w1_discrete,
    w1_quantile,
    w1_uniform,
)
from penalized.models import bernoulli_convolution, lipschitz_demo_penalty
from penalized.process import exact_conditional_law

ABS = absolute_metric(-2, 2)


def random_ensemble(rng, size):
    return WeightedEnsemble(rng.uniform(-2, 2, size), rng.dirichlet(np.ones(size)))


def test_quantile_examples():
    assert w1_quantile(WeightedEnsemble([0.3], [1.0]), WeightedEnsemble([-1.2], [1.0])) == pytest.approx(1.5)
    assert w1_quantile(WeightedEnsemble([-1.0, 1.0], [0.5, 0.5]), WeightedEnsemble([0.0], [1.0])) == pytest.approx(1.0)
    mu = random_ensemble(np.random.default_rng(1), 30)
    assert w1_quantile(mu, mu) == 0.0


def test_quantile_rejects_vector_states():
    rows = WeightedEnsemble([[0.0, 0.0], [1.0, 1.0]], [0.5, 0.5])
    with pytest.raises(UnsupportedMetric):
        w1_quantile(rows, rows)


def test_discrete_matches_quantile_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        mu = random_ensemble(rng, int(rng.integers(1, 257)))
        nu = random_ensemble(rng, int(rng.integers(1, 257)))
        cost, plan = w1_discrete(mu, nu, ABS)
        assert abs(cost - w1_quantile(mu, nu)) <= 1e-9
        assert plan.marginal_error() <= 1e-10
        assert cost == pytest.approx(float(np.sum(plan.cost_contrib)), abs=1e-12)


def test_discrete_dirac_and_identical_measures():
    cost, plan = w1_discrete(WeightedEnsemble([0.5], [1.0]), WeightedEnsemble([-1.0], [1.0]), ABS)
    assert cost == pytest.approx(1.5)
    assert plan.entries == [(0, 0, 1.0)]
    two = WeightedEnsemble([0.0, 1.0], [0.5, 0.5])
    assert w1_discrete(two, two, ABS)[0] == pytest.approx(0.0, abs=1e-15)


def test_discrete_symmetry_triangle_and_truncation():
    rng = np.random.default_rng(7)
    truncated = truncate_metric(ABS, 0.8)
    for _ in range(30):
        mu, nu, lam = (random_ensemble(rng, 40) for _ in range(3))
        forward = w1_discrete(mu, nu, ABS)[0]
        assert forward == pytest.approx(w1_discrete(nu, mu, ABS)[0], abs=1e-10)
        assert w1_discrete(mu, lam, ABS)[0] <= forward + w1_discrete(nu, lam, ABS)[0] + 1e-9
        capped = w1_discrete(mu, nu, truncated)[0]
        assert capped <= 0.8 * forward + 1e-9
        assert capped <= 1.0 + 1e-12


def test_discrete_respects_the_cap():
    mu = WeightedEnsemble.from_samples(np.linspace(-2, 2, 40))
    with pytest.raises(InstanceTooLarge):
        w1_discrete(mu, mu, ABS, cap=50)


def test_discrete_on_pdmp_states():
    mu = WeightedEnsemble([[0.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
    nu = WeightedEnsemble([[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
    assert w1_discrete(mu, nu, pdmp_metric(1.0))[0] == pytest.approx(0.25)


def test_duality_gap_is_nonnegative_for_lipschitz_test_functions():
    rng = np.random.default_rng(11)
    for _ in range(50):
        mu, nu = random_ensemble(rng, 25), random_ensemble(rng, 25)
        _, plan = w1_discrete(mu, nu, ABS)
        slopes = rng.uniform(-1, 1, 3)
        kinks = rng.uniform(-2, 2, 3)

        def phi(x):
            return sum(s * np.abs(x - k) for s, k in zip(slopes, kinks)) / 3

        gap = kantorovich_gap(plan, (phi(plan.source.points), phi(plan.target.points)))
        assert gap >= -1e-9


def test_duality_gap_examples():
    mu, nu = WeightedEnsemble([0.0], [1.0]), WeightedEnsemble([1.0], [1.0])
    _, plan = w1_discrete(mu, nu, ABS)
    assert kantorovich_gap(plan, ([0.0], [1.0])) == pytest.approx(0.0, abs=1e-12)
    assert kantorovich_gap(plan, [0.0, 0.0]) == pytest.approx(plan.cost)
    with pytest.raises(InvalidTestFunction):
        kantorovich_gap(plan, ([0.0], [3.0]))


def test_suboptimal_plan_has_positive_gap():
    rng = np.random.default_rng(5)
    mu, nu = random_ensemble(rng, 10), random_ensemble(rng, 10)
    cost, optimal = w1_discrete(mu, nu, ABS)
    product = independent_plan(mu, nu, ABS)
    assert product.cost > cost
    # the identity map is 1-Lipschitz; the optimal potential would close the gap
    gap = kantorovich_gap(product, (product.source.points, product.target.points))
    assert gap > 0


def test_w1_uniform_of_quantile_grid():
    n = 1000
    grid = WeightedEnsemble.from_samples(-2 + 4 * (np.arange(n) + 0.5) / n)
    assert w1_uniform(grid, -2, 2) == pytest.approx(4 / (4 * n))
    assert w1_uniform(WeightedEnsemble([0.0], [1.0]), -2, 2) == pytest.approx(1.0)


def test_ensemble_w1_routes_by_metric():
    rng = np.random.default_rng(4)
    mu, nu = random_ensemble(rng, 30), random_ensemble(rng, 40)
    assert ensemble_w1(mu, nu, ABS) == w1_quantile(mu, nu)
    # 0.2 * 4 < 1, so the truncation never binds
    small = truncate_metric(ABS, 0.2)
    assert ensemble_w1(mu, nu, small) == pytest.approx(0.2 * w1_quantile(mu, nu), rel=1e-7)


def test_ensemble_w1_over_the_cap_uses_the_whole_exact_law():
    # exact laws come out sorted by state
    law = exact_conditional_law(bernoulli_convolution(), lipschitz_demo_penalty(), 1.5, 8)
    assert law.size > 200
    origin = WeightedEnsemble([0.0], [1.0])
    distance = custom_metric(lambda x, y: abs(x - y), bound=4.0)
    mean_abs = w1_quantile(law, origin)
    assert ensemble_w1(law, origin, distance) == pytest.approx(mean_abs, rel=1e-7)
    # 100 mid-quantiles move each 1/100 of mass within its own cell
    assert ensemble_w1(law, origin, distance, cap=200) == pytest.approx(mean_abs, abs=0.04 + 1e-9)


def test_ensemble_w1_over_the_cap_on_sorted_vector_rows():
    x = np.linspace(-1, 1, 400)
    modes = (x > 0).astype(float)
    rows = WeightedEnsemble.from_samples(np.column_stack([x, modes])).merged()
    assert np.all(np.diff(rows.points[:, 0]) > 0)
    anchor = WeightedEnsemble([[0.0, 0.0]], [1.0])
    metric = pdmp_metric(1.0)
    expected = float(np.mean(np.where(modes == 1, 1.0, np.abs(x) / 2)))
    assert ensemble_w1(rows, anchor, metric) == pytest.approx(expected, rel=1e-7)
    compressed = ensemble_w1(rows, anchor, metric, cap=200)
    assert compressed == pytest.approx(expected, abs=0.15)
    assert ensemble_w1(rows, anchor, metric, cap=200) == compressed


def test_thin_keeps_both_tails():
    law = WeightedEnsemble.from_samples(np.linspace(-2, 2, 1001))
    thinned = law.thin(10)
    assert thinned.size == 10
    assert thinned.points.min() < -1.5
    assert thinned.points.max() > 1.5
    assert law.thin(2000) is law

from fractions import Fraction

import numpy as np
import pytest
import sympy

from penalized.errors import InvalidParameter, RequiresExactArithmetic
from penalized.models import (
    CATALOG,
    bernoulli_convolution,
    bistable_pdmp,
    build_entry,
    identity_half_mixture,
    irf_demo_penalty,
    iterated_functions,
    lipschitz_demo_penalty,
    lipschitz_law,
    pdmp_demo_penalty,
    penalty_counterexample_abs,
    penalty_counterexample_rational,
    switched_linear,
)
from penalized.process import CLOSED_FORM_CUBIC, RK4, simulate_discrete


def test_bernoulli_step_is_exact_on_fractions():
    model = bernoulli_convolution()
    assert model.step(Fraction(1), 1) == Fraction(3, 2)
    assert model.step(np.array([-2.0, 2.0]), np.array([1, -1])).tolist() == [0.0, 0.0]
    assert lipschitz_law(model)[0].tolist() == [0.5, 0.5]


def test_punctured_space_excludes_zero_and_endpoints():
    space = bernoulli_convolution(punctured=True).state_space
    assert space.contains(np.array([-2.0, 0.0, 2.0, 0.5])).tolist() == [False, False, False, True]


def test_iterated_functions_rejects_expanding_maps():
    with pytest.raises(InvalidParameter):
        iterated_functions([(lambda x: 2 * x, 2.0, 1.0)])


def test_identity_half_mixture_steps_by_index():
    model = identity_half_mixture(0.25)
    assert model.step(np.array([1.0, 1.0]), np.array([0, 1])).tolist() == [1.0, 0.5]
    assert model.float_probs.tolist() == pytest.approx([0.25, 0.75])
    path = simulate_discrete(model, 1.0, 10, seed=5)
    assert all(0 < x <= 1 for x in path.states)


def test_lipschitz_demo_penalty_bounds():
    penalty = lipschitz_demo_penalty(0.1, 0.2)
    values = penalty.eval(np.linspace(-2, 2, 9))
    assert values.min() == pytest.approx(penalty.lower)
    assert values.max() == pytest.approx(penalty.upper)
    assert penalty.oscillation == pytest.approx(0.2)


def test_counterexample_abs_values():
    penalty = penalty_counterexample_abs()
    assert penalty.eval(Fraction(-1)) == Fraction(1, 2)
    assert penalty.eval(1.5) == 0.75
    assert not penalty.rho_lipschitz


def test_counterexample_rational_needs_exact_states():
    penalty = penalty_counterexample_rational()
    assert penalty.eval(Fraction(1, 3)) == Fraction(1, 2)
    assert penalty.eval(Fraction(-1, 3)) == 1
    assert penalty.eval(sympy.sqrt(2) - 1) == 1
    assert penalty.eval(sympy.Rational(1, 4)) == sympy.Rational(1, 2)
    with pytest.raises(RequiresExactArithmetic):
        penalty.eval(0.5)


def test_switched_linear_validation_and_radius():
    model = switched_linear([[-0.3, 0.0], [0.0, -0.5]], [1.0, 0.0])
    assert model.radius == pytest.approx(2.0)
    assert model.inward_excess() <= 0
    with pytest.raises(InvalidParameter):
        switched_linear([[0.1, 0.0], [0.0, -1.0]], [1.0, 0.0])


def test_bistable_integrators_agree():
    rk4, _ = bistable_pdmp(2.0, -1.0, 0.5, integrator=RK4)
    exact, penalty = bistable_pdmp(2.0, -1.0, 0.5, integrator=CLOSED_FORM_CUBIC)
    x = np.array([[0.3], [-1.2], [1.4]])
    modes = np.array([1, 0, 1])
    t = np.array([0.7, 1.3, 2.0])
    assert np.allclose(rk4.flow(x, modes, t), exact.flow(x, modes, t), atol=1e-7)
    assert penalty.mode_rates == (0.0, 0.5)
    with pytest.raises(InvalidParameter):
        bistable_pdmp(-1.0, -1.0, 0.5)


def test_pdmp_demo_penalty_declared_lipschitz_holds():
    model = switched_linear([[-0.3, 0.0], [0.0, -0.5]], [1.0, 0.0])
    penalty = pdmp_demo_penalty(model.radius)
    entry = build_entry("switched-linear")
    rng = np.random.default_rng(2)
    rows = np.column_stack([rng.uniform(-1.4, 1.4, size=(80, 2)), rng.integers(0, 2, 80)])
    assert penalty.lipschitz_excess(entry.metric, rows) <= 1e-12


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_every_catalog_entry_builds(name):
    entry = build_entry(name)
    assert entry.name == name
    assert entry.coupling.model is entry.model


def test_build_entry_swaps_penalty_and_rejects_unknown_names():
    entry = build_entry("bernoulli", penalty="constant-survival", penalty_params={"c": 0.5})
    assert entry.penalty.lower == 0.5
    with pytest.raises(InvalidParameter):
        build_entry("nope")
    with pytest.raises(InvalidParameter):
        build_entry("bernoulli", penalty="nope")


def test_irf_demo_penalty_has_requested_oscillation():
    penalty = irf_demo_penalty(0.8)
    assert penalty.oscillation == 0.8
    assert penalty.params == {"osc": 0.8}
    assert float(penalty.eval(-2.0)) == pytest.approx(1.0)
    assert float(penalty.eval(2.0)) == pytest.approx(np.exp(-0.8))

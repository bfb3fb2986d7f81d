import math

import numpy as np
import pytest

from penalized.criteria import (
    alpha_explicit,
    as_contraction_constants,
    beta_kappa,
    cftk_transfer,
    constant_bundle,
    constants_from_coupling,
    fenchel_legendre,
    irf_condition,
    proof_constants,
    r_threshold,
    switching_gap,
    theta_eig,
)
from penalized.errors import DegenerateConstants, InvalidConstants, InvalidParameter
from penalized.models import identity_half_mixture, lipschitz_law


def _random_tuples(size, seed=0):
    rng = np.random.default_rng(seed)
    for k in range(size):
        gamma = rng.uniform(0.01, 5.0)
        C_A = 1.0 + rng.exponential(2.0)
        C_B = rng.exponential(1.0)
        dbar = rng.uniform(0.1, 5.0)
        C_C = (1.0 + C_B * dbar) ** 2 if k % 2 else 1.0 + rng.exponential(1.0)
        yield gamma, C_A, C_B, C_C, dbar


@pytest.mark.parametrize("gamma,dbar", [(0.1, 1.0), (math.log(2), 4.0), (3.0, 0.5)])
def test_alpha_is_gamma_without_penalty_effect(gamma, dbar):
    assert alpha_explicit(gamma, 1.0, 0.0, 1.0, dbar) == pytest.approx(gamma, rel=1e-14)


def test_alpha_never_exceeds_gamma():
    for gamma, C_A, C_B, C_C, dbar in _random_tuples(1000):
        assert alpha_explicit(gamma, C_A, C_B, C_C, dbar) <= gamma * (1 + 1e-12)


def test_alpha_limit_for_vanishing_penalty_constant():
    C_B, dbar, C_A, gamma = 1e-9, 1.0, 2.0, 0.7
    alpha = alpha_explicit(gamma, C_A, C_B, (1 + C_B * dbar) ** 2, dbar)
    assert alpha == pytest.approx(gamma * math.log(2) / math.log(2 * C_A), rel=1e-6)


def test_alpha_rejects_invalid_constants(caplog):
    with pytest.raises(InvalidConstants):
        alpha_explicit(1.0, 0.5, 0.0, 1.0, 1.0)
    with pytest.raises(InvalidConstants):
        alpha_explicit(1.0, 1.0, 0.0, 0.9, 1.0)
    assert alpha_explicit(1.0, 1.0, 0.5, 1.0, 1.0) == 0.0
    assert "degenerates" in caplog.text


def test_beta_kappa():
    assert beta_kappa(0.0, 1.0) == (0.5, 0.0)
    beta, kappa = beta_kappa(0.3, 2.0)
    assert beta == pytest.approx(0.75)
    assert kappa == pytest.approx(1.2)
    assert beta_kappa(0.0, 3.0)[1] == 0.0
    with pytest.raises(DegenerateConstants):
        beta_kappa(1.0, 1.0)


def test_contraction_constants():
    assert as_contraction_constants(1.0, 1.0, 0.0, 0.0, 1.0) == (0.0, 1.0)
    C_B, C_C = as_contraction_constants(1.0, 1.0, 1.0, 0.5, 1.0, "continuous")
    assert C_B == pytest.approx(math.e)
    assert C_C == pytest.approx((1 + math.e) ** 2)
    C_B, C_C = as_contraction_constants(1.0, math.log(2), 0.05, 0.2, 4.0)
    rate = math.exp(0.2) * 0.05 / 0.5
    assert C_B == pytest.approx(rate * math.exp(4 * rate))
    with pytest.raises(InvalidParameter):
        as_contraction_constants(1.0, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(InvalidParameter):
        as_contraction_constants(1.0, 1.0, 1.0, 1.0, 1.0, "hybrid")


def test_cftk_transfer():
    result = cftk_transfer(1.0, 2.0, 0.5)
    assert result.accepted and (result.C_A, result.gamma_A) == (1.0, 1.5)
    boundary = cftk_transfer(1.0, 0.5, 0.5)
    assert not boundary.accepted and boundary.margin == 0.0
    assert cftk_transfer(3.0, 0.4, 0.0).gamma_A == 0.4


def test_fenchel_legendre_examples():
    assert fenchel_legendre(([1.0], [1.0]), 1.0) == 0.0
    law = ([1.0, 0.5], [0.3, 0.7])
    assert fenchel_legendre(law, 1.0) == pytest.approx(math.log(1 / 0.3), rel=1e-12)
    assert fenchel_legendre(law, 0.65) == pytest.approx(0.0, abs=1e-8)
    assert fenchel_legendre(law, 0.2) == 0.0
    assert math.isinf(fenchel_legendre(([0.5, 0.8], [0.5, 0.5]), 0.9))


def test_fenchel_legendre_matches_bernoulli_entropy():
    # two-point law on {0, 1}: Λ*(x) is the relative entropy of Bernoulli(x) to Bernoulli(p)
    p, x = 0.3, 0.6
    expected = x * math.log(x / p) + (1 - x) * math.log((1 - x) / (1 - p))
    assert fenchel_legendre(([0.0, 1.0], [1 - p, p]), x) == pytest.approx(expected, abs=1e-9)


def test_fenchel_legendre_is_convex():
    law = ([0.2, 0.5, 1.0], [0.3, 0.5, 0.2])
    grid = np.linspace(0.0, 0.99, 67)
    values = np.array([fenchel_legendre(law, x) for x in grid])
    midpoints = values[1:-1]
    assert np.all(midpoints <= (values[:-2] + values[2:]) / 2 + 1e-8)


def test_fenchel_legendre_rejects_bad_laws():
    with pytest.raises(InvalidParameter):
        fenchel_legendre(([1.0, 0.5], [0.3, 0.3]), 0.5)
    with pytest.raises(InvalidParameter):
        fenchel_legendre(([1.5], [1.0]), 0.5)


def test_irf_condition():
    holds = irf_condition(([0.5], [1.0]), 5.0)
    assert holds.holds and holds.q == 0.0 and holds.epsilon is not None and holds.rate > 0
    rejected = irf_condition(([1.0, 0.5], [0.5, 0.5]), math.log(3))
    assert not rejected.holds and rejected.margin < 0 and rejected.epsilon is None
    verdict = irf_condition(lipschitz_law(identity_half_mixture(0.1)), 1.0)
    assert verdict.holds
    assert verdict.q == pytest.approx(0.1)
    assert verdict.threshold == pytest.approx(math.exp(-1))
    assert 0 < verdict.epsilon < 0.5 and verdict.chi > 0


def test_theta_examples():
    assert theta_eig(0.0, 0.0) == 0.0
    for q in (-3.0, -0.2, 0.0, 0.7, 2.5):
        assert theta_eig(q, q) == pytest.approx(q, abs=1e-14)


def test_theta_matches_eigenvalues():
    rng = np.random.default_rng(3)
    for q_plus, q_minus in rng.uniform(-5, 5, size=(1000, 2)):
        oracle = np.linalg.eigvalsh(np.array([[-1 + q_plus, 1.0], [1.0, -1 + q_minus]]))[-1]
        assert abs(theta_eig(q_plus, q_minus) - oracle) <= 1e-12


def test_r_threshold():
    assert switching_gap(2.0, -1.0, 0.0) == pytest.approx(-theta_eig(2.0, -1.0))
    assert switching_gap(2.0, -1.0, 0.0) < 0
    result = r_threshold(2.0, -1.0, 1e4, 1.0)
    assert result.found
    assert result.gamma_at_r > 0 >= switching_gap(2.0, -1.0, result.r - 1.0)
    assert abs(result.gamma_at_r_max - 1.0) < 1e-3
    assert result.limit == 1.0
    stricter = r_threshold(2.0, -1.0, 1e3, 0.5, target=0.5)
    assert stricter.gamma_at_r > 0.5 >= switching_gap(2.0, -1.0, stricter.r - 0.5)


def test_r_threshold_not_found_and_invalid():
    result = r_threshold(2.0, -1.0, 0.5, 0.5)
    assert not result.found and result.gamma_at_r_max < 0
    with pytest.raises(InvalidParameter):
        r_threshold(-1.0, -1.0, 10.0, 1.0)


def test_proof_constants_reproduce_alpha():
    for gamma, C_A, C_B, C_C, dbar in _random_tuples(200, seed=5):
        if C_C == 1.0:
            continue
        constants = proof_constants(gamma, C_A, C_B, C_C, dbar)
        assert constants.alpha == pytest.approx(alpha_explicit(gamma, C_A, C_B, C_C, dbar), rel=1e-10)
        assert constants.t0 == max(constants.t1, constants.t2)
        assert constants.C1 >= constants.C0 > 0


def test_bundles():
    bundle = constants_from_coupling(1.0, math.log(2), 0.05, 0.2, 4.0)
    assert 0.5 < bundle.beta < 1 and bundle.kappa > 0
    assert bundle.alpha <= math.log(2)
    assert bundle.C_H == pytest.approx(1 + bundle.C_B * 4.0)
    trivial = constant_bundle(1.0, 1.0, 0.0, 1.0, 2.0)
    assert (trivial.beta, trivial.kappa, trivial.alpha) == (0.5, 0.0, 1.0)
    assert trivial.as_dict()["C_H"] == 1.0

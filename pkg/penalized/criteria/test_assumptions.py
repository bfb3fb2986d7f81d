import json
import math

import numpy as np
import pytest

from penalized.criteria import (
    aprime_envelope,
    as_contraction_constants,
    chebyshev_points,
    cross_check_equivalence,
    default_grid,
    default_pairs,
    estimate_A,
    estimate_B,
    estimate_C,
    estimate_H,
)
from penalized.errors import InvalidParameter
from penalized.models import bernoulli_convolution, build_entry, lipschitz_demo_penalty, penalty_counterexample_abs
from penalized.process import constant_survival, couple_synchronous

TIMES = list(range(0, 13))


@pytest.fixture
def bernoulli():
    return bernoulli_convolution()


@pytest.fixture
def synchronous(bernoulli):
    return couple_synchronous(bernoulli)


def _demo_constants():
    return as_contraction_constants(1.0, math.log(2), lipschitz_demo_penalty().lipschitz_const, lipschitz_demo_penalty().oscillation, 4.0)


def test_chebyshev_grid_and_pairs(bernoulli):
    points = chebyshev_points(-2.0, 2.0, 8)
    assert np.all(np.diff(points) > 0) and np.all(np.abs(points) < 2)
    assert len(default_pairs(bernoulli)) == 28
    punctured = bernoulli_convolution(punctured=True)
    assert min(abs(p) for p in default_grid(punctured)) > 0.3
    with pytest.raises(InvalidParameter):
        chebyshev_points(0.0, 1.0, 1)


def test_pdmp_grid_crosses_modes():
    model = build_entry("switched-linear").model
    grid = default_grid(model, 4)
    assert len(grid) == 8
    assert sorted({int(row[-1]) for row in grid}) == [0, 1]


def test_constant_penalty_contracts_at_log_two(synchronous):
    report = estimate_A(synchronous, constant_survival(0.7), [(-1.5, 0.5), (0.2, 1.9)], TIMES, exact=True)
    assert report.constants["gamma_A"] == pytest.approx(math.log(2), rel=1e-9)
    assert report.constants["C_A"] == pytest.approx(1.0, rel=1e-9)
    assert report.constants["r2_min"] == pytest.approx(1.0)


def test_monte_carlo_and_exact_coupling_curves_agree(synchronous):
    pairs = [(-1.0, 1.2), (0.3, 0.4)]
    penalty = lipschitz_demo_penalty()
    exact = estimate_A(synchronous, penalty, pairs, [0, 3, 6], exact=True)
    sampled = estimate_A(synchronous, penalty, pairs, [0, 3, 6], N=500, seed=4)
    # distances contract deterministically under the synchronous coupling
    assert np.allclose(sampled.curves["value"], exact.curves["value"], rtol=1e-9)
    assert sampled.constants["gamma_A"] == pytest.approx(math.log(2), rel=1e-9)


def test_abs_counterexample_wasserstein_witness():
    model = bernoulli_convolution(punctured=True)
    pairs = [(-1.5, 0.7), (0.3, 1.1), (-0.4, -1.8)]
    report = estimate_A(couple_synchronous(model), penalty_counterexample_abs(), pairs, TIMES, exact=True, wasserstein=True)
    assert report.wasserstein["value"].min() >= 0.5 - 1e-9
    assert report.constants["wasserstein_ratio_final_max"] >= 0.5 - 1e-9
    assert report.constants["gamma_A"] == pytest.approx(math.log(2), rel=1e-9)


def test_degenerate_pairs_are_skipped(synchronous, caplog):
    report = estimate_A(synchronous, constant_survival(0.5), [(0.5, 0.5), (0.1, 0.9)], [0, 2], exact=True)
    assert set(report.curves["pair_id"]) == {1}
    assert "skipped" in caplog.text
    with pytest.raises(InvalidParameter):
        estimate_A(synchronous, constant_survival(0.5), [(0.5, 0.5)], [0, 2], exact=True)


def test_report_frames_and_json(synchronous):
    report = estimate_A(synchronous, lipschitz_demo_penalty(), [(-1.0, 1.0)], [0, 1, 2], exact=True)
    assert list(report.to_frame().columns) == ["pair_id", "t", "value", "stderr"]
    payload = json.loads(report.to_json())
    assert payload["tag"] == "A" and payload["pairs"] == [[-1.0, 1.0]]
    assert payload["constants"]["C_A"] >= 1.0


def test_aprime_envelope_is_nonincreasing(synchronous):
    report = estimate_A(synchronous, lipschitz_demo_penalty(), None, [0, 2, 4, 6], exact=True)
    envelope = aprime_envelope(report)
    assert envelope.tag == "Aprime"
    assert np.all(np.diff(envelope.curves["value"]) <= 0)
    assert envelope.constants["gamma_final"] < envelope.constants["gamma_initial"]


def test_b_vanishes_for_constant_penalty(bernoulli):
    report = estimate_B(bernoulli, constant_survival(0.6), [(-1.0, 1.0), (0.4, 0.4)], TIMES)
    assert report.info["method"] == "exact"
    assert report.constants["C_B"] == 0.0


def test_exact_b_stays_below_closed_form(bernoulli):
    C_B, _ = _demo_constants()
    report = estimate_B(bernoulli, lipschitz_demo_penalty(), None, TIMES, method="exact")
    assert 0 < report.constants["C_B"] <= C_B


def test_b_monte_carlo_brackets_exact(bernoulli):
    pairs = [(-1.2, 1.4)]
    exact = estimate_B(bernoulli, lipschitz_demo_penalty(), pairs, [4, 8], method="exact")
    sampled = estimate_B(bernoulli, lipschitz_demo_penalty(), pairs, [4, 8], N=20_000, seed=6, method="mc")
    gap = np.abs(sampled.curves["value"].to_numpy() - exact.curves["value"].to_numpy())
    assert np.all(gap <= 4 * sampled.curves["stderr"].to_numpy() + 1e-3)


def test_c_is_one_for_constant_penalty_and_equal_starts(synchronous):
    report = estimate_C(synchronous, constant_survival(0.5), [(-1.0, 1.0), (0.3, 0.3)], [0, 3, 6], N=300, seed=2)
    assert np.allclose(report.curves["value"], 1.0, atol=1e-12)
    assert report.constants["C_C"] == pytest.approx(1.0, abs=1e-12)
    same = estimate_C(synchronous, lipschitz_demo_penalty(), [(0.3, 0.3)], [0, 3, 6], N=300, seed=2)
    assert np.allclose(same.curves["value"], 1.0, atol=1e-12)


def test_exact_c_below_closed_form(synchronous):
    _, C_C = _demo_constants()
    report = estimate_C(synchronous, lipschitz_demo_penalty(), None, TIMES, exact=True)
    assert 1.0 <= report.constants["C_C"] <= C_C


def test_h_examples(bernoulli):
    C_B, _ = _demo_constants()
    flat = estimate_H(bernoulli, constant_survival(0.9), None, TIMES)
    assert flat.constants["C_H"] == pytest.approx(1.0)
    report = estimate_H(bernoulli, lipschitz_demo_penalty(), None, TIMES)
    assert report.curves["value"].iloc[0] == 1.0
    assert np.all(np.diff(report.curves["value"]) >= 0)
    assert 1.0 < report.constants["C_H"] <= 1 + C_B * 4.0
    with pytest.raises(InvalidParameter):
        estimate_H(bernoulli, lipschitz_demo_penalty(), [0.5], TIMES)


def test_pdmp_coupling_curve_runs():
    entry = build_entry("switched-linear")
    pairs = default_pairs(entry.model, 3)[:3]
    report = estimate_A(entry.coupling, entry.penalty, pairs, [0.0, 0.5, 1.0], N=200, seed=1)
    assert report.curves.shape == (9, 4)
    assert report.constants["C_A"] >= 1.0
    assert np.all(np.isfinite(report.curves["value"]))


def test_equivalence_on_lipschitz_demo(bernoulli, synchronous):
    report = cross_check_equivalence(bernoulli, lipschitz_demo_penalty(), synchronous, {"times": tuple(range(9)), "exact": True})
    assert report.standing_assumption
    assert report.a_decays and report.b_bounded and report.h_bounded
    assert report.consistent and not report.contradictions
    assert set(report.as_dict()["constants"]) >= {"A", "Aprime", "B", "C", "H"}


def test_equivalence_rejects_abs_counterexample():
    model = bernoulli_convolution(punctured=True)
    report = cross_check_equivalence(model, penalty_counterexample_abs(), couple_synchronous(model), {"times": tuple(range(9)), "exact": True})
    assert not report.standing_assumption
    assert not report.a_decays and not report.b_bounded and not report.h_bounded
    assert report.consistent

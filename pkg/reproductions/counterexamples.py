"""Penalties outside the Lipschitz setting, checked in exact arithmetic."""

import logging
import math
from fractions import Fraction

import numpy as np
import pandas as pd
import sympy

from penalized.errors import InvalidParameter
from penalized.metric import w1_quantile
from penalized.models import bernoulli_convolution, penalty_counterexample_abs, penalty_counterexample_rational
from penalized.process import enumerate_paths, exact_conditional_law, exact_coupled_expectation, exact_feynman_kac
from reproductions.common import finished, guarded

logger = logging.getLogger(__name__)

ARITHMETIC = ("rational", "float")


def _number(text: str, arithmetic: str):
    value = Fraction(text)
    return value if arithmetic == "rational" else float(value)


def _abs_moments(model, penalty, x, n):
    """(E_x[X_n G_n], E_x[|X_1|⋯|X_{n−1}|]) over every noise path."""
    mass, weighted, product = 0, 0, 0
    for states, probability in enumerate_paths(model, x, n):
        survival = 1
        for state in states[:-1]:
            survival *= penalty.eval(state)
        visited = 1
        for state in states[1:-1]:
            visited *= abs(state)
        mass += probability * survival
        weighted += probability * survival * states[-1]
        product += probability * visited
    return weighted / mass, product


@guarded
def counterexample_abs(seed: int, workers=None, x: str = "3/5", y: str = "-7/10", n_max: int = 12, arithmetic: str = "rational") -> dict:
    """p(x) = |x|/2: the synchronous coupling contracts, the conditional laws do not."""
    if arithmetic not in ARITHMETIC:
        raise InvalidParameter(f"arithmetic must be one of {ARITHMETIC}, got {arithmetic!r}")
    model = bernoulli_convolution(punctured=True)
    penalty = penalty_counterexample_abs()
    x, y = _number(x, arithmetic), _number(y, arithmetic)
    if x == y:
        raise InvalidParameter("the two starts must differ")
    gap = abs(x - y)
    rows = []
    for n in range(1, n_max + 1):
        mean_x, product_x = _abs_moments(model, penalty, x, n)
        mean_y, product_y = _abs_moments(model, penalty, y, n)
        bound = abs(mean_x - mean_y)
        w1 = w1_quantile(exact_conditional_law(model, penalty, float(x), n), exact_conditional_law(model, penalty, float(y), n))
        coupled = exact_coupled_expectation(model, None, float(x), float(y), n, lambda xs, ys, zx, zy: np.abs(xs - ys))
        rows.append(
            {
                "n": n,
                "mean_x": mean_x,
                "mean_y": mean_y,
                "product_x": product_x,
                "product_y": product_y,
                "lower_bound": bound,
                "w1": w1,
                "w1_ratio": w1 / float(gap),
                "coupled_distance": coupled,
            }
        )
    exact = arithmetic == "rational"

    def equal(a, b):
        return a == b if exact else abs(float(a) - float(b)) <= 1e-12

    checks = {
        "mean_is_half_start": all(equal(r["mean_x"], x / 2) and equal(r["mean_y"], y / 2) for r in rows),
        "product_is_one": all(equal(r["product_x"], 1) and equal(r["product_y"], 1) for r in rows),
        "bound_is_half_gap": all(equal(r["lower_bound"], gap / 2) for r in rows),
        "w1_above_bound": all(r["w1_ratio"] >= 0.5 - 1e-12 for r in rows),
        "coupling_contracts": all(abs(r["coupled_distance"] - float(gap) * 2.0 ** -r["n"]) <= 1e-12 for r in rows),
    }
    table = pd.DataFrame(rows)
    if exact:
        for column in ("mean_x", "mean_y", "product_x", "product_y", "lower_bound"):
            table[column] = table[column].map(str)
    report = {"start": [str(x), str(y)], "arithmetic": arithmetic, "lower_bound": str(gap / 2), "checks": checks}
    return finished(f"W1 between conditional laws stays above |x-y|/2 = {gap / 2}", {"bound": table}, report)


def _conditional_mean(model, penalty, x, n, f=None):
    """μP_n(f·id)/μP_n(f) for μ = δ_x, exactly."""
    if f is None:
        return exact_feynman_kac(model, penalty, x, n, f=lambda s: s) / exact_feynman_kac(model, penalty, x, n)
    return exact_feynman_kac(model, penalty, x, n, f=lambda s: f(s) * s) / exact_feynman_kac(model, penalty, x, n, f=f)


@guarded
def counterexample_rational(seed: int, workers=None, x: str = "1/3", n_max: int = 10, irrational: str = "sqrt(2)/2", irrational_up_to: int = 6) -> dict:
    """p = 1/2 on nonnegative rationals, 1 elsewhere: the conditional mean depends on the arithmetic of the start."""
    model = bernoulli_convolution()
    penalty = penalty_counterexample_rational()
    start = Fraction(x)
    other = sympy.sympify(irrational)
    if other.is_rational is not False:
        raise InvalidParameter(f"{irrational} is not irrational")
    rows = []
    for n in range(n_max + 1):
        lhs = _conditional_mean(model, penalty, start, n + 2)
        rhs = Fraction(1, 4) * _conditional_mean(model, penalty, start, n, penalty.eval) - Fraction(1, 6)
        closed = start / 2 ** (n + 2) - (1 - Fraction(1, 2 ** (n + 1))) / 3
        irrational_mean = _conditional_mean(model, penalty, other, n + 2) if n <= irrational_up_to else math.nan
        rows.append(
            {
                "n": n,
                "lhs": lhs,
                "rhs": rhs,
                "recursion_holds": lhs == rhs,
                "closed_form_holds": lhs == closed,
                "mean_float": float(lhs),
                "irrational_mean": float(irrational_mean),
                "irrational_expected": float(other / 2 ** (n + 2)) if n <= irrational_up_to else math.nan,
            }
        )
    ell = sympy.Symbol("ell")
    naive = sympy.solve(sympy.Eq(ell, ell / 4 - sympy.Rational(1, 6)), ell)[0]
    s = sympy.Symbol("s")
    uniform = sympy.integrate(s / 4, (s, -2, 2))
    limits = {"rational_start": "-1/3", "naive_fixed_point": str(naive), "uniform": str(uniform)}
    checks = {
        "recursion_exact": all(r["recursion_holds"] for r in rows),
        "closed_form_exact": all(r["closed_form_holds"] for r in rows),
        "naive_fixed_point": naive == sympy.Rational(-2, 9),
        "uniform_mean_zero": uniform == 0,
        "irrational_start_unpenalized": all(abs(r["irrational_mean"] - r["irrational_expected"]) <= 1e-12 for r in rows if r["n"] <= irrational_up_to),
    }
    table = pd.DataFrame(rows)
    table["lhs"] = table["lhs"].map(str)
    table["rhs"] = table["rhs"].map(str)
    report = {"start": str(start), "irrational_start": irrational, "arithmetic": "rational", "limits": limits, "checks": checks}
    return finished(f"conditional mean tends to {limits['rational_start']} along rational starts, not {limits['uniform']}", {"recursion": table}, report)


#====Declarations==================================================

counterexample_abs_declaration = {
    "name": "counterexample-abs",
    "section": "counter-example p(x) = |x|/2: contraction of (A) without contraction of conditional laws",
    "description": "Exact enumeration certifying W1(conditional laws from x and y) >= |x-y|/2 for every n although the synchronous coupling contracts",
    "parameters": {
        "type": "object",
        "properties": {
            "x": {"type": "string", "default": "3/5", "description": "first start, a rational in (-2, 2) minus {0}"},
            "y": {"type": "string", "default": "-7/10"},
            "n_max": {"type": "integer", "default": 12},
            "arithmetic": {"type": "string", "enum": list(ARITHMETIC), "default": "rational"},
        },
        "required": [],
    },
}

counterexample_rational_declaration = {
    "name": "counterexample-rational",
    "section": "counter-example with a rational-indicator penalty: no uniform limit of conditional laws",
    "description": "Exact check of the two-step recursion of conditional means from a rational start, with the limits -1/3 (exact), -2/9 (naive fixed point) and 0 (uniform law)",
    "parameters": {
        "type": "object",
        "properties": {
            "x": {"type": "string", "default": "1/3", "description": "rational start in [-2, 2]"},
            "n_max": {"type": "integer", "default": 10},
            "irrational": {"type": "string", "default": "sqrt(2)/2", "description": "irrational start, as a sympy expression"},
            "irrational_up_to": {"type": "integer", "default": 6, "description": "largest n evaluated symbolically from the irrational start"},
        },
        "required": [],
    },
}

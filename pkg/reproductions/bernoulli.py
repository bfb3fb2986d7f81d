"""Contraction, quasi-stationarity and Q-process experiments on the Bernoulli convolution demo."""

import logging
import math

import numpy as np
import pandas as pd

from penalized.criteria import constants_from_coupling, proof_constants
from penalized.estimators import (
    coupled_conditional_laws,
    coupled_q_process_marginals,
    estimate_eta,
    estimate_lambda0,
    exact_survival_curve,
    nu_q,
    q_process_marginal,
    qsd_fixed_point,
    quasi_ergodic,
    quasi_stationarity_residual,
    survival_curve,
)
from penalized.metric import WeightedEnsemble, w1_quantile, w1_uniform
from penalized.models import build_entry
from penalized.process import constant_survival, exact_conditional_law
from reproductions.common import finished, guarded, log_linear_fit, ratio_below, w1_stderr
from utils.export import estimate_record
from utils.rng import stream_rng

logger = logging.getLogger(__name__)

BOOTSTRAP_STREAM = 900_000


def _demo():
    entry = build_entry("bernoulli")
    return entry, entry.model, entry.penalty


@guarded
def bernoulli_wasserstein_decay(seed: int, workers=None, N: int = 100_000, times=None, x: float = -2.0, y: float = 2.0, exact_up_to: int = 12, replicates: int = 10) -> dict:
    """W1 between the conditional laws started at x and y, against n."""
    entry, model, penalty = _demo()
    times = list(range(5, 26)) if times is None else times
    metric = entry.metric
    rng = stream_rng(seed, BOOTSTRAP_STREAM)
    bundle = constants_from_coupling(1.0, math.log(2), penalty.lipschitz_const, penalty.oscillation, metric.bound)
    proof = proof_constants(bundle.gamma_A, bundle.C_A, bundle.C_B, bundle.C_C, bundle.dbar)
    rows = []
    for n in times:
        law_x, law_y = coupled_conditional_laws(entry.coupling, penalty, x, y, n, N, seed, workers)
        exact = math.nan
        if n <= exact_up_to:
            exact = w1_quantile(exact_conditional_law(model, penalty, x, n), exact_conditional_law(model, penalty, y, n))
        rows.append(
            {
                "n": n,
                "w1": w1_quantile(law_x, law_y),
                "stderr": w1_stderr(law_x, law_y, metric, rng, replicates, paired=True),
                "w1_exact": exact,
                "bound": proof.C1 * math.exp(-proof.alpha * n) * abs(x - y),
                "ess_x": law_x.ess,
                "ess_y": law_y.ess,
            }
        )
    table = pd.DataFrame(rows)
    fit = log_linear_fit(table["n"], table["w1"])
    checks = {"slope_negative_3sigma": fit["slope"] + 3 * fit["stderr"] <= -0.1}
    by_n = table.set_index("n")
    if 10 in by_n.index and 20 in by_n.index:
        checks["ratio_20_10_below_0.6"] = ratio_below(by_n.loc[20, "w1"], by_n.loc[10, "w1"], 0.6, by_n.loc[20, "stderr"], by_n.loc[10, "stderr"])
    with_exact = table.dropna(subset=["w1_exact"])
    if len(with_exact):
        gap = np.abs(with_exact["w1"] - with_exact["w1_exact"])
        checks["matches_enumeration"] = bool(np.all(gap <= 3 * with_exact["stderr"] + 1e-9 * with_exact["w1_exact"]))
    report = {
        "fit": fit,
        "constants": bundle.as_dict(),
        "proof_constants": proof.as_dict(),
        "start": [x, y],
        "N": N,
        "checks": checks,
    }
    return finished(f"W1 decays at rate {-fit['slope']:.4g} per step", {"w1_decay": table}, report)


@guarded
def qsd_fixed_point_experiment(seed: int, workers=None, N: int = 10_000, tol: float = 0.01, t0: int = 5, max_iter: int = 50, start: float = 1.5, constant: float = 0.9) -> dict:
    """Two starts of the QSD iteration meet; a constant penalty leaves the uniform law."""
    entry, model, penalty = _demo()
    metric = entry.metric
    spread = qsd_fixed_point(model, penalty, t0, N, tol, max_iter, seed, with_eta=False, workers=workers)
    dirac = qsd_fixed_point(model, penalty, t0, N, tol, max_iter, seed, initial=WeightedEnsemble.from_samples(np.array([start])), with_eta=False, workers=workers)
    flat = qsd_fixed_point(model, constant_survival(constant), t0, N, tol, max_iter, seed, with_eta=False, workers=workers)
    gap = w1_quantile(spread.measure, dirac.measure)
    residual = quasi_stationarity_residual(spread, model, penalty, metric, seed, workers=workers)
    to_uniform = w1_uniform(flat.measure, model.state_space.low, model.state_space.high)
    history = pd.concat(
        [
            pd.DataFrame({"run": name, "iteration": np.arange(1, len(q.diagnostics["history"]) + 1), "w1_step": q.diagnostics["history"], "rate": q.diagnostics["rates"]})
            for name, q in (("spread", spread), ("dirac", dirac), ("constant", flat))
        ],
        ignore_index=True,
    )
    checks = {
        "starts_agree": gap <= 3 * tol,
        "residual_below_2tol": residual <= 2 * tol,
        "constant_penalty_uniform": to_uniform <= 0.05,
        "constant_penalty_rate": abs(flat.lambda0 + math.log(constant)) <= 1e-3,
    }
    report = {
        "lambda0": estimate_record(spread.lambda0, N=N, seed=seed),
        "lambda0_constant": estimate_record(flat.lambda0, N=N, seed=seed, expected=-math.log(constant)),
        "w1_between_starts": gap,
        "residual": residual,
        "w1_constant_to_uniform": to_uniform,
        "iterations": {"spread": spread.diagnostics["iterations"], "dirac": dirac.diagnostics["iterations"], "constant": flat.diagnostics["iterations"]},
        "checks": checks,
    }
    converged = spread.converged and dirac.converged and flat.converged
    return finished(f"QSD iterates {gap:.3g} apart, residual {residual:.3g}", {"qsd_history": history, "qsd": spread.measure.to_frame()}, report, converged)


@guarded
def eta_survival(seed: int, workers=None, constant: float = 0.9, times=None, eta_times=None, grid_size: int = 32, exact: bool = True, N: int = 2000, x0: float = 0.0) -> dict:
    """λ₀ from survival curves and η on a grid, for a constant and a Lipschitz penalty."""
    entry, model, penalty = _demo()
    times = list(range(1, 17)) if times is None else times
    eta_times = [8, 12, 16] if eta_times is None else eta_times
    grid = model.state_space.sample_grid(grid_size)
    flat = constant_survival(constant)
    curves, eta_rows, fits = [], [], {}
    tables = {}
    for case, field in (("constant", flat), ("lipschitz-demo", penalty)):
        curve = exact_survival_curve(model, field, x0, times) if exact else survival_curve(model, field, x0, times, N, seed, workers)
        fit = estimate_lambda0(curve)
        fits[case] = fit
        curves.append(curve.to_frame().assign(case=case))
        for t in eta_times:
            table = estimate_eta(model, field, grid, t, fit, N, seed, exact=exact, workers=workers)
            tables[(case, t)] = table
            eta_rows.append(table.to_frame().assign(case=case, t=t))
    flat_eta = np.concatenate([tables[("constant", t)].values for t in eta_times])
    quotients = {t: tables[("lipschitz-demo", t)].lipschitz_quotient(entry.metric) for t in eta_times}
    demo_eta = np.concatenate([tables[("lipschitz-demo", t)].values for t in eta_times])
    checks = {
        "constant_rate": abs(fits["constant"].value + math.log(constant)) <= 1e-3,
        "constant_eta_flat": bool(np.max(np.abs(flat_eta - 1.0)) <= 0.02),
        "demo_eta_positive": bool(demo_eta.min() > 0.2),
        "demo_lipschitz_stable": max(quotients.values()) <= 2 * min(quotients.values()),
    }
    report = {
        "lambda0": {case: fit.as_dict() for case, fit in fits.items()},
        "eta_lipschitz_quotients": quotients,
        "eta_before_fit_window": {case: [t for t in eta_times if tables[(case, t)].info["before_fit_window"]] for case in fits},
        "exact": exact,
        "checks": checks,
    }
    tables_out = {"survival": pd.concat(curves, ignore_index=True), "eta": pd.concat(eta_rows, ignore_index=True)}
    return finished(f"lambda0 = {fits['lipschitz-demo'].value:.6g} for the demo penalty", tables_out, report)


def _nu_q(model, penalty, seed, qsd_N, workers):
    qsd = qsd_fixed_point(model, penalty, N=qsd_N, seed=seed, eta_t=20, workers=workers)
    return qsd, nu_q(qsd)


@guarded
def q_process_ergodicity(seed: int, workers=None, N: int = 4000, stationary_N: int = 20_000, s_early: int = 5, s_late: int = 15, s_stationary: int = 10, T: int = 60, x: float = -2.0, y: float = 2.0, qsd_N: int = 2000, replicates: int = 10) -> dict:
    """Q-process marginals forget their start and leave ν_Q invariant."""
    entry, model, penalty = _demo()
    metric = entry.metric
    rng = stream_rng(seed, BOOTSTRAP_STREAM)
    rows = []
    for s in (s_early, s_late):
        law_x, law_y = coupled_q_process_marginals(entry.coupling, penalty, x, y, s, T, N, seed, workers)
        rows.append({"s": s, "T": T, "w1": w1_quantile(law_x, law_y), "stderr": w1_stderr(law_x, law_y, metric, rng, replicates, paired=True), "ess": min(law_x.ess, law_y.ess)})
    table = pd.DataFrame(rows)
    qsd, invariant = _nu_q(model, penalty, seed, qsd_N, workers)
    marginal = q_process_marginal(model, penalty, invariant, s_stationary, T, stationary_N, seed, workers=workers)
    drift = w1_quantile(marginal, invariant)
    checks = {
        "forgets_start": ratio_below(rows[1]["w1"], rows[0]["w1"], 0.5, rows[1]["stderr"], rows[0]["stderr"]),
        "nu_q_invariant": drift <= 0.05,
    }
    report = {
        "lambda0": qsd.lambda0,
        "w1_marginal_to_nu_q": estimate_record(drift, N=stationary_N, seed=seed, s=s_stationary, T=T),
        "qsd_converged": qsd.converged,
        "checks": checks,
    }
    return finished(f"Q-process marginals {rows[1]['w1']:.3g} apart at s={s_late}", {"q_process": table, "nu_q": invariant.to_frame()}, report, qsd.converged)


@guarded
def quasi_ergodic_rate(seed: int, workers=None, times=None, N: int = 10_000, x0: float = 1.9, qsd_N: int = 2000) -> dict:
    """t·W1 between the occupation measure and ν_Q stays bounded."""
    entry, model, penalty = _demo()
    times = [8, 16, 32, 64] if times is None else times
    qsd, invariant = _nu_q(model, penalty, seed, qsd_N, workers)
    rows = []
    for t in times:
        occupation = quasi_ergodic(model, penalty, x0, t, N, seed, workers=workers)
        w1 = w1_quantile(occupation, invariant)
        rows.append({"t": t, "w1": w1, "scaled": t * w1, "ess": occupation.ess})
    table = pd.DataFrame(rows)
    spread = float(table["scaled"].max() / table["scaled"].min())
    report = {"scaled_spread": spread, "lambda0": qsd.lambda0, "x0": x0, "checks": {"scaled_bounded": spread <= 4.0}}
    return finished(f"t*W1 ranges over a factor {spread:.3g}", {"quasi_ergodic": table}, report, qsd.converged)


#====Declarations==================================================

bernoulli_wasserstein_decay_declaration = {
    "name": "bernoulli-wasserstein-decay",
    "section": "contraction of conditional laws, C1 e^{-alpha t} W_d(mu, nu)",
    "description": "W1 between the conditional laws of the Bernoulli convolution from -2 and 2 under the Lipschitz demo penalty, with a log-linear decay fit",
    "parameters": {
        "type": "object",
        "properties": {
            "N": {"type": "integer", "default": 100_000, "description": "paths per coupled run"},
            "times": {"type": "array", "items": {"type": "integer"}, "default": list(range(5, 26)), "description": "steps n"},
            "x": {"type": "number", "default": -2.0},
            "y": {"type": "number", "default": 2.0},
            "exact_up_to": {"type": "integer", "default": 12, "description": "largest n also computed by enumeration"},
            "replicates": {"type": "integer", "default": 10, "description": "bootstrap replicates per W1"},
        },
        "required": [],
    },
}

qsd_fixed_point_declaration = {
    "name": "qsd-fixed-point",
    "section": "quasi-stationary distribution as the fixed point of the conditional map",
    "description": "Fixed-point iteration of mu -> mu P_t0 / mu P_t0 1 from two starts, residual check, and the uniform law under a constant penalty",
    "parameters": {
        "type": "object",
        "properties": {
            "N": {"type": "integer", "default": 10_000},
            "tol": {"type": "number", "default": 0.01},
            "t0": {"type": "integer", "default": 5},
            "max_iter": {"type": "integer", "default": 50},
            "start": {"type": "number", "default": 1.5, "description": "Dirac start of the second run"},
            "constant": {"type": "number", "default": 0.9, "description": "survival probability of the constant penalty"},
        },
        "required": [],
    },
}

eta_survival_declaration = {
    "name": "eta-survival",
    "section": "absorption rate lambda_0 and the eigenfunction eta",
    "description": "Survival curves, the fitted decay rate and eta tables for a constant and the Lipschitz demo penalty",
    "parameters": {
        "type": "object",
        "properties": {
            "constant": {"type": "number", "default": 0.9},
            "times": {"type": "array", "items": {"type": "integer"}, "default": list(range(1, 17))},
            "eta_times": {"type": "array", "items": {"type": "integer"}, "default": [8, 12, 16]},
            "grid_size": {"type": "integer", "default": 32},
            "exact": {"type": "boolean", "default": True, "description": "enumerate noise paths instead of sampling"},
            "N": {"type": "integer", "default": 2000, "description": "paths per grid point when sampling"},
            "x0": {"type": "number", "default": 0.0},
        },
        "required": [],
    },
}

q_process_ergodicity_declaration = {
    "name": "q-process-ergodicity",
    "section": "Q-process: exponential ergodicity towards nu_Q",
    "description": "W1 between Q-process marginals from -2 and 2 at two times, and invariance of the estimated nu_Q",
    "parameters": {
        "type": "object",
        "properties": {
            "N": {"type": "integer", "default": 4000},
            "stationary_N": {"type": "integer", "default": 20_000},
            "s_early": {"type": "integer", "default": 5},
            "s_late": {"type": "integer", "default": 15},
            "s_stationary": {"type": "integer", "default": 10},
            "T": {"type": "integer", "default": 60},
            "x": {"type": "number", "default": -2.0},
            "y": {"type": "number", "default": 2.0},
            "qsd_N": {"type": "integer", "default": 2000},
            "replicates": {"type": "integer", "default": 10},
        },
        "required": [],
    },
}

quasi_ergodic_rate_declaration = {
    "name": "quasi-ergodic-rate",
    "section": "quasi-ergodic distribution, W1 rate C/t",
    "description": "t times W1 between the penalized occupation measure and nu_Q for t in {8, 16, 32, 64}",
    "parameters": {
        "type": "object",
        "properties": {
            "times": {"type": "array", "items": {"type": "integer"}, "default": [8, 16, 32, 64]},
            "N": {"type": "integer", "default": 10_000},
            "x0": {"type": "number", "default": 1.9},
            "qsd_N": {"type": "integer", "default": 2000},
        },
        "required": [],
    },
}

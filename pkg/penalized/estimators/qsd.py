"""Quasi-stationary distribution by iterating μ ↦ μP_{t₀}/μP_{t₀}𝟙 on N-point ensembles."""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from penalized.errors import InvalidParameter
from penalized.metric import WeightedEnsemble, absolute_metric, ensemble_w1, pdmp_metric
from penalized.process import is_discrete, propagate
from penalized.process.dynamics import check_duration
from penalized.estimators.conditional import start_states
from penalized.estimators.parallel import run_blocks, stack_blocks
from penalized.estimators.survival import EtaTable, estimate_eta
from utils.rng import stream_rng
from utils.settings import get_settings

logger = logging.getLogger(__name__)

DEFAULT_T0 = 5
DEFAULT_ETA_GRID = 64
COMPRESSIONS = ("quantile", "stratified", "multinomial")


@dataclass(frozen=True)
class QsdEstimate:
    measure: WeightedEnsemble
    lambda0: float
    eta: Optional[EtaTable]
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged"))

    def to_json(self) -> str:
        diagnostics = {k: v for k, v in self.diagnostics.items() if k != "history"}
        return json.dumps({"estimand": "qsd", "lambda0": self.lambda0, "support": self.measure.size, **diagnostics})


def default_metric(model):
    if is_discrete(model):
        return absolute_metric(model.state_space.low, model.state_space.high)
    return pdmp_metric(model.radius)


def default_initial(model, N: int) -> WeightedEnsemble:
    """Evenly spread start: an interior grid for discrete models, the origin in every mode for PDMPs."""
    if is_discrete(model):
        return WeightedEnsemble.from_samples(model.state_space.sample_grid(N))
    rows = np.zeros((N, model.dim + 1))
    rows[:, -1] = np.arange(N) % model.n_modes
    return WeightedEnsemble.from_samples(rows)


def default_eta_grid(model, measure: WeightedEnsemble, size: int = DEFAULT_ETA_GRID) -> np.ndarray:
    if is_discrete(model):
        return model.state_space.sample_grid(size)
    picks = np.linspace(0, measure.size - 1, min(size, measure.size)).astype(int)
    return np.asarray(measure.points[np.argsort(measure.points[:, -1], kind="stable")][picks])


def _expandable(model, size: int, t0, cap: int) -> bool:
    return is_discrete(model) and model.is_finite and size * len(model.noise_values) ** int(t0) <= cap


def expand_exact(model, penalty, ensemble: WeightedEnsemble, n: int) -> WeightedEnsemble:
    """μP_n over every noise path from every support point; ``info['mass']`` is μP_n𝟙."""
    values = np.asarray(model.noise_values)
    probs = model.float_probs
    k = len(values)
    states = np.asarray(ensemble.points, dtype=float)
    mass = ensemble.weights / ensemble.weights.sum()
    for _ in range(n):
        if penalty is not None:
            mass = mass * np.asarray(penalty.eval(states), dtype=float)
        states = model.step(np.repeat(states, k), np.tile(values, len(states)))
        mass = (mass[:, None] * probs[None, :]).reshape(-1)
    total = float(mass.sum())
    return WeightedEnsemble(states, mass / total, True, {"mass": total})


def _monte_carlo_step(model, penalty, ensemble: WeightedEnsemble, t0, N: int, seed: int, stream: int, workers):
    def task(start, count, rng):
        return propagate(model, penalty, start_states(model, ensemble, count, rng), t0, rng)

    states, log_weights = stack_blocks(run_blocks(task, N, seed, workers, stream_offset=stream))
    stepped = WeightedEnsemble.from_log_weights(states, log_weights)
    return WeightedEnsemble(stepped.points, stepped.weights, True, dict(stepped.info, mass=math.exp(stepped.info["log_mean_weight"])))


def _compress(ensemble: WeightedEnsemble, N: int, compression: str, rng) -> WeightedEnsemble:
    if compression == "quantile" and ensemble.is_scalar:
        return ensemble.quantize(N)
    scheme = "stratified" if compression == "quantile" else compression
    return ensemble.resample(N, rng, scheme)


def conditional_step(model, penalty, ensemble: WeightedEnsemble, t0, N: int, seed: int = 0, stream: int = 0, cap: Optional[int] = None, workers=None) -> WeightedEnsemble:
    """One application of μ ↦ μP_{t₀}/μP_{t₀}𝟙, before compression."""
    cap = get_settings().enumeration_cap if cap is None else cap
    if _expandable(model, ensemble.size, t0, cap):
        return expand_exact(model, penalty, ensemble, int(t0))
    return _monte_carlo_step(model, penalty, ensemble, t0, N, seed, stream, workers)


def qsd_fixed_point(
    model,
    penalty,
    t0=DEFAULT_T0,
    N: int = 10_000,
    tol: float = 0.01,
    max_iter: int = 50,
    seed: int = 0,
    initial: Optional[WeightedEnsemble] = None,
    compression: str = "quantile",
    metric=None,
    eta_grid=None,
    eta_t=None,
    eta_N: int = 2000,
    with_eta: bool = True,
    cap: Optional[int] = None,
    workers: Optional[int] = None,
) -> QsdEstimate:
    """Iterate the conditional map until successive iterates are ``tol``-close in W1.

    λ̂₀ is −log μP_{t₀}𝟙 / t₀ averaged over the second half of the iterations.
    A run that exhausts ``max_iter`` is returned with ``converged`` false.
    """
    check_duration(model, t0)
    if t0 <= 0 or tol <= 0 or max_iter < 1 or N < 2:
        raise InvalidParameter("need t0 > 0, tol > 0, max_iter >= 1 and N >= 2")
    if compression not in COMPRESSIONS:
        raise InvalidParameter(f"unknown compression {compression!r}")
    metric = metric or default_metric(model)
    current = initial if initial is not None else default_initial(model, N)
    rng = stream_rng(seed, 0)
    rates, history = [], []
    converged = False
    distance = math.inf
    for iteration in range(1, max_iter + 1):
        stepped = conditional_step(model, penalty, current, t0, N, seed, stream=iteration * 1000, cap=cap, workers=workers)
        rates.append(-math.log(stepped.info["mass"]) / t0)
        following = _compress(stepped, N, compression, rng)
        distance = ensemble_w1(current, following, metric)
        history.append(distance)
        logger.debug("qsd iteration %d: W1 step %.3g, rate %.6g", iteration, distance, rates[-1])
        current = following
        if distance < tol:
            converged = True
            break
    lambda0 = float(np.mean(rates[len(rates) // 2 :]))
    if not converged:
        logger.warning("qsd iteration did not reach tol=%g in %d iterations (last step %.3g)", tol, max_iter, distance)
    diagnostics = {
        "iterations": iteration,
        "final_step": distance,
        "converged": converged,
        "history": history,
        "rates": rates,
        "t0": t0,
        "tol": tol,
        "N": N,
        "seed": seed,
        "compression": compression,
    }
    measure = WeightedEnsemble(current.points, current.weights, True, dict(current.info, estimand="qsd"))
    eta = None
    if with_eta:
        grid = default_eta_grid(model, measure) if eta_grid is None else eta_grid
        horizon = eta_t if eta_t is not None else 4 * t0
        eta = estimate_eta(model, penalty, grid, horizon, lambda0, eta_N, seed, reference=measure, workers=workers)
    return QsdEstimate(measure, lambda0, eta, diagnostics)


def quasi_stationarity_residual(qsd: QsdEstimate, model, penalty, metric=None, seed: int = 0, cap: Optional[int] = None, workers=None) -> float:
    """W1(ν̂P_{t₀}/ν̂P_{t₀}𝟙, ν̂)."""
    metric = metric or default_metric(model)
    t0 = qsd.diagnostics["t0"]
    stepped = conditional_step(model, penalty, qsd.measure, t0, qsd.measure.size, seed, stream=10**6, cap=cap, workers=workers)
    return ensemble_w1(stepped, qsd.measure, metric)


def nu_q(qsd: QsdEstimate) -> WeightedEnsemble:
    """ν_Q = η·ν_QS, renormalized; ``info['interpolated']`` flags support points off the η grid."""
    if qsd.eta is None:
        raise InvalidParameter("the QSD estimate carries no eta table")
    values, interpolated = qsd.eta.interpolate(qsd.measure.points)
    if interpolated:
        logger.info("eta interpolated at %d support points", qsd.measure.size)
    weights = qsd.measure.weights * np.maximum(values, 0.0)
    return WeightedEnsemble(qsd.measure.points, weights / weights.sum(), True, {"estimand": "nu-q", "interpolated": interpolated})

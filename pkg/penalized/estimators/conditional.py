"""Monte Carlo conditional laws δ_x P_t / δ_x P_t 𝟙 and their relatives.

Every estimator accumulates log-weights and self-normalizes at the end, so
long horizons never underflow.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from penalized.errors import InvalidParameter
from penalized.metric import WeightedEnsemble, resample_indices
from penalized.process import CoupledModel, initial_states, is_discrete, propagate
from penalized.process.dynamics import check_duration
from penalized.estimators.parallel import run_blocks, stack_blocks
from utils.rng import stream_rng

logger = logging.getLogger(__name__)

DEFAULT_OCCUPATION_POINTS = 64


def _check_size(N: int) -> None:
    if N < 2:
        raise InvalidParameter(f"N must be at least 2, got {N}")


def start_states(model, x0, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` starting states: copies of one state, or draws from a weighted ensemble."""
    if isinstance(x0, WeightedEnsemble):
        return np.array(x0.points[resample_indices(x0.weights, count, rng)], dtype=float)
    return initial_states(model, x0, count)


def _weighted(points, log_weights, estimand: str, **info) -> WeightedEnsemble:
    ensemble = WeightedEnsemble.from_log_weights(points, log_weights, estimand=estimand, **info)
    logger.info("%s: N=%d ESS=%.1f", estimand, len(log_weights), ensemble.info["ess"])
    return ensemble


def conditional_law(model, penalty, x0, t, N: int, seed: int = 0, workers: Optional[int] = None) -> WeightedEnsemble:
    """N endpoints X_t weighted by Z_t."""
    _check_size(N)
    check_duration(model, t)

    def task(start, count, rng):
        return propagate(model, penalty, start_states(model, x0, count, rng), t, rng)

    states, log_weights = stack_blocks(run_blocks(task, N, seed, workers))
    return _weighted(states, log_weights, "conditional-law", N=N, seed=seed, t=t)


def _chunks(model, t, every):
    """Durations between resampling instants."""
    if every <= 0:
        raise InvalidParameter(f"resample_every must be positive, got {every}")
    if is_discrete(model):
        every = int(every)
        full, rest = divmod(int(t), every)
    else:
        full = int(math.floor(t / every))
        rest = t - full * every
    chunks = [every] * full
    if rest > 0:
        chunks.append(rest)
    return chunks


def smc_conditional_law(model, penalty, x0, t, N: int, resample_every=1, seed: int = 0, scheme: str = "multinomial") -> WeightedEnsemble:
    """Same estimand as :func:`conditional_law`, resampling by weight every ``resample_every`` units.

    ``info['log_mean_weight']`` is the particle estimate of log E_x Z_t.
    """
    _check_size(N)
    check_duration(model, t)
    rng = stream_rng(seed, 0)
    states = start_states(model, x0, N, rng)
    log_weights = np.zeros(N)
    log_normalizer = 0.0
    chunks = _chunks(model, t, resample_every)
    resamples = 0
    for k, duration in enumerate(chunks):
        states, increments = propagate(model, penalty, states, duration, rng)
        log_weights = log_weights + increments
        if k < len(chunks) - 1:
            current = WeightedEnsemble.from_log_weights(states, log_weights)
            log_normalizer += current.info["log_mean_weight"]
            states = states[resample_indices(current.weights, N, rng, scheme)]
            log_weights = np.zeros(N)
            resamples += 1
    ensemble = _weighted(states, log_weights, "smc-conditional-law", N=N, seed=seed, t=t, resamples=resamples)
    info = dict(ensemble.info, log_mean_weight=log_normalizer + ensemble.info["log_mean_weight"])
    return WeightedEnsemble(ensemble.points, ensemble.weights, True, info)


def coupled_conditional_laws(coupled: CoupledModel, penalty, x, y, t, N: int, seed: int = 0, workers: Optional[int] = None) -> Tuple[WeightedEnsemble, WeightedEnsemble]:
    """Both conditional laws from one run of a coupling (common random numbers)."""
    _check_size(N)
    model = coupled.model
    check_duration(model, t)

    def task(start, count, rng):
        pairs = coupled.propagate_pairs(penalty, initial_states(model, x, count), initial_states(model, y, count), t, rng)
        return pairs.xs, pairs.ys, pairs.log_wx, pairs.log_wy

    xs, ys, log_wx, log_wy = stack_blocks(run_blocks(task, N, seed, workers))
    info = {"N": N, "seed": seed, "t": t, "coupling": coupled.kind}
    return _weighted(xs, log_wx, "conditional-law", **info), _weighted(ys, log_wy, "conditional-law", **info)


def q_process_horizon(model, s, alpha: Optional[float] = None):
    """T = s + 10/α when a rate is known, else 4s (whole steps for discrete models)."""
    horizon = s + 10.0 / alpha if alpha else 4.0 * s
    return int(math.ceil(horizon)) if is_discrete(model) else float(horizon)


def q_process_marginal(model, penalty, x0, s, T=None, N: int = 1000, seed: int = 0, alpha: Optional[float] = None, workers: Optional[int] = None) -> WeightedEnsemble:
    """Law of X_s reweighted by Z_T: the Q-process marginal up to a bias decaying in T − s."""
    _check_size(N)
    check_duration(model, s)
    T = q_process_horizon(model, s, alpha) if T is None else T
    if T < s:
        raise InvalidParameter(f"horizon T={T} is shorter than s={s}")
    check_duration(model, T - s)

    def task(start, count, rng):
        at_s, head = propagate(model, penalty, start_states(model, x0, count, rng), s, rng)
        _, tail = propagate(model, penalty, at_s, T - s, rng)
        return at_s, head + tail

    states, log_weights = stack_blocks(run_blocks(task, N, seed, workers))
    return _weighted(states, log_weights, "q-process-marginal", N=N, seed=seed, s=s, T=T)


def coupled_q_process_marginals(coupled: CoupledModel, penalty, x, y, s, T, N: int, seed: int = 0, workers: Optional[int] = None) -> Tuple[WeightedEnsemble, WeightedEnsemble]:
    _check_size(N)
    model = coupled.model
    check_duration(model, s)
    if T < s:
        raise InvalidParameter(f"horizon T={T} is shorter than s={s}")

    def task(start, count, rng):
        at_s = coupled.propagate_pairs(penalty, initial_states(model, x, count), initial_states(model, y, count), s, rng)
        at_t = coupled.propagate_pairs(penalty, at_s.xs, at_s.ys, T - s, rng, start_time=s, carry=at_s)
        return at_s.xs, at_s.ys, at_t.log_wx, at_t.log_wy

    xs, ys, log_wx, log_wy = stack_blocks(run_blocks(task, N, seed, workers))
    info = {"N": N, "seed": seed, "s": s, "T": T, "coupling": coupled.kind}
    return _weighted(xs, log_wx, "q-process-marginal", **info), _weighted(ys, log_wy, "q-process-marginal", **info)


def quasi_ergodic(model, penalty, x0, t, N: int, seed: int = 0, occupation_points: int = DEFAULT_OCCUPATION_POINTS, workers: Optional[int] = None) -> WeightedEnsemble:
    """Mean occupation measure (1/t)∫_0^t δ_{X_s} ds of paths weighted by Z_t.

    Discrete time pools X_0..X_{t-1}; continuous time samples each path at
    the midpoints of ``occupation_points`` equal cells of [0, t].
    """
    _check_size(N)
    check_duration(model, t)
    if t <= 0:
        raise InvalidParameter(f"t must be positive, got {t}")
    if is_discrete(model):
        offsets = [1] * int(t)
        first = 0
    else:
        cell = t / occupation_points
        offsets = [cell] * (occupation_points - 1) + [cell / 2]
        first = cell / 2

    def task(start, count, rng):
        states, log_weights = propagate(model, penalty, start_states(model, x0, count, rng), first, rng)
        visits = []
        for step in offsets:
            visits.append(states)
            states, increment = propagate(model, penalty, states, step, rng)
            log_weights = log_weights + increment
        pooled = np.concatenate(visits, axis=0)
        return pooled, np.tile(log_weights, len(visits))

    points, log_weights = stack_blocks(run_blocks(task, N, seed, workers))
    return _weighted(points, log_weights, "quasi-ergodic", N=N, seed=seed, t=t, visits=len(offsets))

"""Survival curves E_x Z_t, the decay rate λ₀ and the eigenfunction η."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import linregress

from penalized.errors import InvalidCurve, InvalidParameter
from penalized.metric import WeightedEnsemble
from penalized.process import exact_feynman_kac, is_discrete, propagate
from penalized.process.dynamics import check_duration
from penalized.estimators.conditional import start_states
from penalized.estimators.parallel import run_blocks, stack_blocks

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SurvivalCurve:
    times: np.ndarray
    estimates: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    info: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "value": self.estimates, "stderr": self.stderr, "N": self.counts})

    def log_curve(self) -> np.ndarray:
        return -np.log(self.estimates)


def check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise InvalidParameter("times must be a nonempty sequence")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise InvalidParameter("times must be nonnegative and strictly increasing")
    return times


def survival_curve(model, penalty, x0, times: Sequence, N: int, seed: int = 0, workers: Optional[int] = None) -> SurvivalCurve:
    """Monte Carlo E_x Z_t on a time grid; each path is extended from one grid time to the next."""
    times = check_times(times)
    steps = np.diff(np.concatenate([[0.0], times]))
    for step in steps:
        check_duration(model, step)

    def task(start, count, rng):
        states = start_states(model, x0, count, rng)
        log_weights = np.zeros(count)
        columns = []
        for step in steps:
            states, increment = propagate(model, penalty, states, int(step) if is_discrete(model) else step, rng)
            log_weights = log_weights + increment
            columns.append(np.exp(log_weights))
        return (np.column_stack(columns),)

    (weights,) = stack_blocks(run_blocks(task, N, seed, workers))
    estimates = weights.mean(axis=0)
    stderr = weights.std(axis=0, ddof=1) / np.sqrt(N) if N > 1 else np.zeros(len(times))
    return SurvivalCurve(times, estimates, stderr, np.full(len(times), N), {"estimand": "survival", "N": N, "seed": seed})


def exact_survival_curve(model, penalty, x0, times: Sequence, cap: Optional[int] = None) -> SurvivalCurve:
    """E_x Z_n by enumeration over every noise path (discrete finite-noise models)."""
    times = check_times(times)
    values = np.array([float(exact_feynman_kac(model, penalty, x0, int(n), exact=False, cap=cap)) for n in times])
    zeros = np.zeros(len(times))
    return SurvivalCurve(times, values, zeros, zeros.astype(int), {"estimand": "survival", "exact": True})


@dataclass(frozen=True)
class RateFit:
    value: float
    stderr: float
    intercept: float
    window: Tuple[float, float]
    points: int
    sensitivity: Optional[float] = None

    def as_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "window": list(self.window),
            "points": self.points,
            "sensitivity": self.sensitivity,
        }


def _fit(times: np.ndarray, estimates: np.ndarray) -> Tuple[float, float, float]:
    if np.any(estimates <= 0):
        raise InvalidCurve("survival estimates must be positive inside the fit window")
    y = -np.log(estimates)
    if len(times) == 2:
        slope = (y[1] - y[0]) / (times[1] - times[0])
        return float(slope), 0.0, float(y[0] - slope * times[0])
    fit = linregress(times, y)
    return float(fit.slope), float(fit.stderr), float(fit.intercept)


def estimate_lambda0(curve: SurvivalCurve, window: Optional[Tuple[float, float]] = None) -> RateFit:
    """Least-squares slope of −log E_x Z_t against t.

    The default window is the last half of the curve; the fit on the last
    quarter is kept as ``sensitivity``.
    """
    times = np.asarray(curve.times, dtype=float)
    estimates = np.asarray(curve.estimates, dtype=float)
    if window is None:
        window = (times[-1] / 2, times[-1])
    inside = (times >= window[0]) & (times <= window[1])
    if inside.sum() < 2:
        raise InvalidCurve(f"need at least 2 curve points in window {window}, got {int(inside.sum())}")
    slope, stderr, intercept = _fit(times[inside], estimates[inside])
    sensitivity = None
    quarter = inside & (times >= window[1] - (window[1] - window[0]) / 2)
    if 2 <= quarter.sum() < inside.sum():
        sensitivity = abs(_fit(times[quarter], estimates[quarter])[0] - slope)
        logger.info("lambda0=%.6g (stderr %.2g), window sensitivity %.2g", slope, stderr, sensitivity)
    return RateFit(slope, stderr, intercept, (float(window[0]), float(window[1])), int(inside.sum()), sensitivity)


@dataclass(frozen=True)
class EtaTable:
    """η̂_t(x) = e^{λ₀t} E_x Z_t on a grid, normalized against a reference law."""

    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    lambda0: float
    t: float
    info: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, points) -> np.ndarray:
        return self.interpolate(points)[0]

    def interpolate(self, points) -> Tuple[np.ndarray, bool]:
        """η̂ at ``points``: linear in 1-D, nearest grid point of the same mode for PDMP rows.

        Also reports whether any point fell off the grid.
        """
        points = np.asarray(points, dtype=float)
        if self.grid.ndim == 1:
            on_grid = np.isin(points, self.grid)
            return np.interp(points, self.grid, self.values), bool(not on_grid.all())
        out = np.empty(points.shape[0])
        off_grid = False
        for mode in np.unique(points[:, -1]):
            rows = points[:, -1] == mode
            candidates = np.flatnonzero(self.grid[:, -1] == mode)
            if candidates.size == 0:
                candidates = np.arange(self.grid.shape[0])
            gaps = np.linalg.norm(points[rows, None, :-1] - self.grid[None, candidates, :-1], axis=2)
            nearest = np.argmin(gaps, axis=1)
            off_grid |= bool(np.any(gaps[np.arange(len(nearest)), nearest] > 0))
            out[rows] = self.values[candidates[nearest]]
        return out, off_grid

    def lipschitz_quotient(self, metric) -> float:
        """max |η(x) − η(y)| / d(x, y) over distinct grid pairs."""
        distances = metric.cost_matrix(self.grid, self.grid)
        gaps = np.abs(self.values[:, None] - self.values[None, :])
        mask = distances > 0
        return float(np.max(gaps[mask] / distances[mask]))

    def to_frame(self) -> pd.DataFrame:
        if self.grid.ndim == 1:
            frame = pd.DataFrame({"x": self.grid})
        else:
            frame = pd.DataFrame({f"x{i + 1}": self.grid[:, i] for i in range(self.grid.shape[1] - 1)})
            frame["mode"] = self.grid[:, -1].astype(int)
        frame["eta"] = self.values
        frame["stderr"] = self.stderr
        return frame


def estimate_eta(model, penalty, grid, t, lambda0: Union[float, RateFit], N: int, seed: int = 0, reference: Optional[WeightedEnsemble] = None, exact: bool = False, workers: Optional[int] = None) -> EtaTable:
    """η̂_t on ``grid``, rescaled so that its mean under ``reference`` (or the grid average) is 1.

    Given a :class:`RateFit`, ``t`` should lie past the end of its window;
    an earlier ``t`` is logged and flagged in ``info['before_fit_window']``.
    """
    early = False
    if isinstance(lambda0, RateFit):
        early = bool(t < lambda0.window[1])
        if early:
            logger.warning("eta at t=%g precedes the end %g of the lambda0 fit window", t, lambda0.window[1])
        lambda0 = lambda0.value
    grid = np.asarray(grid, dtype=float)
    check_duration(model, t)
    size = grid.shape[0]
    if exact:
        raw = np.array([float(exact_feynman_kac(model, penalty, x, int(t), exact=False)) for x in grid])
        raw_err = np.zeros(size)
    else:
        starts = np.repeat(grid, N, axis=0)

        def task(start, count, rng):
            _, log_weights = propagate(model, penalty, starts[start : start + count], t, rng)
            return (log_weights,)

        (log_weights,) = stack_blocks(run_blocks(task, size * N, seed, workers))
        weights = np.exp(log_weights).reshape(size, N)
        raw = weights.mean(axis=1)
        raw_err = weights.std(axis=1, ddof=1) / np.sqrt(N)
    scale = np.exp(lambda0 * t)
    table = EtaTable(grid, raw * scale, raw_err * scale, lambda0, t)
    if reference is None:
        norm = float(table.values.mean())
    else:
        at_support, _ = table.interpolate(reference.points)
        norm = float(np.dot(reference.weights, at_support) / reference.weights.sum())
    logger.info("eta normalization constant %.6g", norm)
    info = {"normalization": norm, "N": N, "seed": seed, "exact": exact, "before_fit_window": early}
    return EtaTable(grid, table.values / norm, table.stderr / norm, lambda0, t, info)

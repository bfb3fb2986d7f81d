import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Optional

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from penalized.errors import InvalidMeasure, InvalidParameter, NumericalUnderflow
from utils.rng import stream_rng

logger = logging.getLogger(__name__)

NORMALIZED_TOL = 1e-12
RENORMALIZE_TOL = 1e-9
RESAMPLING_SCHEMES = ("multinomial", "stratified", "systematic")
THIN_STREAM = 700_000


@dataclass(frozen=True)
class WeightedEnsemble:
    """Weighted empirical measure Σ w_i δ_{x_i}.

    Scalar states are stored as a 1-D array, vector states (PDMP rows
    ``[x_1..x_k, mode]``) as a 2-D array. Arrays are frozen after construction.
    """

    points: np.ndarray
    weights: np.ndarray
    normalized: bool = True
    info: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if points.shape[0] == 0:
            raise InvalidMeasure("empty support")
        if points.shape[0] != weights.shape[0]:
            raise InvalidMeasure(f"{points.shape[0]} points but {weights.shape[0]} weights")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise InvalidMeasure("weights must be finite and nonnegative")
        if self.normalized and abs(weights.sum() - 1.0) > NORMALIZED_TOL:
            raise InvalidMeasure(f"weights sum to {weights.sum()!r}, not 1")
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    # ------------------------------------------------------------------ builders

    @classmethod
    def from_samples(cls, points, **info) -> "WeightedEnsemble":
        points = np.asarray(points, dtype=float)
        n = points.shape[0]
        return cls(points, np.full(n, 1.0 / n), True, dict(info, ess=float(n)))

    @classmethod
    def from_log_weights(cls, points, log_weights, **info) -> "WeightedEnsemble":
        """Self-normalize log-domain weights; the largest weight is rescaled to 1 before exponentiation."""
        log_weights = np.asarray(log_weights, dtype=float)
        if not np.any(np.isfinite(log_weights)):
            raise NumericalUnderflow("every log-weight is -inf")
        weights = np.exp(log_weights - logsumexp(log_weights))
        weights /= weights.sum()
        ess = 1.0 / np.sum(weights**2)
        info = dict(info, ess=float(ess), log_mean_weight=float(logsumexp(log_weights) - np.log(len(log_weights))))
        return cls(points, weights, True, info)

    # ------------------------------------------------------------------ views

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def is_scalar(self) -> bool:
        return self.points.ndim == 1

    @property
    def ess(self) -> float:
        total = self.weights.sum()
        return float(total**2 / np.sum(self.weights**2))

    def checked(self) -> "WeightedEnsemble":
        """Return a normalized ensemble, renormalizing tiny drift and rejecting the rest."""
        total = float(self.weights.sum())
        if self.normalized and abs(total - 1.0) <= NORMALIZED_TOL:
            return self
        if abs(total - 1.0) <= RENORMALIZE_TOL:
            return self.normalize()
        raise InvalidMeasure(f"weights sum to {total!r}; normalize first")

    def normalize(self) -> "WeightedEnsemble":
        total = self.weights.sum()
        if total <= 0:
            raise NumericalUnderflow("total weight is zero")
        return replace(self, weights=self.weights / total, normalized=True)

    def mean(self, f: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> float:
        values = self.points if f is None else np.asarray(f(self.points), dtype=float)
        return float(np.dot(self.weights, values) / self.weights.sum())

    def std_error(self, f: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> float:
        """Delta-method standard error of the self-normalized mean of ``f``."""
        values = self.points if f is None else np.asarray(f(self.points), dtype=float)
        w = self.weights / self.weights.sum()
        centred = values - np.dot(w, values)
        return float(np.sqrt(np.sum(w**2 * centred**2)))

    def merged(self) -> "WeightedEnsemble":
        """Merge duplicate support points by summing their weights."""
        unique, inverse = np.unique(self.points, axis=0, return_inverse=True)
        weights = np.bincount(inverse.reshape(-1), weights=self.weights, minlength=unique.shape[0])
        return WeightedEnsemble(unique, weights, self.normalized, dict(self.info))

    # ------------------------------------------------------------------ resampling

    def resample(self, size: int, rng: np.random.Generator, scheme: str = "multinomial") -> "WeightedEnsemble":
        indices = resample_indices(self.weights, size, rng, scheme)
        return WeightedEnsemble.from_samples(self.points[indices])

    def quantize(self, size: int) -> "WeightedEnsemble":
        """Deterministic ``size``-point compression by the mid-quantiles (1-D only)."""
        if not self.is_scalar:
            raise InvalidParameter("quantile compression needs scalar states")
        order = np.argsort(self.points, kind="stable")
        cumulative = np.cumsum(self.weights[order]) / self.weights.sum()
        targets = (np.arange(size) + 0.5) / size
        picks = np.minimum(np.searchsorted(cumulative, targets, side="left"), len(order) - 1)
        return WeightedEnsemble.from_samples(self.points[order][picks])

    def thin(self, size: int, seed: int = 0) -> "WeightedEnsemble":
        """An equal-weight ``size``-point summary of the whole law.

        Scalar states take the mid-quantiles; vector states are drawn by
        stratified resampling over a seeded permutation of the particles.
        """
        if size >= self.size:
            return self
        if self.is_scalar:
            return self.quantize(size)
        rng = stream_rng(seed, THIN_STREAM)
        order = rng.permutation(self.size)
        picks = order[resample_indices(self.weights[order], size, rng, "stratified")]
        return WeightedEnsemble.from_samples(self.points[picks])

    def to_frame(self) -> pd.DataFrame:
        if self.is_scalar:
            frame = pd.DataFrame({"x": self.points})
        else:
            columns = {f"x{i + 1}": self.points[:, i] for i in range(self.points.shape[1] - 1)}
            columns["mode"] = self.points[:, -1].astype(int)
            frame = pd.DataFrame(columns)
        frame["weight"] = self.weights
        return frame


def resample_indices(weights: np.ndarray, size: int, rng: np.random.Generator, scheme: str = "multinomial") -> np.ndarray:
    if scheme not in RESAMPLING_SCHEMES:
        raise InvalidParameter(f"unknown resampling scheme {scheme!r}")
    weights = np.asarray(weights, dtype=float)
    cumulative = np.cumsum(weights / weights.sum())
    cumulative[-1] = 1.0
    if scheme == "multinomial":
        uniforms = np.sort(rng.random(size))
    elif scheme == "stratified":
        uniforms = (np.arange(size) + rng.random(size)) / size
    else:
        uniforms = (np.arange(size) + rng.random()) / size
    return np.searchsorted(cumulative, uniforms, side="right").clip(max=len(weights) - 1)

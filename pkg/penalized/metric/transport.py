"""Exact L1-Wasserstein distances between weighted empirical measures."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import ot
import pandas as pd

from penalized.errors import InstanceTooLarge, InvalidTestFunction, UnsupportedMetric
from penalized.metric.ensemble import WeightedEnsemble
from penalized.metric.metrics import ABSOLUTE, BoundedMetric
from utils.settings import get_settings

logger = logging.getLogger(__name__)

LIPSCHITZ_SLACK = 1e-9
MAX_SIMPLEX_ITERATIONS = 10_000_000


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling between two merged ensembles, with the cost it achieves."""

    source: WeightedEnsemble
    target: WeightedEnsemble
    src_index: np.ndarray
    dst_index: np.ndarray
    mass: np.ndarray
    cost: float
    metric: BoundedMetric
    potentials: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @classmethod
    def from_matrix(cls, source, target, matrix, metric, potentials=None) -> "TransportPlan":
        matrix = np.asarray(matrix, dtype=float)
        src, dst = np.nonzero(matrix > 0)
        mass = matrix[src, dst]
        costs = metric.cost_matrix(source.points, target.points)[src, dst]
        return cls(source, target, src, dst, mass, float(np.dot(mass, costs)), metric, potentials)

    @property
    def entries(self):
        return list(zip(self.src_index.tolist(), self.dst_index.tolist(), self.mass.tolist()))

    @property
    def cost_contrib(self) -> np.ndarray:
        costs = self.metric.cost_matrix(self.source.points, self.target.points)
        return self.mass * costs[self.src_index, self.dst_index]

    def marginal_error(self) -> float:
        rows = np.bincount(self.src_index, weights=self.mass, minlength=self.source.size)
        cols = np.bincount(self.dst_index, weights=self.mass, minlength=self.target.size)
        return float(max(np.max(np.abs(rows - self.source.weights)), np.max(np.abs(cols - self.target.weights))))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"src_index": self.src_index, "dst_index": self.dst_index, "mass": self.mass, "cost_contrib": self.cost_contrib}
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def _require_scalar(*ensembles: WeightedEnsemble) -> None:
    for ensemble in ensembles:
        if not ensemble.is_scalar:
            raise UnsupportedMetric("the quantile formula needs scalar states and the absolute-value metric")


def w1_quantile(mu: WeightedEnsemble, nu: WeightedEnsemble) -> float:
    """∫ |F_μ(t) − F_ν(t)| dt, exact on the merged sorted support."""
    _require_scalar(mu, nu)
    mu, nu = mu.checked(), nu.checked()
    points = np.concatenate([mu.points, nu.points])
    signed = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(points, kind="stable")
    gaps = np.diff(points[order])
    cdf_gap = np.cumsum(signed[order])[:-1]
    return float(np.sum(np.abs(cdf_gap) * gaps))


def w1_discrete(
    mu: WeightedEnsemble, nu: WeightedEnsemble, metric: BoundedMetric, cap: Optional[int] = None
) -> Tuple[float, TransportPlan]:
    """Exact optimal transport by network simplex on the complete bipartite graph.

    Duplicate points are merged first. The returned plan indexes the merged
    supports and carries the dual potentials of the solver.
    """
    cap = get_settings().transport_cap if cap is None else cap
    source = mu.checked().merged()
    target = nu.checked().merged()
    if source.size + target.size > cap:
        raise InstanceTooLarge(f"{source.size} + {target.size} support points exceed the cap {cap}")

    costs = metric.cost_matrix(source.points, target.points)
    a = np.ascontiguousarray(source.weights, dtype=np.float64)
    b = np.ascontiguousarray(target.weights * (a.sum() / target.weights.sum()), dtype=np.float64)
    matrix, log = ot.emd(a, b, costs, numItermax=MAX_SIMPLEX_ITERATIONS, log=True)
    if log.get("warning"):
        logger.warning("network simplex: %s", log["warning"])

    plan = TransportPlan.from_matrix(source, target, matrix, metric, potentials=(log["u"], log["v"]))
    return plan.cost, plan


def independent_plan(mu: WeightedEnsemble, nu: WeightedEnsemble, metric: BoundedMetric) -> TransportPlan:
    """The product coupling μ ⊗ ν (feasible, generally not optimal)."""
    source, target = mu.checked().merged(), nu.checked().merged()
    return TransportPlan.from_matrix(source, target, np.outer(source.weights, target.weights), metric)


def kantorovich_gap(plan: TransportPlan, test_function_values: Union[Sequence, Tuple[Sequence, Sequence]]) -> float:
    """plan.cost − |μ(φ) − ν(φ)| for a 1-Lipschitz φ given on both supports.

    ``test_function_values`` is either a pair (values on the source support,
    values on the target support) or one flat list with the source values first.
    """
    if isinstance(test_function_values, tuple) and len(test_function_values) == 2:
        on_source, on_target = (np.asarray(v, dtype=float) for v in test_function_values)
    else:
        flat = np.asarray(test_function_values, dtype=float)
        on_source, on_target = flat[: plan.source.size], flat[plan.source.size :]
    if on_source.shape != (plan.source.size,) or on_target.shape != (plan.target.size,):
        raise InvalidTestFunction("test function values do not match the plan supports")

    points = np.concatenate([plan.source.points, plan.target.points])
    values = np.concatenate([on_source, on_target])
    distances = plan.metric.cost_matrix(points, points)
    violation = np.max(np.abs(values[:, None] - values[None, :]) - distances)
    if violation > LIPSCHITZ_SLACK:
        raise InvalidTestFunction(f"test function is not 1-Lipschitz on the support (excess {violation:.3g})")

    difference = np.dot(plan.source.weights, on_source) - np.dot(plan.target.weights, on_target)
    return float(plan.cost - abs(difference))


def w1_uniform(mu: WeightedEnsemble, low: float, high: float) -> float:
    """Exact W1 between a scalar ensemble and the uniform law on [low, high]."""
    _require_scalar(mu)
    mu = mu.checked()
    order = np.argsort(mu.points, kind="stable")
    points, weights = mu.points[order], mu.weights[order]
    knots = np.unique(np.concatenate([points, [low, high]]))
    # F_μ is constant on each [s, e) and equals the mass at or left of s
    mass_left = np.concatenate([[0.0], np.cumsum(weights)])[np.searchsorted(points, knots[:-1], side="right")]
    starts, ends = knots[:-1], knots[1:]
    g0 = np.clip((starts - low) / (high - low), 0.0, 1.0)
    g1 = np.clip((ends - low) / (high - low), 0.0, 1.0)
    lengths = ends - starts
    d0, d1 = mass_left - g0, mass_left - g1
    same_sign = d0 * d1 >= 0
    slope = np.where(same_sign, 1.0, np.abs(g1 - g0))
    crossing = lengths * (d0**2 + d1**2) / (2.0 * slope)
    plain = lengths * np.abs(d0 + d1) / 2.0
    return float(np.sum(np.where(same_sign, plain, crossing)))


def ensemble_w1(mu: WeightedEnsemble, nu: WeightedEnsemble, metric: BoundedMetric, cap: Optional[int] = None) -> float:
    """W1 under ``metric``: quantile formula when valid, otherwise network simplex.

    The simplex runs on the merged supports when they fit under ``cap``;
    larger ensembles are first compressed to ``cap // 2`` points each with
    :meth:`WeightedEnsemble.thin`.
    """
    if metric.kind == ABSOLUTE and mu.is_scalar and nu.is_scalar:
        return w1_quantile(mu, nu)
    cap = get_settings().transport_cap if cap is None else cap
    mu, nu = mu.checked().merged(), nu.checked().merged()
    if mu.size + nu.size > cap:
        logger.info("compressing %d + %d support points to at most %d each", mu.size, nu.size, cap // 2)
        mu, nu = mu.thin(cap // 2), nu.thin(cap // 2)
    cost, _ = w1_discrete(mu, nu, metric, cap)
    return cost

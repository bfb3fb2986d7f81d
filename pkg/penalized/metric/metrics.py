from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from penalized.errors import InvalidParameter

ABSOLUTE = "absolute-1d"
TRUNCATED = "truncated"
PDMP_PRODUCT = "pdmp-product"
CUSTOM = "custom"


def pack_point(point) -> np.ndarray:
    """Turn ``(vector, mode)`` or an already packed row into a float row ``[x_1..x_k, mode]``."""
    if isinstance(point, tuple) and len(point) == 2 and np.ndim(point[0]) > 0:
        vector, mode = point
        return np.append(np.asarray(vector, dtype=float), float(mode))
    return np.asarray(point, dtype=float)


@dataclass(frozen=True)
class BoundedMetric:
    """A distance with a declared bound d̄.

    ``fn`` evaluates a single pair and accepts exact numbers when the metric
    allows it; ``pairwise`` builds the (n, m) cost matrix for arrays of points.
    """

    fn: Callable[[Any, Any], Any]
    pairwise: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bound: float
    kind: str
    scalar: bool = True
    params: Dict[str, Any] = field(default_factory=dict)
    pointwise: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def eval(self, x, y):
        return self.fn(x, y)

    __call__ = eval

    def rowwise(self, xs, ys) -> np.ndarray:
        """d(xs[k], ys[k]) for every k."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if self.pointwise is not None:
            return np.asarray(self.pointwise(xs, ys), dtype=float)
        return np.array([self.pairwise(xs[k : k + 1], ys[k : k + 1])[0, 0] for k in range(len(xs))])

    def cost_matrix(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        return np.ascontiguousarray(self.pairwise(xs, ys), dtype=np.float64)


def absolute_metric(low: float = -2.0, high: float = 2.0) -> BoundedMetric:
    """|x − y| on the interval [low, high]."""
    if not high > low:
        raise InvalidParameter(f"empty interval [{low}, {high}]")
    return BoundedMetric(
        fn=lambda x, y: abs(x - y),
        pairwise=lambda xs, ys: np.abs(xs[:, None] - ys[None, :]),
        pointwise=lambda xs, ys: np.abs(xs - ys),
        bound=float(high - low),
        kind=ABSOLUTE,
        params={"low": low, "high": high},
    )


def truncate_metric(base: BoundedMetric, kappa: float) -> BoundedMetric:
    """d_κ(x, y) = min(κ d(x, y), 1)."""
    if not kappa > 0:
        raise InvalidParameter(f"kappa must be positive, got {kappa}")
    return BoundedMetric(
        fn=lambda x, y: min(kappa * base.fn(x, y), 1),
        pairwise=lambda xs, ys: np.minimum(kappa * base.pairwise(xs, ys), 1.0),
        pointwise=lambda xs, ys: np.minimum(kappa * base.rowwise(xs, ys), 1.0),
        bound=1.0,
        kind=TRUNCATED,
        scalar=base.scalar,
        params={"kappa": kappa, "base": base.kind},
    )


def _pdmp_pairwise(radius: float):
    def pairwise(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(xs)
        ys = np.atleast_2d(ys)
        gaps = np.linalg.norm(xs[:, None, :-1] - ys[None, :, :-1], axis=-1) / (2.0 * radius)
        same_mode = xs[:, None, -1] == ys[None, :, -1]
        return np.where(same_mode, gaps, 1.0)

    return pairwise


def _pdmp_pointwise(radius: float):
    def pointwise(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(xs)
        ys = np.atleast_2d(ys)
        gaps = np.linalg.norm(xs[:, :-1] - ys[:, :-1], axis=-1) / (2.0 * radius)
        return np.where(xs[:, -1] == ys[:, -1], gaps, 1.0)

    return pointwise


def pdmp_metric(radius: float) -> BoundedMetric:
    """d((x,i),(y,j)) = 1 if i ≠ j, else ‖x − y‖/(2R).

    Points are ``(vector, mode)`` pairs or packed rows whose last entry is the mode.
    """
    if not radius > 0:
        raise InvalidParameter(f"radius must be positive, got {radius}")
    pairwise = _pdmp_pairwise(radius)

    def fn(u, v) -> float:
        return float(pairwise(pack_point(u)[None, :], pack_point(v)[None, :])[0, 0])

    return BoundedMetric(fn=fn, pairwise=pairwise, bound=1.0, kind=PDMP_PRODUCT, scalar=False, params={"radius": radius}, pointwise=_pdmp_pointwise(radius))


def custom_metric(fn: Callable[[Any, Any], float], bound: float, scalar: bool = True) -> BoundedMetric:
    """Wrap a user distance; the cost matrix is filled pair by pair."""
    if not bound > 0:
        raise InvalidParameter(f"bound must be positive, got {bound}")

    def pairwise(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return np.array([[fn(x, y) for y in ys] for x in xs], dtype=float).reshape(len(xs), len(ys))

    return BoundedMetric(fn=fn, pairwise=pairwise, bound=float(bound), kind=CUSTOM, scalar=scalar)

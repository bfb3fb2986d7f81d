"""Bounded metrics, weighted ensembles and exact L1-Wasserstein distances."""

from .ensemble import WeightedEnsemble, resample_indices
from .metrics import (
    ABSOLUTE,
    CUSTOM,
    PDMP_PRODUCT,
    TRUNCATED,
    BoundedMetric,
    absolute_metric,
    custom_metric,
    pack_point,
    pdmp_metric,
    truncate_metric,
)
from .transport import (
    TransportPlan,
    ensemble_w1,
    independent_plan,
    kantorovich_gap,
    w1_discrete,
    w1_quantile,
    w1_uniform,
)

__all__ = [
    "ABSOLUTE",
    "CUSTOM",
    "PDMP_PRODUCT",
    "TRUNCATED",
    "BoundedMetric",
    "TransportPlan",
    "WeightedEnsemble",
    "absolute_metric",
    "custom_metric",
    "ensemble_w1",
    "independent_plan",
    "kantorovich_gap",
    "pack_point",
    "pdmp_metric",
    "resample_indices",
    "truncate_metric",
    "w1_discrete",
    "w1_quantile",
    "w1_uniform",
]

"""Ready-built processes and penalties, plus a name-addressable catalog for config-driven runs."""

from .catalog import (
    CATALOG,
    PENALTIES,
    ModelCatalogEntry,
    bernoulli_convolution,
    bistable_pdmp,
    build_entry,
    build_metric,
    catalog_names,
    identity_half_mixture,
    irf_demo_penalty,
    iterated_functions,
    lipschitz_demo_penalty,
    lipschitz_law,
    pdmp_demo_penalty,
    penalty_counterexample_abs,
    penalty_counterexample_rational,
    switched_linear,
)

__all__ = [
    "CATALOG",
    "PENALTIES",
    "ModelCatalogEntry",
    "bernoulli_convolution",
    "bistable_pdmp",
    "build_entry",
    "build_metric",
    "catalog_names",
    "identity_half_mixture",
    "irf_demo_penalty",
    "iterated_functions",
    "lipschitz_demo_penalty",
    "lipschitz_law",
    "pdmp_demo_penalty",
    "penalty_counterexample_abs",
    "penalty_counterexample_rational",
    "switched_linear",
]

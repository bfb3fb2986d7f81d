"""Assumption checks on coupled processes and the closed-form constants that follow from them."""

from .assumptions import (
    AssumptionReport,
    EquivalenceConfig,
    EquivalenceReport,
    aprime_envelope,
    chebyshev_points,
    cross_check_equivalence,
    default_grid,
    default_pairs,
    estimate_A,
    estimate_B,
    estimate_C,
    estimate_H,
)
from .constants import (
    ConstantBundle,
    CftkTransfer,
    IrfVerdict,
    ProofConstants,
    RThreshold,
    alpha_explicit,
    as_contraction_constants,
    beta_kappa,
    cftk_transfer,
    constant_bundle,
    constants_from_coupling,
    fenchel_legendre,
    irf_condition,
    proof_constants,
    r_threshold,
    switching_gap,
    theta_eig,
)

__all__ = [
    "AssumptionReport",
    "CftkTransfer",
    "ConstantBundle",
    "EquivalenceConfig",
    "EquivalenceReport",
    "IrfVerdict",
    "ProofConstants",
    "RThreshold",
    "alpha_explicit",
    "aprime_envelope",
    "as_contraction_constants",
    "beta_kappa",
    "cftk_transfer",
    "chebyshev_points",
    "constant_bundle",
    "constants_from_coupling",
    "cross_check_equivalence",
    "default_grid",
    "default_pairs",
    "estimate_A",
    "estimate_B",
    "estimate_C",
    "estimate_H",
    "fenchel_legendre",
    "irf_condition",
    "proof_constants",
    "r_threshold",
    "switching_gap",
    "theta_eig",
]

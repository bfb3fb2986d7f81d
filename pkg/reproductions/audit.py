"""Sanity audit of the closed-form constants."""

import math

import numpy as np
import pandas as pd

from penalized.criteria import (
    alpha_explicit,
    as_contraction_constants,
    beta_kappa,
    cftk_transfer,
    constants_from_coupling,
    proof_constants,
    theta_eig,
)
from penalized.models import build_entry
from reproductions.common import finished, guarded
from utils.rng import stream_rng

EIGEN_TOLERANCE = 1e-12


def _random_tuples(rng: np.random.Generator, size: int) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "gamma_A": rng.uniform(0.01, 2.0, size),
            "C_A": rng.uniform(1.0, 10.0, size),
            "C_B": rng.uniform(0.0, 5.0, size),
            "C_C": rng.uniform(1.0, 10.0, size),
            "dbar": rng.uniform(0.1, 4.0, size),
        }
    )


@guarded
def constants_audit(seed: int, workers=None, tuples: int = 1000) -> dict:
    """Identities and inequalities every constant formula must satisfy, on fixed and random inputs."""
    rng = stream_rng(seed, 0)
    draws = _random_tuples(rng, tuples)
    draws["alpha"] = [alpha_explicit(*row) for row in draws[["gamma_A", "C_A", "C_B", "C_C", "dbar"]].itertuples(index=False)]

    q = rng.uniform(-5.0, 5.0, (tuples, 2))
    closed = np.array([theta_eig(qp, qm) for qp, qm in q])
    numeric = np.array([np.linalg.eigvalsh(np.array([[-1.0 + qp, 1.0], [1.0, -1.0 + qm]]))[-1] for qp, qm in q])
    eigen = pd.DataFrame({"q_plus": q[:, 0], "q_minus": q[:, 1], "theta": closed, "eigvalsh": numeric})

    entry = build_entry("bernoulli")
    penalty, metric = entry.penalty, entry.metric
    bundle = constants_from_coupling(1.0, math.log(2), penalty.lipschitz_const, penalty.oscillation, metric.bound)
    proof = proof_constants(bundle.gamma_A, bundle.C_A, bundle.C_B, bundle.C_C, bundle.dbar)
    accepted = cftk_transfer(1.0, math.log(2), penalty.oscillation)
    rejected = cftk_transfer(1.0, 0.1, 0.2)

    checks = {
        "alpha_without_penalty_gradient": all(math.isclose(alpha_explicit(g, 1.0, 0.0, 1.0, d), g, rel_tol=1e-14) for g, d in ((0.5, 1.0), (math.log(2), 4.0), (1.7, 0.25))),
        "alpha_below_gamma": bool(np.all(draws["alpha"] <= draws["gamma_A"] * (1 + 1e-12))),
        "alpha_positive": bool(np.all((draws["alpha"] > 0) | (draws["C_C"] == 1))),
        "theta_matches_eigvalsh": bool(np.max(np.abs(closed - numeric)) <= EIGEN_TOLERANCE),
        "constant_penalty_gives_trivial_constants": as_contraction_constants(2.0, 0.5, 0.0, 0.3, 4.0) == (0.0, 1.0),
        "beta_kappa_without_gradient": beta_kappa(0.0, 2.0) == (0.75, 0.0),
        "cftk_accepts": accepted.accepted and abs(accepted.gamma_A - (math.log(2) - penalty.oscillation)) <= 1e-15,
        "cftk_rejects": not rejected.accepted,
        "proof_rate_positive": proof.alpha > 0,
    }
    report = {
        "tuples": tuples,
        "max_theta_error": float(np.max(np.abs(closed - numeric))),
        "max_alpha_over_gamma": float((draws["alpha"] / draws["gamma_A"]).max()),
        "demo_bundle": bundle.as_dict(),
        "proof_constants": proof.as_dict(),
        "cftk": {"accepted": accepted.__dict__, "rejected": rejected.__dict__},
        "checks": checks,
    }
    return finished(f"audited {tuples} random constant tuples", {"alpha_tuples": draws, "theta_eig": eigen}, report)


#====Declarations==================================================

constants_audit_declaration = {
    "name": "constants-audit",
    "section": "explicit constants: rate formula, contraction constants and two-mode eigenvalue",
    "description": "Checks the closed-form constants against identities, random tuples and numerical eigenvalues",
    "parameters": {
        "type": "object",
        "properties": {
            "tuples": {"type": "integer", "default": 1000, "description": "random constant tuples and eigenvalue pairs"},
        },
        "required": [],
    },
}

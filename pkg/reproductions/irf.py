"""Cramér-type criterion for random contractions, against a measured coupling curve."""

import math

import pandas as pd

from penalized.criteria import estimate_A, fenchel_legendre, irf_condition
from penalized.models import build_entry, identity_half_mixture, lipschitz_law
from reproductions.common import finished, guarded


@guarded
def irf_cramer(seed: int, workers=None, q: float = 0.1, osc: float = 1.0, rejected_q: float = 0.5, rejected_osc: float = math.log(3), times=None, exact: bool = True, N: int = 4000) -> dict:
    """The identity/half-map mixture passes the criterion at (q, osc) and fails it at (rejected_q, rejected_osc)."""
    times = list(range(13)) if times is None else times
    law = lipschitz_law(identity_half_mixture(q))
    verdict = irf_condition(law, osc)
    rejected = irf_condition(lipschitz_law(identity_half_mixture(rejected_q)), rejected_osc)
    legendre = fenchel_legendre(law, 1.0)

    entry = build_entry("irf-identity-half", {"q": q, "osc": osc})
    report_A = estimate_A(entry.coupling, entry.penalty, None, times, N=N, seed=seed, exact=exact, workers=workers)
    gamma, gamma_err = report_A.constants["gamma_A"], report_A.constants["gamma_A_stderr"]
    verdicts = pd.DataFrame(
        [
            {"q": q, "osc": osc, **verdict.as_dict()},
            {"q": rejected_q, "osc": rejected_osc, **rejected.as_dict()},
        ]
    )
    checks = {
        "criterion_holds": verdict.holds,
        "criterion_rejects": not rejected.holds,
        "legendre_at_one": abs(legendre - math.log(1 / q)) <= 1e-6,
        "coupling_curve_decays": gamma - 3 * gamma_err > 0,
    }
    report = {
        "verdict": verdict.as_dict(),
        "rejected": rejected.as_dict(),
        "legendre_at_one": legendre,
        "constants_A": report_A.constants,
        "checks": checks,
    }
    tables = {"irf_verdicts": verdicts, "a_curve": report_A.to_frame(), "a_fits": report_A.fits}
    return finished(f"criterion margin {verdict.margin:.4g}, measured rate {gamma:.4g}", tables, report)


#====Declarations==================================================

irf_cramer_declaration = {
    "name": "irf-cramer",
    "section": "iterated random functions: Cramér criterion on the Lipschitz factors",
    "description": "Checks the large-deviation criterion for the identity/half-map mixture and measures the coupling curve (A) it predicts",
    "parameters": {
        "type": "object",
        "properties": {
            "q": {"type": "number", "default": 0.1, "description": "probability of the identity map"},
            "osc": {"type": "number", "default": 1.0, "description": "oscillation of the killing rate"},
            "rejected_q": {"type": "number", "default": 0.5},
            "rejected_osc": {"type": "number", "default": math.log(3)},
            "times": {"type": "array", "items": {"type": "integer"}, "default": list(range(13))},
            "exact": {"type": "boolean", "default": True, "description": "enumerate noise paths for the coupling curve"},
            "N": {"type": "integer", "default": 4000, "description": "paths per pair when sampling"},
        },
        "required": [],
    },
}

from typing import Any, Dict, Optional

from penalized.errors import InvalidParameter

# Bernoulli convolution: contraction, QSD, eta, Q-process and quasi-ergodic laws
from reproductions.bernoulli import (
    bernoulli_wasserstein_decay,
    eta_survival,
    q_process_ergodicity,
    qsd_fixed_point_experiment,
    quasi_ergodic_rate,
    bernoulli_wasserstein_decay_declaration,
    eta_survival_declaration,
    q_process_ergodicity_declaration,
    qsd_fixed_point_declaration,
    quasi_ergodic_rate_declaration,
)

# Non-Lipschitz penalties in exact arithmetic
from reproductions.counterexamples import (
    counterexample_abs,
    counterexample_rational,
    counterexample_abs_declaration,
    counterexample_rational_declaration,
)

from reproductions.irf import irf_cramer, irf_cramer_declaration
from reproductions.pdmp import pdmp_bistable, pdmp_linear, pdmp_bistable_declaration, pdmp_linear_declaration
from reproductions.audit import constants_audit, constants_audit_declaration
from reproductions.common import validate_params


#====Admin====================================================

def get_experiment_declarations():
    """Returns the declarations of every named experiment, in listing order."""
    return [
        bernoulli_wasserstein_decay_declaration,
        qsd_fixed_point_declaration,
        eta_survival_declaration,
        q_process_ergodicity_declaration,
        quasi_ergodic_rate_declaration,
        counterexample_abs_declaration,
        counterexample_rational_declaration,
        irf_cramer_declaration,
        pdmp_linear_declaration,
        pdmp_bistable_declaration,
        constants_audit_declaration,
    ]

# Map experiment names to their implementations
experiment_map = {
    "bernoulli-wasserstein-decay": bernoulli_wasserstein_decay,
    "qsd-fixed-point": qsd_fixed_point_experiment,
    "eta-survival": eta_survival,
    "q-process-ergodicity": q_process_ergodicity,
    "quasi-ergodic-rate": quasi_ergodic_rate,
    "counterexample-abs": counterexample_abs,
    "counterexample-rational": counterexample_rational,
    "irf-cramer": irf_cramer,
    "pdmp-linear": pdmp_linear,
    "pdmp-bistable": pdmp_bistable,
    "constants-audit": constants_audit,
}


def get_declaration(name: str) -> Dict[str, Any]:
    for declaration in get_experiment_declarations():
        if declaration["name"] == name:
            return declaration
    raise InvalidParameter(f"unknown experiment {name!r}; known: {', '.join(experiment_map)}")


def run_experiment(name: str, seed: int, workers: Optional[int] = None, params: Optional[Dict[str, Any]] = None) -> dict:
    """Validate ``params`` against the declaration of ``name`` and run it.

    Raises InvalidParameter for an unknown name and pydantic's ValidationError
    for bad parameters; everything else comes back as a status dict.
    """
    declaration = get_declaration(name)
    arguments = validate_params(declaration, params)
    return experiment_map[name](seed=seed, workers=workers, **arguments)

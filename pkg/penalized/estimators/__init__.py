"""Feynman-Kac estimators: conditional laws, survival, λ₀, η, QSD, Q-process and quasi-ergodic laws."""

from .conditional import (
    conditional_law,
    coupled_conditional_laws,
    coupled_q_process_marginals,
    q_process_horizon,
    q_process_marginal,
    quasi_ergodic,
    smc_conditional_law,
    start_states,
)
from .parallel import run_blocks, split_blocks, stack_blocks
from .qsd import (
    QsdEstimate,
    conditional_step,
    default_initial,
    default_metric,
    expand_exact,
    nu_q,
    qsd_fixed_point,
    quasi_stationarity_residual,
)
from .survival import (
    EtaTable,
    RateFit,
    SurvivalCurve,
    estimate_eta,
    estimate_lambda0,
    exact_survival_curve,
    survival_curve,
)

__all__ = [
    "EtaTable",
    "QsdEstimate",
    "RateFit",
    "SurvivalCurve",
    "conditional_law",
    "conditional_step",
    "coupled_conditional_laws",
    "coupled_q_process_marginals",
    "default_initial",
    "default_metric",
    "estimate_eta",
    "estimate_lambda0",
    "exact_survival_curve",
    "expand_exact",
    "nu_q",
    "q_process_horizon",
    "q_process_marginal",
    "qsd_fixed_point",
    "quasi_ergodic",
    "quasi_stationarity_residual",
    "run_blocks",
    "smc_conditional_law",
    "split_blocks",
    "stack_blocks",
    "start_states",
    "survival_curve",
]

"""Discrete kernels, switched PDMPs, penalization weights and Markovian couplings."""

from .coupling import (
    MERGE,
    SYNCHRONOUS,
    CoupledModel,
    MergeCoupling,
    PairState,
    SynchronousCoupling,
    couple_pdmp_merge,
    couple_synchronous,
    exact_coupled_expectation,
)
from .discrete import (
    DiscreteModel,
    StateSpace,
    enumerate_paths,
    exact_conditional_law,
    exact_endpoint_masses,
    exact_feynman_kac,
    is_exact_number,
    propagate_discrete,
    simulate_discrete,
)
from .dynamics import initial_states, is_discrete, propagate
from .pdmp import (
    CLOSED_FORM_CUBIC,
    CLOSED_FORM_LINEAR,
    RK4,
    PdmpModel,
    cubic_flow,
    expm_2x2,
    integrate_rho,
    linear_flow,
    monotonicity_constant,
    propagate_pdmp,
    rk4_flow,
    simulate_pdmp,
)
from .penalty import (
    CONTINUOUS_RHO,
    DISCRETE_P,
    PenaltyField,
    constant_rate,
    constant_survival,
    continuous_penalty,
    mode_rate_penalty,
    weight_continuous,
    weight_discrete,
)
from .trajectory import Segment, Trajectory

__all__ = [
    "CLOSED_FORM_CUBIC",
    "CLOSED_FORM_LINEAR",
    "CONTINUOUS_RHO",
    "DISCRETE_P",
    "MERGE",
    "RK4",
    "SYNCHRONOUS",
    "CoupledModel",
    "DiscreteModel",
    "MergeCoupling",
    "PairState",
    "PdmpModel",
    "PenaltyField",
    "Segment",
    "StateSpace",
    "SynchronousCoupling",
    "Trajectory",
    "constant_rate",
    "constant_survival",
    "continuous_penalty",
    "couple_pdmp_merge",
    "couple_synchronous",
    "cubic_flow",
    "enumerate_paths",
    "exact_coupled_expectation",
    "exact_conditional_law",
    "exact_endpoint_masses",
    "exact_feynman_kac",
    "expm_2x2",
    "initial_states",
    "integrate_rho",
    "is_discrete",
    "is_exact_number",
    "linear_flow",
    "mode_rate_penalty",
    "monotonicity_constant",
    "propagate",
    "propagate_discrete",
    "propagate_pdmp",
    "rk4_flow",
    "simulate_discrete",
    "simulate_pdmp",
    "weight_continuous",
    "weight_discrete",
]

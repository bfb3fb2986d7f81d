"""Model-agnostic ensemble propagation used by every estimator."""

import numpy as np

from penalized.errors import InvalidParameter, InvalidState
from penalized.process.discrete import DiscreteModel, propagate_discrete
from penalized.process.pdmp import PdmpModel, propagate_pdmp


def is_discrete(model) -> bool:
    return isinstance(model, DiscreteModel)


def check_duration(model, duration) -> None:
    if duration < 0:
        raise InvalidParameter(f"negative duration {duration}")
    if is_discrete(model) and int(duration) != duration:
        raise InvalidParameter(f"{model.name} runs in whole steps, got {duration}")


def initial_states(model, x0, size: int) -> np.ndarray:
    """Replicate a start point: a scalar for discrete models, ``(vector, mode)`` or a packed row for PDMPs."""
    if is_discrete(model):
        if not bool(model.state_space.contains(float(x0))):
            raise InvalidState(f"x0={x0} is outside the state space of {model.name}")
        return np.full(size, float(x0))
    row = model.pack(*x0) if isinstance(x0, tuple) else np.asarray(x0, dtype=float)
    if not model.contains(row)[0]:
        raise InvalidState(f"start {x0} lies outside the invariant ball of radius {model.radius}")
    return np.tile(row, (size, 1))


def propagate(model, penalty, states: np.ndarray, duration, rng: np.random.Generator):
    """Advance an ensemble by ``duration`` (steps or time) and return (states, log Z increments)."""
    check_duration(model, duration)
    if is_discrete(model):
        return propagate_discrete(model, penalty, states, int(duration), rng)
    if not isinstance(model, PdmpModel):
        raise InvalidParameter(f"unsupported model type {type(model).__name__}")
    return propagate_pdmp(model, penalty, states, float(duration), rng)

"""Killing data and the penalization weights Z_t.

For discrete fields ``eval`` is the survival probability p = e^{-ρ}; for
continuous fields it is the rate ρ. ``lipschitz_const`` and ``oscillation``
always describe ρ, which is what the contraction constants consume.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from penalized.errors import InvalidParameter, InvalidPenalty

DISCRETE_P = "discrete-p"
CONTINUOUS_RHO = "continuous-rho"


@dataclass(frozen=True)
class PenaltyField:
    kind: str
    eval: Callable[[Any], Any]
    lipschitz_const: float
    oscillation: float
    lower: float
    upper: float
    name: str = "penalty"
    rho_lipschitz: bool = True
    exact: bool = False
    mode_rates: Optional[tuple] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (DISCRETE_P, CONTINUOUS_RHO):
            raise InvalidParameter(f"unknown penalty kind {self.kind!r}")
        if self.kind == DISCRETE_P and not 0 <= self.lower <= self.upper <= 1:
            raise InvalidParameter(f"survival probabilities must lie in (0, 1], got [{self.lower}, {self.upper}]")
        if self.kind == CONTINUOUS_RHO and not 0 <= self.lower <= self.upper:
            raise InvalidParameter(f"killing rates must be nonnegative, got [{self.lower}, {self.upper}]")

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE_P

    def log_survival(self, states) -> np.ndarray:
        """log p over an array of states (discrete fields)."""
        self.require(DISCRETE_P)
        return np.log(np.asarray(self.eval(states), dtype=float))

    def rho(self, states) -> np.ndarray:
        """ρ over an array of states, for either representation."""
        if self.is_discrete:
            return -self.log_survival(states)
        return np.asarray(self.eval(states), dtype=float)

    def require(self, kind: str) -> None:
        if self.kind != kind:
            raise InvalidPenalty(f"{self.name} is a {self.kind} field, expected {kind}")

    def lipschitz_excess(self, metric, states) -> float:
        """Largest |ρ(x) − ρ(y)| − L·d(x, y) over all pairs of ``states`` (≤ 0 when the declared constant holds)."""
        values = self.rho(states)
        distances = metric.cost_matrix(states, states)
        return float(np.max(np.abs(values[:, None] - values[None, :]) - self.lipschitz_const * distances))


def constant_survival(c: float) -> PenaltyField:
    """p ≡ c."""
    if not 0 < c <= 1:
        raise InvalidParameter(f"survival probability must lie in (0, 1], got {c}")
    return PenaltyField(
        kind=DISCRETE_P,
        eval=lambda x: np.full(np.shape(x), c) if np.ndim(x) else c,
        lipschitz_const=0.0,
        oscillation=0.0,
        lower=c,
        upper=c,
        name=f"constant-survival({c})",
        exact=True,
        params={"c": c},
    )


def constant_rate(r: float) -> PenaltyField:
    """ρ ≡ r for any continuous-time model."""
    if r < 0:
        raise InvalidParameter(f"killing rate must be nonnegative, got {r}")
    return PenaltyField(
        kind=CONTINUOUS_RHO,
        eval=lambda states: np.full(np.shape(states)[:1], float(r)),
        lipschitz_const=0.0,
        oscillation=0.0,
        lower=r,
        upper=r,
        name=f"constant-rate({r})",
        params={"r": r},
    )


def mode_rate_penalty(rates: Sequence[float]) -> PenaltyField:
    """ρ((x, i)) = rates[i]; segment integrals are then closed form."""
    rates = tuple(float(r) for r in rates)
    if min(rates) < 0:
        raise InvalidParameter(f"killing rates must be nonnegative, got {rates}")
    table = np.asarray(rates)
    return PenaltyField(
        kind=CONTINUOUS_RHO,
        eval=lambda states: table[np.atleast_2d(states)[:, -1].astype(int)],
        # modes sit at distance 1 in the product metric
        lipschitz_const=max(rates) - min(rates),
        oscillation=max(rates) - min(rates),
        lower=min(rates),
        upper=max(rates),
        name=f"mode-rates{rates}",
        mode_rates=rates,
        params={"rates": list(rates)},
    )


def continuous_penalty(fn: Callable, lipschitz: float, lower: float, upper: float, name: str = "custom-rate") -> PenaltyField:
    """Wrap a state-dependent rate ρ acting on packed PDMP rows."""
    return PenaltyField(
        kind=CONTINUOUS_RHO,
        eval=fn,
        lipschitz_const=lipschitz,
        oscillation=upper - lower,
        lower=lower,
        upper=upper,
        name=name,
    )


def _is_exact(value) -> bool:
    return not isinstance(value, (float, np.floating, np.ndarray))


def weight_discrete(traj, penalty: PenaltyField):
    """Z_n = p(X_0) ⋯ p(X_{n-1}); exact when the states and p are exact."""
    penalty.require(DISCRETE_P)
    if traj.kind != "discrete":
        raise InvalidPenalty("weight_discrete needs a discrete trajectory")
    visited = traj.states[:-1]
    if not visited:
        return 1
    if penalty.exact and all(_is_exact(x) for x in visited):
        return math.prod(penalty.eval(x) for x in visited)
    return float(np.exp(np.sum(penalty.log_survival(np.asarray(visited, dtype=float)))))


def weight_continuous(traj, penalty: PenaltyField) -> float:
    """Z_t = exp(−Σ_segments ∫ ρ(X_s) ds)."""
    penalty.require(CONTINUOUS_RHO)
    if traj.kind != "pdmp":
        raise InvalidPenalty("weight_continuous needs a PDMP trajectory")
    return float(np.exp(-np.sum(traj.segment_integrals(penalty))))

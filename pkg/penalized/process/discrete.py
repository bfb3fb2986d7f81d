"""Discrete-time kernels X_{n+1} = step(X_n, θ_{n+1}) and their exact enumeration."""

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import sympy

from penalized.errors import InstanceTooLarge, InvalidParameter, InvalidState, UnsupportedModel
from penalized.metric import WeightedEnsemble
from penalized.process.trajectory import Trajectory
from utils.rng import as_generator
from utils.settings import get_settings

logger = logging.getLogger(__name__)

PROBABILITY_TOL = 1e-12
MAX_REDRAWS = 64


@dataclass(frozen=True)
class StateSpace:
    """[low, high] (or (low, high) when ``open``) minus finitely many excluded points."""

    low: float
    high: float
    open: bool = False
    excluded: Tuple[float, ...] = ()

    def contains(self, x):
        x_arr = np.asarray(x, dtype=float)
        inside = (x_arr > self.low) & (x_arr < self.high) if self.open else (x_arr >= self.low) & (x_arr <= self.high)
        for point in self.excluded:
            inside &= x_arr != point
        return inside

    def sample_grid(self, size: int = 64) -> np.ndarray:
        grid = np.linspace(self.low, self.high, size + 2)[1:-1]
        return grid[self.contains(grid)]

    @property
    def diameter(self) -> float:
        return float(self.high - self.low)


@dataclass(frozen=True)
class DiscreteModel:
    name: str
    step: Callable[[Any, Any], Any]
    state_space: StateSpace
    noise_values: Optional[Tuple[Any, ...]] = None
    noise_probs: Optional[Tuple[Any, ...]] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    lipschitz_factors: Optional[Tuple[float, ...]] = None
    params: Dict[str, Any] = field(default_factory=dict)

    time_kind = "discrete"

    def __post_init__(self):
        if self.is_finite:
            if len(self.noise_values) != len(self.noise_probs):
                raise InvalidParameter("noise values and probabilities differ in length")
            if any(p < 0 for p in self.noise_probs) or abs(float(sum(self.noise_probs)) - 1.0) > PROBABILITY_TOL:
                raise InvalidParameter(f"noise probabilities {self.noise_probs} do not sum to 1")
            grid = self.state_space.sample_grid()
            for value in self.noise_values:
                images = self.step(grid, np.full(grid.shape, value))
                if not np.all((images >= self.state_space.low - 1e-12) & (images <= self.state_space.high + 1e-12)):
                    raise InvalidParameter(f"{self.name}: step leaves the state space for noise {value}")
        elif self.sampler is None:
            raise InvalidParameter("a model needs a finite noise law or a sampler")

    @property
    def is_finite(self) -> bool:
        return self.noise_values is not None

    @property
    def float_probs(self) -> np.ndarray:
        return np.array([float(p) for p in self.noise_probs])

    def sample_noise(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.is_finite:
            picks = rng.choice(len(self.noise_values), size=size, p=self.float_probs)
            return np.asarray(self.noise_values)[picks]
        return self.sampler(rng, size)


def _validate_start(model: DiscreteModel, x0) -> None:
    if not bool(model.state_space.contains(float(x0))):
        raise InvalidState(f"x0={x0} is outside the state space of {model.name}")


def simulate_discrete(model: DiscreteModel, x0, n: int, seed=0, noises=None) -> Trajectory:
    """Path X_0..X_n; ``noises`` replaces the random draws when given."""
    _validate_start(model, x0)
    if n < 0:
        raise InvalidParameter(f"n must be nonnegative, got {n}")
    rng = as_generator(seed)
    states = [x0]
    drawn = list(noises) if noises is not None else None
    for k in range(n):
        theta = drawn[k] if drawn is not None else model.sample_noise(rng, 1)[0].item()
        nxt = model.step(states[-1], theta)
        redraws = 0
        while drawn is None and not bool(model.state_space.contains(float(nxt))) and redraws < MAX_REDRAWS:
            theta = model.sample_noise(rng, 1)[0].item()
            nxt = model.step(states[-1], theta)
            redraws += 1
        states.append(nxt)
    return Trajectory(kind="discrete", times=np.arange(n + 1), states=states)


def propagate_discrete(model: DiscreteModel, penalty, states: np.ndarray, n_steps: int, rng: np.random.Generator):
    """Advance every particle ``n_steps`` steps, returning the new states and the accrued log Z."""
    states = np.array(states, dtype=float)
    log_weights = np.zeros(states.shape[0])
    rejected = 0
    for _ in range(int(n_steps)):
        if penalty is not None:
            log_weights += penalty.log_survival(states)
        noise = model.sample_noise(rng, states.shape[0])
        nxt = model.step(states, noise)
        if model.state_space.excluded:
            bad = ~model.state_space.contains(nxt)
            tries = 0
            while bad.any() and tries < MAX_REDRAWS:
                rejected += int(bad.sum())
                noise[bad] = model.sample_noise(rng, int(bad.sum()))
                nxt[bad] = model.step(states[bad], noise[bad])
                bad = ~model.state_space.contains(nxt)
                tries += 1
        states = nxt
    if rejected:
        logger.info("%s: resampled %d steps that hit an excluded point", model.name, rejected)
    return states, log_weights


# ---------------------------------------------------------------------------- exact enumeration


def _check_enumerable(model: DiscreteModel, n: int, cap: Optional[int]) -> None:
    if not model.is_finite:
        raise UnsupportedModel(f"{model.name} has no finite noise law")
    cap = get_settings().enumeration_cap if cap is None else cap
    if len(model.noise_values) ** n > cap:
        raise InstanceTooLarge(f"{len(model.noise_values)}^{n} paths exceed the cap {cap}")


def is_exact_number(value) -> bool:
    return isinstance(value, (int, Fraction, sympy.Basic)) and not isinstance(value, bool)


def exact_like(probability, like):
    """Carry a Fraction probability into the number system of ``like``."""
    if isinstance(like, sympy.Basic):
        return sympy.Rational(probability.numerator, probability.denominator)
    return Fraction(probability)


def _exact_start(x0):
    return x0 if isinstance(x0, (Fraction, sympy.Basic)) else Fraction(x0)


def _use_exact(x0, exact: Optional[bool]) -> bool:
    return is_exact_number(x0) if exact is None else exact


def enumerate_paths(model: DiscreteModel, x0, n: int, cap: Optional[int] = None, exact: Optional[bool] = None):
    """All k^n noise paths as (states X_0..X_n, probability)."""
    _check_enumerable(model, n, cap)
    exact = _use_exact(x0, exact)
    start = _exact_start(x0) if exact else float(x0)
    probs = [exact_like(Fraction(p), start) for p in model.noise_probs] if exact else list(model.float_probs)
    paths: List[Tuple[tuple, Any]] = []
    for picks in itertools.product(range(len(model.noise_values)), repeat=n):
        states = [start]
        probability = 1 if exact else 1.0
        for pick in picks:
            states.append(model.step(states[-1], model.noise_values[pick]))
            probability *= probs[pick]
        paths.append((tuple(states), probability))
    return paths


def _exact_masses(model, penalty, x0, n):
    start = _exact_start(x0)
    probs = [exact_like(Fraction(p), start) for p in model.noise_probs]
    masses = {start: 1}
    for _ in range(n):
        nxt = defaultdict(int)
        for state, mass in masses.items():
            weight = mass * penalty.eval(state) if penalty is not None else mass
            for value, prob in zip(model.noise_values, probs):
                nxt[model.step(state, value)] += weight * prob
        masses = dict(nxt)
    return masses


def exact_endpoint_masses(model: DiscreteModel, penalty, x0, n: int, cap: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Float enumeration: endpoint X_n of every path with mass prob·Z_n."""
    _check_enumerable(model, n, cap)
    values = np.asarray(model.noise_values)
    probs = model.float_probs
    states = np.array([float(x0)])
    mass = np.ones(1)
    for _ in range(n):
        if penalty is not None:
            mass = mass * np.asarray(penalty.eval(states), dtype=float)
        states = model.step(np.repeat(states, len(values)), np.tile(values, len(states)))
        mass = (mass[:, None] * probs[None, :]).reshape(-1)
    return states, mass


def exact_feynman_kac(model: DiscreteModel, penalty, x0, n: int, f: Optional[Callable] = None, exact: Optional[bool] = None, cap: Optional[int] = None):
    """P_n f(x0) = E_{x0}[Z_n f(X_n)], summed over every noise path.

    Exact starts (int, Fraction or sympy numbers) with an exact penalty keep
    the whole computation exact; otherwise a vectorized float sum is used.
    """
    exact = _use_exact(x0, exact) and (penalty is None or penalty.exact)
    if exact:
        _check_enumerable(model, n, cap)
        masses = _exact_masses(model, penalty, x0, n)
        return sum(mass * (1 if f is None else f(state)) for state, mass in masses.items())
    states, mass = exact_endpoint_masses(model, penalty, x0, n, cap)
    values = np.ones_like(states) if f is None else np.asarray(f(states), dtype=float)
    return float(np.dot(mass, values))


def exact_conditional_law(model: DiscreteModel, penalty, x0, n: int, cap: Optional[int] = None) -> WeightedEnsemble:
    """δ_x P_n / δ_x P_n 1 as a weighted ensemble over endpoints."""
    states, mass = exact_endpoint_masses(model, penalty, x0, n, cap)
    return WeightedEnsemble(states, mass / mass.sum(), True, {"survival": float(mass.sum()), "exact": True}).merged()

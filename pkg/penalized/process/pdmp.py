"""Switched ODE systems Ẋ = F_{I_t}(X) driven by a finite Markov mode chain.

States of an ensemble are packed rows ``[x_1, ..., x_k, mode]``.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from penalized.errors import InvalidParameter, InvalidState
from penalized.process.penalty import CONTINUOUS_RHO
from penalized.process.trajectory import Segment, Trajectory
from utils.rng import as_generator

logger = logging.getLogger(__name__)

CLOSED_FORM_LINEAR = "closed-form-linear"
CLOSED_FORM_CUBIC = "closed-form-cubic"
RK4 = "rk4"
INTEGRATORS = (CLOSED_FORM_LINEAR, CLOSED_FORM_CUBIC, RK4)

RK4_TOL = 1e-9
RK4_MAX_STEPS = 2**14
SIMPSON_TOL = 1e-8
SIMPSON_MAX_PANELS = 2**12
BALL_SLACK = 1e-12


# ---------------------------------------------------------------------------- flows


def expm_2x2(A: np.ndarray, t: np.ndarray) -> np.ndarray:
    """e^{A t} for one 2×2 matrix and a vector of times, shape (N, 2, 2)."""
    t = np.asarray(t, dtype=float)
    s = np.trace(A) / 2.0
    delta = np.sqrt(complex(s * s - np.linalg.det(A)))
    if abs(delta) < 1e-12:
        cosh_part = np.ones_like(t, dtype=complex)
        sinh_part = t.astype(complex)
    else:
        cosh_part = np.cosh(delta * t)
        sinh_part = np.sinh(delta * t) / delta
    shifted = A - s * np.eye(2)
    matrices = cosh_part[:, None, None] * np.eye(2) + sinh_part[:, None, None] * shifted
    return (np.exp(s * t)[:, None, None] * matrices).real


def linear_flow(A: np.ndarray, center: np.ndarray) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Exact flow of F(x) = A(x − center): x(t) = center + e^{At}(x − center)."""
    A = np.asarray(A, dtype=float)
    center = np.asarray(center, dtype=float)

    def flow(x: np.ndarray, t: np.ndarray) -> np.ndarray:
        return center + np.einsum("nij,nj->ni", expm_2x2(A, t), x - center)

    return flow


def cubic_flow(p: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Exact flow of F(x) = p x − x³ (solve the linear ODE for x^{-2})."""

    def flow(x: np.ndarray, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)[:, None]
        growth = 2.0 * t if p == 0 else -np.expm1(-2.0 * p * t) / p
        return x / np.sqrt(np.exp(-2.0 * p * t) + x * x * growth)

    return flow


def rk4_flow(field_fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, t: np.ndarray, radius: float = np.inf, keep_sign: bool = False) -> np.ndarray:
    """Adaptive RK4 by step doubling until successive results agree within 1e-9.

    A step count is also rejected while any particle leaves the ball of
    ``radius`` or (with ``keep_sign``) changes sign, which halves the step.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)

    def run(steps: int) -> np.ndarray:
        h = (t / steps)[:, None]
        y = x.copy()
        for _ in range(steps):
            k1 = field_fn(y)
            k2 = field_fn(y + 0.5 * h * k1)
            k3 = field_fn(y + 0.5 * h * k2)
            k4 = field_fn(y + h * k3)
            y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        return y

    steps = 4
    coarse = run(steps)
    while True:
        fine = run(2 * steps)
        steps *= 2
        error = np.max(np.abs(fine - coarse), axis=1)
        bad = np.linalg.norm(fine, axis=1) > radius * (1 + BALL_SLACK)
        if keep_sign:
            bad |= np.any(np.sign(fine) != np.sign(x), axis=1)
        if (np.all(error <= RK4_TOL) and not bad.any()) or steps >= RK4_MAX_STEPS:
            if steps >= RK4_MAX_STEPS:
                logger.warning("rk4 stopped at %d steps (error %.3g)", steps, float(error.max()))
            return fine
        coarse = fine


# ---------------------------------------------------------------------------- model


@dataclass(frozen=True)
class PdmpModel:
    name: str
    modes: Tuple[Any, ...]
    rate_matrix: np.ndarray
    vector_fields: Tuple[Callable[[np.ndarray], np.ndarray], ...]
    flow_integrator: str
    radius: float
    dim: int
    exact_flows: Optional[Tuple[Callable[[np.ndarray, np.ndarray], np.ndarray], ...]] = None
    keep_sign: bool = False
    params: Dict[str, Any] = field(default_factory=dict)

    time_kind = "continuous"

    def __post_init__(self):
        Q = np.asarray(self.rate_matrix, dtype=float)
        n = len(self.modes)
        if Q.shape != (n, n):
            raise InvalidParameter(f"rate matrix must be {n}x{n}")
        off_diagonal = Q[~np.eye(n, dtype=bool)]
        if np.any(off_diagonal < 0) or np.any(np.abs(Q.sum(axis=1)) > 1e-12):
            raise InvalidParameter("rate matrix needs nonnegative off-diagonal entries and zero row sums")
        if self.flow_integrator not in INTEGRATORS:
            raise InvalidParameter(f"unknown integrator {self.flow_integrator!r}")
        if self.flow_integrator != RK4 and self.exact_flows is None:
            raise InvalidParameter(f"{self.flow_integrator} needs exact flows")
        if not self.radius > 0:
            raise InvalidParameter("invariant radius must be positive")
        Q.setflags(write=False)
        object.__setattr__(self, "rate_matrix", Q)
        sphere_excess = self.inward_excess()
        if sphere_excess > 1e-12:
            raise InvalidParameter(f"{self.name}: a vector field points outward on the sphere of radius {self.radius}")

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def exit_rates(self) -> np.ndarray:
        return -np.diag(self.rate_matrix)

    def jump_cdf(self) -> np.ndarray:
        jumps = self.rate_matrix - np.diag(np.diag(self.rate_matrix))
        totals = jumps.sum(axis=1, keepdims=True)
        jumps = np.divide(jumps, totals, out=np.zeros_like(jumps), where=totals > 0)
        return np.cumsum(jumps, axis=1)

    def velocity(self, x: np.ndarray, modes: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        for i, fn in enumerate(self.vector_fields):
            mask = modes == i
            if mask.any():
                out[mask] = fn(x[mask])
        return out

    def flow(self, x: np.ndarray, modes: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Flow each particle for its own duration under its own mode."""
        x = np.asarray(x, dtype=float)
        modes = np.asarray(modes, dtype=int)
        t = np.asarray(t, dtype=float)
        out = np.empty_like(x)
        for i in range(self.n_modes):
            mask = modes == i
            if not mask.any():
                continue
            if self.flow_integrator == RK4:
                out[mask] = rk4_flow(self.vector_fields[i], x[mask], t[mask], self.radius, self.keep_sign)
            else:
                out[mask] = self.exact_flows[i](x[mask], t[mask])
        return out

    def inward_excess(self, samples: int = 256, seed: int = 0) -> float:
        """max over sampled sphere points and modes of ⟨F_i(x), x⟩ (≤ 0 for an invariant ball)."""
        rng = np.random.default_rng(seed)
        directions = rng.normal(size=(samples, self.dim))
        if self.dim == 1:
            directions = np.array([[-1.0], [1.0]])
        sphere = self.radius * directions / np.linalg.norm(directions, axis=1, keepdims=True)
        return float(max(np.max(np.sum(fn(sphere) * sphere, axis=1)) for fn in self.vector_fields))

    def pack(self, x, mode) -> np.ndarray:
        return np.append(np.asarray(x, dtype=float).reshape(self.dim), float(mode))

    def unpack(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return states[:, :-1].copy(), states[:, -1].astype(int)

    def contains(self, states) -> np.ndarray:
        x, _ = self.unpack(states)
        return np.linalg.norm(x, axis=1) <= self.radius * (1 + BALL_SLACK)


def monotonicity_constant(model: PdmpModel, samples: int = 1000, seed: int = 0) -> float:
    """Sampled γ̂ with ⟨F_i(x) − F_i(y), x − y⟩ ≤ −γ̂‖x − y‖² for every mode."""
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(2, samples, model.dim))
    radii = model.radius * rng.random((2, samples, 1)) ** (1.0 / model.dim)
    x, y = radii * points / np.linalg.norm(points, axis=2, keepdims=True)
    gap = x - y
    squared = np.sum(gap * gap, axis=1)
    keep = squared > 1e-12
    ratios = [np.sum((fn(x) - fn(y)) * gap, axis=1)[keep] / squared[keep] for fn in model.vector_fields]
    return float(-max(np.max(r) for r in ratios))


# ---------------------------------------------------------------------------- penalties along segments


def integrate_rho(model: PdmpModel, penalty, x: np.ndarray, modes: np.ndarray, durations: np.ndarray) -> np.ndarray:
    """∫_0^dt ρ(φ_s(x), i) ds per particle: closed form for mode-only rates, adaptive Simpson otherwise."""
    penalty.require(CONTINUOUS_RHO)
    modes = np.asarray(modes, dtype=int)
    durations = np.asarray(durations, dtype=float)
    if penalty.mode_rates is not None:
        return np.asarray(penalty.mode_rates)[modes] * durations
    if x.shape[0] == 0:
        return np.zeros(0)

    def simpson(panels: int) -> np.ndarray:
        h = durations / panels
        nodes = [x]
        for _ in range(panels):
            nodes.append(model.flow(nodes[-1], modes, h))
        values = np.stack([penalty.eval(np.column_stack([node, modes])) for node in nodes], axis=1)
        weights = np.ones(panels + 1)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        return (h / 3.0) * (values @ weights)

    panels = 2
    coarse = simpson(panels)
    while panels < SIMPSON_MAX_PANELS:
        panels *= 2
        fine = simpson(panels)
        if np.all(np.abs(fine - coarse) <= 15.0 * SIMPSON_TOL):
            return fine
        coarse = fine
    logger.warning("Simpson integration stopped at %d panels", panels)
    return coarse


# ---------------------------------------------------------------------------- simulation


def _next_modes(model: PdmpModel, modes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = model.jump_cdf()[modes]
    return np.sum(rng.random(len(modes))[:, None] >= cdf, axis=1).clip(max=model.n_modes - 1)


def _holding_times(model: PdmpModel, modes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    rates = model.exit_rates[modes]
    draws = -np.log1p(-rng.random(len(modes)))
    return np.divide(draws, rates, out=np.full(len(modes), np.inf), where=rates > 0)


def propagate_pdmp(model: PdmpModel, penalty, states: np.ndarray, duration: float, rng: np.random.Generator):
    """Advance every particle by ``duration``, returning packed states and the accrued log Z.

    Exponential clocks are memoryless, so restarting them at each call keeps
    the law exact.
    """
    x, modes = model.unpack(states)
    remaining = np.full(len(modes), float(duration))
    log_weights = np.zeros(len(modes))
    active = remaining > 0
    while active.any():
        idx = np.flatnonzero(active)
        hold = _holding_times(model, modes[idx], rng)
        left = remaining[idx]
        dt = np.minimum(hold, left)
        if penalty is not None:
            log_weights[idx] -= integrate_rho(model, penalty, x[idx], modes[idx], dt)
        x[idx] = model.flow(x[idx], modes[idx], dt)
        jumped = hold < left
        if jumped.any():
            modes[idx[jumped]] = _next_modes(model, modes[idx[jumped]], rng)
        remaining[idx] = np.where(jumped, left - hold, 0.0)
        active[idx] = jumped & (remaining[idx] > 0)
    return np.column_stack([x, modes]), log_weights


def simulate_pdmp(model: PdmpModel, start, horizon: float, seed=0) -> Trajectory:
    """One piecewise-deterministic path on [0, horizon]; ``start`` is (vector, mode)."""
    row = model.pack(*start) if isinstance(start, tuple) else np.asarray(start, dtype=float)
    if not model.contains(row)[0]:
        raise InvalidState(f"start {start} lies outside the invariant ball of radius {model.radius}")
    if not horizon > 0:
        raise InvalidParameter(f"horizon must be positive, got {horizon}")
    rng = as_generator(seed)
    x, modes = model.unpack(row)
    t = 0.0
    segments = []
    while t < horizon:
        hold = _holding_times(model, modes, rng)[0]
        dt = min(hold, horizon - t)
        segments.append(Segment(int(modes[0]), t, x[0].copy(), t + dt))
        x = model.flow(x, modes, np.array([dt]))
        t += dt
        if hold < horizon - segments[-1].t_enter:
            modes = _next_modes(model, modes, rng)
        else:
            t = horizon
    times = np.array([s.t_enter for s in segments] + [horizon])
    states = [np.append(s.x_enter, s.mode) for s in segments] + [np.append(x[0], segments[-1].mode)]
    return Trajectory(kind="pdmp", times=times, states=states, segments=tuple(segments), model=model)

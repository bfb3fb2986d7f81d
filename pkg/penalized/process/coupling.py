"""Markovian couplings of two copies of a process.

``propagate_pairs`` advances whole ensembles of pairs and returns both
positions with both log-weights, which is all the assumption checks need.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from penalized.process.discrete import MAX_REDRAWS, DiscreteModel, _check_enumerable
from penalized.process.pdmp import PdmpModel, _holding_times, _next_modes, integrate_rho
from penalized.process.trajectory import Segment, Trajectory
from utils.rng import as_generator

SYNCHRONOUS = "synchronous"
MERGE = "independent-then-merge"


@dataclass
class PairState:
    xs: np.ndarray
    ys: np.ndarray
    log_wx: np.ndarray
    log_wy: np.ndarray
    merge_times: Optional[np.ndarray] = None


class CoupledModel:
    kind = ""

    def __init__(self, model):
        self.model = model

    @property
    def marginals(self):
        return self.model, self.model

    def propagate_pairs(self, penalty, xs, ys, duration, rng: np.random.Generator, start_time: float = 0.0) -> PairState:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.model.name})"


class SynchronousCoupling(CoupledModel):
    """Both chains read the same noise θ_{n+1} at every step."""

    kind = SYNCHRONOUS

    def propagate_pairs(self, penalty, xs, ys, duration, rng, start_time=0.0, carry: Optional[PairState] = None) -> PairState:
        xs = np.array(xs, dtype=float)
        ys = np.array(ys, dtype=float)
        log_wx = np.zeros(len(xs)) if carry is None else carry.log_wx.copy()
        log_wy = np.zeros(len(ys)) if carry is None else carry.log_wy.copy()
        model: DiscreteModel = self.model
        for _ in range(int(duration)):
            if penalty is not None:
                log_wx += penalty.log_survival(xs)
                log_wy += penalty.log_survival(ys)
            noise = model.sample_noise(rng, len(xs))
            nx, ny = model.step(xs, noise), model.step(ys, noise)
            if model.state_space.excluded:
                bad = ~(model.state_space.contains(nx) & model.state_space.contains(ny))
                tries = 0
                while bad.any() and tries < MAX_REDRAWS:
                    noise[bad] = model.sample_noise(rng, int(bad.sum()))
                    nx[bad], ny[bad] = model.step(xs[bad], noise[bad]), model.step(ys[bad], noise[bad])
                    bad = ~(model.state_space.contains(nx) & model.state_space.contains(ny))
                    tries += 1
            xs, ys = nx, ny
        return PairState(xs, ys, log_wx, log_wy)

    def simulate(self, x, y, n: int, seed=0) -> Tuple[Trajectory, Trajectory]:
        rng = as_generator(seed)
        path_x, path_y = [x], [y]
        for _ in range(n):
            theta = self.model.sample_noise(rng, 1)[0].item()
            path_x.append(self.model.step(path_x[-1], theta))
            path_y.append(self.model.step(path_y[-1], theta))
        times = np.arange(n + 1)
        return Trajectory("discrete", times, path_x), Trajectory("discrete", times, path_y)

    def exact_paths(self, penalty, x, y, n: int, cap: Optional[int] = None):
        """Joint enumeration: per path probability, X_n, Y_n, Z^X_n, Z^Y_n (floats)."""
        model: DiscreteModel = self.model
        _check_enumerable(model, n, cap)
        values = np.asarray(model.noise_values)
        probs = model.float_probs
        k = len(values)
        xs, ys = np.array([float(x)]), np.array([float(y)])
        prob, zx, zy = np.ones(1), np.ones(1), np.ones(1)
        for _ in range(n):
            if penalty is not None:
                zx = zx * np.asarray(penalty.eval(xs), dtype=float)
                zy = zy * np.asarray(penalty.eval(ys), dtype=float)
            noise = np.tile(values, len(xs))
            xs, ys = model.step(np.repeat(xs, k), noise), model.step(np.repeat(ys, k), noise)
            prob = (prob[:, None] * probs[None, :]).reshape(-1)
            zx, zy = np.repeat(zx, k), np.repeat(zy, k)
        return prob, xs, ys, zx, zy


class MergeCoupling(CoupledModel):
    """Independent evolution until the modes first agree (time T_0), then one shared mode process.

    Each continuous component always follows its own flow.
    """

    kind = MERGE

    def _advance(self, penalty, x, i, y, j, merged, remaining, rng):
        """One event for every pair: the earliest clock among the live ones, or the end of the window."""
        model: PdmpModel = self.model
        hold_x = _holding_times(model, i, rng)
        hold_y = np.where(merged, np.inf, _holding_times(model, j, rng))
        dt = np.minimum(np.minimum(hold_x, hold_y), remaining)
        j_eff = np.where(merged, i, j)
        cost_x = cost_y = 0.0
        if penalty is not None:
            cost_x = integrate_rho(model, penalty, x, i, dt)
            cost_y = integrate_rho(model, penalty, y, j_eff, dt)
        x = model.flow(x, i, dt)
        y = model.flow(y, j_eff, dt)
        jump_x = (hold_x < remaining) & (hold_x <= hold_y)
        jump_y = ~merged & (hold_y < remaining) & (hold_y < hold_x)
        i = i.copy()
        j = j_eff.copy()
        if jump_x.any():
            i[jump_x] = _next_modes(model, i[jump_x], rng)
        if jump_y.any():
            j[jump_y] = _next_modes(model, j[jump_y], rng)
        newly = ~merged & (i == j)
        merged = merged | newly
        j = np.where(merged, i, j)
        jumped = jump_x | jump_y
        remaining = np.where(jumped, remaining - dt, 0.0)
        return x, i, y, j, merged, newly, dt, remaining, jumped, cost_x, cost_y

    def propagate_pairs(self, penalty, us, vs, duration, rng, start_time=0.0, carry: Optional[PairState] = None) -> PairState:
        model: PdmpModel = self.model
        x, i = model.unpack(us)
        y, j = model.unpack(vs)
        n = len(i)
        log_wx = np.zeros(n) if carry is None else carry.log_wx.copy()
        log_wy = np.zeros(n) if carry is None else carry.log_wy.copy()
        if carry is not None and carry.merge_times is not None:
            merge_times = carry.merge_times.copy()
        else:
            merge_times = np.where(i == j, start_time, np.inf)
        merged = np.isfinite(merge_times) & (i == j)
        remaining = np.full(n, float(duration))
        elapsed = np.zeros(n)
        active = remaining > 0
        while active.any():
            idx = np.flatnonzero(active)
            (x[idx], i[idx], y[idx], j[idx], merged[idx], newly, dt, remaining[idx], jumped, cost_x, cost_y) = self._advance(
                penalty, x[idx], i[idx], y[idx], j[idx], merged[idx], remaining[idx], rng
            )
            log_wx[idx] -= cost_x
            log_wy[idx] -= cost_y
            elapsed[idx] += dt
            merge_times[idx[newly]] = start_time + elapsed[idx[newly]]
            active[idx] = jumped & (remaining[idx] > 0)
        return PairState(np.column_stack([x, i]), np.column_stack([y, j]), log_wx, log_wy, merge_times)

    def simulate(self, u, v, horizon: float, seed=0):
        """Paired trajectories on [0, horizon] plus the merge time T_0 (inf when the modes never agree)."""
        model: PdmpModel = self.model
        rng = as_generator(seed)
        row_u = model.pack(*u) if isinstance(u, tuple) else np.asarray(u, dtype=float)
        row_v = model.pack(*v) if isinstance(v, tuple) else np.asarray(v, dtype=float)
        x, i = model.unpack(row_u)
        y, j = model.unpack(row_v)
        merged = i == j
        merge_time = 0.0 if merged[0] else np.inf
        remaining = np.array([float(horizon)])
        t = 0.0
        seg_x, seg_y = [], []
        while remaining[0] > 0:
            mode_x, mode_y = int(i[0]), int(i[0] if merged[0] else j[0])
            entry_x, entry_y = x[0].copy(), y[0].copy()
            x, i, y, j, merged, newly, dt, remaining, jumped, _, _ = self._advance(None, x, i, y, j, merged, remaining, rng)
            seg_x.append(Segment(mode_x, t, entry_x, t + dt[0]))
            seg_y.append(Segment(mode_y, t, entry_y, t + dt[0]))
            t += dt[0]
            if newly[0]:
                merge_time = t
            if not jumped[0]:
                break
        return _pdmp_path(model, seg_x, x[0], horizon), _pdmp_path(model, seg_y, y[0], horizon), merge_time


def _pdmp_path(model, segments, final_x, horizon) -> Trajectory:
    times = np.array([s.t_enter for s in segments] + [horizon])
    states = [np.append(s.x_enter, s.mode) for s in segments] + [np.append(final_x, segments[-1].mode)]
    return Trajectory("pdmp", times, states, tuple(segments), model)


def couple_synchronous(model: DiscreteModel) -> SynchronousCoupling:
    return SynchronousCoupling(model)


def couple_pdmp_merge(model: PdmpModel) -> MergeCoupling:
    return MergeCoupling(model)


def exact_coupled_expectation(model: DiscreteModel, penalty, x, y, n: int, g: Callable, cap: Optional[int] = None) -> float:
    """E[g(X_n, Y_n, Z^X_n, Z^Y_n)] under the synchronous coupling, summed over every noise path."""
    prob, xs, ys, zx, zy = SynchronousCoupling(model).exact_paths(penalty, x, y, n, cap)
    return float(np.dot(prob, np.asarray(g(xs, ys, zx, zy), dtype=float)))

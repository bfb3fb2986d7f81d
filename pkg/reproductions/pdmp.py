"""Switched dynamical systems: the linear example and the bistable cubic example."""

import logging
import math

import numpy as np
import pandas as pd

from penalized.criteria import r_threshold, switching_gap
from penalized.errors import InvalidParameter
from penalized.estimators import conditional_law, coupled_conditional_laws, smc_conditional_law
from penalized.metric import absolute_metric, ensemble_w1, w1_quantile
from penalized.models import build_entry
from penalized.process import simulate_pdmp
from reproductions.common import finished, guarded, ratio_below, w1_stderr, x_marginal
from utils.rng import stream_rng

logger = logging.getLogger(__name__)

BOOTSTRAP_STREAM = 900_000
PATH_STREAM = 800_000
LINE_TOLERANCE = 1e-7


def _distance_to_line(points: np.ndarray, direction: np.ndarray) -> np.ndarray:
    unit = direction / np.linalg.norm(direction)
    return np.linalg.norm(points - np.outer(points @ unit, unit), axis=1)


@guarded
def pdmp_linear(seed: int, workers=None, horizon: float = 20.0, paths: int = 20, dense: int = 401, N: int = 4000, t_early: float = 5.0, t_late: float = 15.0, on_line=None, off_line=None, replicates: int = 10) -> dict:
    """Flow invariance of the line spanned by an eigenvector, and contraction of conditional laws from on and off it."""
    entry = build_entry("switched-linear")
    model = entry.model
    direction = np.asarray(entry.params["a"], dtype=float)
    on_line = [1.5, 0.0] if on_line is None else on_line
    off_line = [-1.0, 1.2] if off_line is None else off_line
    if _distance_to_line(np.array([on_line]), direction)[0] > LINE_TOLERANCE:
        raise InvalidParameter(f"{on_line} does not lie on the line spanned by {direction.tolist()}")
    grid = np.linspace(0.0, horizon, dense)
    worst = 0.0
    for k in range(paths):
        path = simulate_pdmp(model, (np.asarray(on_line, dtype=float), k % model.n_modes), horizon, seed=stream_rng(seed, PATH_STREAM + k))
        states = np.array([path.state_at(t)[:-1] for t in grid])
        worst = max(worst, float(_distance_to_line(states, direction).max()))

    rng = stream_rng(seed, BOOTSTRAP_STREAM)
    start_on, start_off = (np.asarray(on_line, dtype=float), 0), (np.asarray(off_line, dtype=float), 0)
    rows = []
    for t in (t_early, t_late):
        law_on, law_off = coupled_conditional_laws(entry.coupling, entry.penalty, start_on, start_off, t, N, seed, workers)
        rows.append({"t": t, "w1": ensemble_w1(law_on, law_off, entry.metric), "stderr": w1_stderr(law_on, law_off, entry.metric, rng, replicates, paired=True), "ess": min(law_on.ess, law_off.ess)})
    table = pd.DataFrame(rows)
    checks = {
        "line_invariant": worst <= LINE_TOLERANCE,
        "w1_contracts": ratio_below(rows[1]["w1"], rows[0]["w1"], 0.7, rows[1]["stderr"], rows[0]["stderr"]),
    }
    report = {"max_distance_to_line": worst, "direction": direction.tolist(), "radius": model.radius, "checks": checks}
    return finished(f"paths stay within {worst:.2g} of the line; W1 {rows[0]['w1']:.3g} -> {rows[1]['w1']:.3g}", {"w1_decay": table}, report)


def _start(x: float):
    return (np.array([x]), 0)


@guarded
def pdmp_bistable(seed: int, workers=None, p_plus: float = 2.0, p_minus: float = -1.0, start: float = 0.5, N: int = 2000, horizon: float = 30.0, t_early: float = 10.0, t_late: float = 25.0, r_max: float = 1e4, r_step: float = 0.5, target=None, replicates: int = 10) -> dict:
    """Without killing the signs never mix; killing in the unstable mode beyond the threshold pulls both starts to 0."""
    if not 0 < start < math.sqrt(p_plus):
        raise InvalidParameter(f"start must lie in (0, sqrt(p_plus)), got {start}")
    rng = stream_rng(seed, BOOTSTRAP_STREAM)
    scalar = absolute_metric(-math.sqrt(p_plus), math.sqrt(p_plus))

    free = build_entry("bistable", {"p_plus": p_plus, "p_minus": p_minus, "r": 0.0})
    up = conditional_law(free.model, free.penalty, _start(start), horizon, N, seed, workers)
    down = conditional_law(free.model, free.penalty, _start(-start), horizon, N, seed, workers)
    apart = w1_quantile(x_marginal(up), x_marginal(down))

    target = -p_minus / 2 if target is None else target
    threshold = r_threshold(p_plus, p_minus, r_max, r_step, target)
    if not threshold.found:
        raise InvalidParameter(f"no r <= {r_max} reaches a switching gap of {target}")
    killed = build_entry("bistable", {"p_plus": p_plus, "p_minus": p_minus, "r": threshold.r})
    rows = []
    for t in (t_early, t_late, horizon):
        pos = smc_conditional_law(killed.model, killed.penalty, _start(start), t, N, resample_every=1.0, seed=seed)
        neg = smc_conditional_law(killed.model, killed.penalty, _start(-start), t, N, resample_every=1.0, seed=(seed + 1) % 2**64)
        pos_x, neg_x = x_marginal(pos), x_marginal(neg)
        rows.append(
            {
                "t": t,
                "w1": w1_quantile(pos_x, neg_x),
                "stderr": w1_stderr(pos_x, neg_x, scalar, rng, replicates),
                "mean_abs": pos_x.mean(np.abs),
                "mean_abs_stderr": pos_x.std_error(np.abs),
            }
        )
    table = pd.DataFrame(rows)
    gaps = pd.DataFrame({"r": np.arange(0.0, 4 * threshold.r + r_step, r_step)})
    gaps["gamma"] = [switching_gap(p_plus, p_minus, r) for r in gaps["r"]]
    checks = {
        "sign_invariant": bool(np.all(up.points[:, 0] > 0) and np.all(down.points[:, 0] < 0)),
        "no_merging_without_killing": apart >= 0.3,
        "gap_limit": abs(threshold.gamma_at_r_max - threshold.limit) <= 1e-3,
        "killed_mean_abs_small": rows[-1]["mean_abs"] < 0.1,
        "killed_w1_contracts": ratio_below(rows[1]["w1"], rows[0]["w1"], 0.6, rows[1]["stderr"], rows[0]["stderr"]),
    }
    report = {
        "w1_without_killing": apart,
        "pdmp_metric_without_killing": ensemble_w1(up, down, free.metric),
        "threshold": {"r": threshold.r, "gamma_at_r": threshold.gamma_at_r, "gamma_at_r_max": threshold.gamma_at_r_max, "limit": threshold.limit, "target": target},
        "checks": checks,
    }
    return finished(f"threshold r = {threshold.r:g}, mean |X| at t={horizon:g} is {rows[-1]['mean_abs']:.3g}", {"killed_laws": table, "switching_gap": gaps}, report)


#====Declarations==================================================

pdmp_linear_declaration = {
    "name": "pdmp-linear",
    "section": "switched linear system with modes Ax and A(x - a)",
    "description": "Paths started on the eigenline of A stay on it; conditional laws from on and off the line still approach each other in W1",
    "parameters": {
        "type": "object",
        "properties": {
            "horizon": {"type": "number", "default": 20.0},
            "paths": {"type": "integer", "default": 20, "description": "simulated paths for the invariance check"},
            "dense": {"type": "integer", "default": 401, "description": "evaluation times per path"},
            "N": {"type": "integer", "default": 4000},
            "t_early": {"type": "number", "default": 5.0},
            "t_late": {"type": "number", "default": 15.0},
            "on_line": {"type": "array", "items": {"type": "number"}, "default": [1.5, 0.0]},
            "off_line": {"type": "array", "items": {"type": "number"}, "default": [-1.0, 1.2]},
            "replicates": {"type": "integer", "default": 10},
        },
        "required": [],
    },
}

pdmp_bistable_declaration = {
    "name": "pdmp-bistable",
    "section": "bistable switching x' = p_I x - x^3: sign invariance and the large-r regime",
    "description": "Sign invariance and non-merging laws without killing, then the smallest grid r with a positive switching gap and the resulting contraction",
    "parameters": {
        "type": "object",
        "properties": {
            "p_plus": {"type": "number", "default": 2.0},
            "p_minus": {"type": "number", "default": -1.0},
            "start": {"type": "number", "default": 0.5},
            "N": {"type": "integer", "default": 2000},
            "horizon": {"type": "number", "default": 30.0},
            "t_early": {"type": "number", "default": 10.0},
            "t_late": {"type": "number", "default": 25.0},
            "r_max": {"type": "number", "default": 1e4},
            "r_step": {"type": "number", "default": 0.5},
            "target": {"type": "number", "default": None, "description": "switching gap to reach; -p_minus/2 when unset"},
            "replicates": {"type": "integer", "default": 10},
        },
        "required": [],
    },
}

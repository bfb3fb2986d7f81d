"""Plumbing shared by the named experiments: parameter models, status dicts and decay fits."""

import functools
import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, create_model
from scipy.stats import linregress

from penalized.errors import InvalidCurve, NonConverged, PenalizedError
from penalized.metric import WeightedEnsemble, ensemble_w1

logger = logging.getLogger(__name__)

SUCCESS = "success"
NON_CONVERGED = "non-converged"
ERROR = "error"
SIGMAS = 3.0
BOOTSTRAP_REPLICATES = 20

JSON_TYPES = {"integer": int, "number": float, "boolean": bool, "string": str, "object": dict}


def _annotation(schema: Dict[str, Any]):
    if schema["type"] == "array":
        return List[JSON_TYPES[schema.get("items", {}).get("type", "number")]]
    return JSON_TYPES[schema["type"]]


def parameters_model(declaration: Dict[str, Any]) -> type:
    """A pydantic model for the ``parameters`` schema of an experiment declaration.

    Every property needs a ``default``; unknown keys are rejected.
    """
    properties = declaration["parameters"]["properties"]
    fields = {name: (Optional[_annotation(schema)] if schema.get("default") is None else _annotation(schema), schema.get("default")) for name, schema in properties.items()}
    title = "".join(part.title() for part in declaration["name"].split("-")) + "Params"
    return create_model(title, __config__=ConfigDict(extra="forbid"), **fields)


def validate_params(declaration: Dict[str, Any], params: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Defaults merged with ``params``; raises pydantic's ValidationError on bad input."""
    model: BaseModel = parameters_model(declaration).model_validate(params or {})
    return model.model_dump()


def finished(message: str, tables: Dict[str, pd.DataFrame], report: Dict[str, Any], converged: bool = True) -> dict:
    checks = report.get("checks", {})
    failed = [name for name, ok in checks.items() if not ok]
    for name in failed:
        logger.warning("check failed: %s", name)
    summary = f"{message} ({len(checks) - len(failed)}/{len(checks)} checks passed)" if checks else message
    return {"status": SUCCESS if converged else NON_CONVERGED, "message": summary, "tables": tables, "report": report}


def guarded(fn: Callable[..., dict]) -> Callable[..., dict]:
    """Turn library errors raised by an experiment into status dicts."""

    @functools.wraps(fn)
    def wrapper(**kwargs) -> dict:
        try:
            return fn(**kwargs)
        except NonConverged as e:
            logger.warning("%s did not converge: %s", fn.__name__, e)
            return {"status": NON_CONVERGED, "message": str(e), "tables": {}, "report": {"code": e.code}}
        except PenalizedError as e:
            logger.error("%s failed: %s", fn.__name__, e)
            return {**e.as_dict(), "tables": {}, "report": {"code": e.code}}

    return wrapper


def log_linear_fit(times: Sequence[float], values: Sequence[float]) -> Dict[str, float]:
    """Least-squares slope of log(value) against t with its standard error."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0) or len(times) < 2:
        raise InvalidCurve("a log-linear fit needs at least two positive values")
    if len(times) == 2:
        slope = float(np.diff(np.log(values))[0] / np.diff(times)[0])
        return {"slope": slope, "stderr": 0.0, "intercept": float(np.log(values[0]) - slope * times[0])}
    fit = linregress(times, np.log(values))
    return {"slope": float(fit.slope), "stderr": float(fit.stderr), "intercept": float(fit.intercept)}


def significantly_negative(fit: Dict[str, float]) -> bool:
    return fit["slope"] + SIGMAS * fit["stderr"] < 0


def ratio_below(later: float, earlier: float, factor: float, later_err: float = 0.0, earlier_err: float = 0.0) -> bool:
    """later ≤ factor·earlier, allowing ``SIGMAS`` combined standard errors."""
    slack = SIGMAS * math.hypot(later_err, factor * earlier_err)
    return later <= factor * earlier + slack


def x_marginal(ensemble: WeightedEnsemble) -> WeightedEnsemble:
    """Scalar law of the continuous coordinate of one-dimensional PDMP rows."""
    return WeightedEnsemble(ensemble.points[:, 0], ensemble.weights, True, dict(ensemble.info))


def _reweighted(ensemble: WeightedEnsemble, indices: np.ndarray) -> WeightedEnsemble:
    weights = ensemble.weights[indices]
    return WeightedEnsemble(ensemble.points[indices], weights / weights.sum(), True)


def w1_stderr(mu: WeightedEnsemble, nu: WeightedEnsemble, metric, rng: np.random.Generator, replicates: int = BOOTSTRAP_REPLICATES, paired: bool = False) -> float:
    """Bootstrap standard error of W1(μ, ν).

    ``paired`` resamples the same indices on both sides, for two laws read off
    the same coupled paths.
    """
    values = []
    for _ in range(replicates):
        left = rng.integers(0, mu.size, mu.size)
        right = left if paired else rng.integers(0, nu.size, nu.size)
        values.append(ensemble_w1(_reweighted(mu, left), _reweighted(nu, right), metric))
    return float(np.std(values, ddof=1))

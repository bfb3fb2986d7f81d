"""Config-driven runs: any catalog model, penalty and metric through one estimator."""

import logging
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from penalized.criteria import cross_check_equivalence, estimate_A, estimate_B, estimate_C, estimate_H
from penalized.criteria.assumptions import DEFAULT_GRID, REFINED_GRID
from penalized.errors import InvalidParameter, RequiresExactArithmetic, UnsupportedModel
from penalized.estimators import (
    conditional_law,
    coupled_conditional_laws,
    estimate_lambda0,
    exact_survival_curve,
    qsd_fixed_point,
    quasi_stationarity_residual,
    smc_conditional_law,
    survival_curve,
)
from penalized.estimators.qsd import COMPRESSIONS
from penalized.metric import ensemble_w1
from penalized.metric.ensemble import RESAMPLING_SCHEMES
from penalized.models import build_entry, build_metric
from penalized.process import MERGE, SYNCHRONOUS, couple_pdmp_merge, couple_synchronous, exact_feynman_kac, is_discrete
from reproductions.common import finished, guarded

logger = logging.getLogger(__name__)

ESTIMATORS = (
    "conditional-law",
    "smc-conditional-law",
    "survival",
    "qsd",
    "coupled-w1",
    "A",
    "B",
    "C",
    "H",
    "equivalence",
)

Start = Union[float, str, List[float]]
Point = Union[float, List[float]]
Pairs = Optional[List[Tuple[Point, Point]]]
Method = Literal["auto", "exact", "mc"]


class Options(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SmcOptions(Options):
    resample_every: float = 1
    scheme: Literal[RESAMPLING_SCHEMES] = "multinomial"


class SurvivalOptions(Options):
    exact: bool = False


class QsdOptions(Options):
    tol: float = Field(0.01, gt=0)
    max_iter: int = Field(50, ge=1)
    compression: Literal[COMPRESSIONS] = "quantile"
    eta_grid: Optional[List[Point]] = None
    eta_t: Optional[float] = None
    eta_N: int = Field(2000, ge=2)
    with_eta: bool = True
    cap: Optional[int] = Field(None, gt=0)


class AOptions(Options):
    pairs: Pairs = None
    exact: bool = False
    wasserstein: bool = False
    cap: Optional[int] = Field(None, gt=0)


class BOptions(Options):
    pairs: Pairs = None
    method: Method = "auto"
    cap: Optional[int] = Field(None, gt=0)


class COptions(Options):
    pairs: Pairs = None
    exact: bool = False
    cap: Optional[int] = Field(None, gt=0)


class HOptions(Options):
    grid: Optional[List[Point]] = None
    method: Method = "auto"
    cap: Optional[int] = Field(None, gt=0)


class EquivalenceOptions(Options):
    pairs: Pairs = None
    exact: bool = False
    grid_size: int = Field(DEFAULT_GRID, ge=2)
    refined_size: int = Field(REFINED_GRID, ge=2)
    wasserstein: bool = True
    cap: Optional[int] = Field(None, gt=0)


OPTIONS = {
    "conditional-law": Options,
    "smc-conditional-law": SmcOptions,
    "survival": SurvivalOptions,
    "qsd": QsdOptions,
    "coupled-w1": Options,
    "A": AOptions,
    "B": BOptions,
    "C": COptions,
    "H": HOptions,
    "equivalence": EquivalenceOptions,
}


class CatalogRef(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    params: Dict[str, Any] = Field(default_factory=dict)


class EstimatorSpec(BaseModel):
    """Estimator name, start points and estimator-specific options.

    A start is a number, a rational string such as ``"1/3"`` or, for PDMPs,
    a packed row ``[x1, ..., xd, mode]``.
    """

    model_config = ConfigDict(extra="forbid")

    name: Literal[ESTIMATORS]
    x0: Optional[Start] = None
    y0: Optional[Start] = None
    options: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def known_options(self) -> "EstimatorSpec":
        """Check ``options`` against the estimator; only the keys given are kept."""
        parsed = OPTIONS[self.name].model_validate(self.options)
        self.options = parsed.model_dump(exclude_unset=True)
        return self


class CustomRun(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: CatalogRef
    penalty: Optional[CatalogRef] = None
    metric: CatalogRef = Field(default_factory=lambda: CatalogRef(name="default"))
    coupling: Literal["default", SYNCHRONOUS, MERGE] = "default"
    estimator: EstimatorSpec
    times: List[float] = Field(min_length=1)
    N: int = Field(2000, ge=2)
    arithmetic: Literal["float", "rational"] = "float"


def _start(value: Optional[Start], arithmetic: str, role: str):
    if value is None:
        raise InvalidParameter(f"estimator needs a start point {role}")
    if isinstance(value, list):
        return np.asarray(value, dtype=float)
    if arithmetic == "rational":
        return Fraction(value)
    return float(Fraction(value)) if isinstance(value, str) else value


def _coupling(entry, kind: str):
    if kind == "default":
        return entry.coupling
    if kind == SYNCHRONOUS:
        if not is_discrete(entry.model):
            raise UnsupportedModel("the synchronous coupling needs a discrete model")
        return couple_synchronous(entry.model)
    if is_discrete(entry.model):
        raise UnsupportedModel("the merge coupling needs a PDMP")
    return couple_pdmp_merge(entry.model)


def _first_coordinate(points: np.ndarray) -> np.ndarray:
    return points[:, 0]


def _law_rows(law_fn, times) -> pd.DataFrame:
    rows = []
    for t in times:
        law = law_fn(t)
        f = None if law.is_scalar else _first_coordinate
        rows.append({"t": t, "mean": law.mean(f), "stderr": law.std_error(f), "ess": law.ess})
    return pd.DataFrame(rows)


def _rational_means(entry, x0, times) -> pd.DataFrame:
    if not is_discrete(entry.model):
        raise RequiresExactArithmetic("rational arithmetic needs a discrete model with finite noise")
    if not entry.penalty.exact:
        raise RequiresExactArithmetic(f"penalty {entry.penalty.name} is not exact-valued")
    rows = []
    for n in times:
        n = int(n)
        mass = exact_feynman_kac(entry.model, entry.penalty, x0, n)
        mean = exact_feynman_kac(entry.model, entry.penalty, x0, n, f=lambda s: s) / mass
        rows.append({"t": n, "mean": str(mean), "mean_float": float(mean), "survival": str(mass)})
    return pd.DataFrame(rows)


@guarded
def run_custom(seed: int, workers=None, run: Optional[CustomRun] = None) -> dict:
    """Build the catalog entry named by ``run.model`` and run its estimator on ``run.times``."""
    penalty = run.penalty
    entry = build_entry(run.model.name, run.model.params, penalty.name if penalty else None, penalty.params if penalty else None)
    metric = build_metric(run.metric.name, entry, run.metric.params)
    model, field = entry.model, entry.penalty
    est = run.estimator
    options = dict(est.options)
    times = run.times
    report: Dict[str, Any] = {"model": entry.name, "penalty": field.name, "metric": metric.kind, "estimator": est.name, "arithmetic": run.arithmetic}
    logger.info("custom run: %s on %s with %s", est.name, entry.name, field.name)

    if run.arithmetic == "rational":
        if est.name != "conditional-law":
            raise RequiresExactArithmetic(f"rational arithmetic is only available for conditional-law, not {est.name}")
        x0 = _start(est.x0, "rational", "x0")
        table = _rational_means(entry, x0, times)
        return finished(f"exact conditional means at {len(times)} times", {"conditional_means": table}, report)

    if est.name in ("conditional-law", "smc-conditional-law"):
        x0 = _start(est.x0, "float", "x0")
        if est.name == "conditional-law":
            table = _law_rows(lambda t: conditional_law(model, field, x0, t, run.N, seed, workers), times)
        else:
            every = options.get("resample_every", 1)
            table = _law_rows(lambda t: smc_conditional_law(model, field, x0, t, run.N, every, seed, options.get("scheme", "multinomial")), times)
        return finished(f"{est.name} at {len(times)} times", {"conditional_means": table}, report)

    if est.name == "survival":
        x0 = _start(est.x0, "float", "x0")
        curve = exact_survival_curve(model, field, x0, times) if options.get("exact") else survival_curve(model, field, x0, times, run.N, seed, workers)
        tables = {"survival": curve.to_frame()}
        if len(times) >= 2:
            report["lambda0"] = estimate_lambda0(curve).as_dict()
        return finished("survival curve", tables, report)

    if est.name == "qsd":
        qsd = qsd_fixed_point(model, field, **{"t0": times[0], "N": run.N, "seed": seed, "metric": metric, "workers": workers, **options})
        report["lambda0"] = qsd.lambda0
        report["diagnostics"] = qsd.diagnostics
        report["residual"] = quasi_stationarity_residual(qsd, model, field, metric, seed=seed, workers=workers)
        tables = {"qsd": qsd.measure.to_frame()}
        if qsd.eta is not None:
            tables["eta"] = qsd.eta.to_frame()
        return finished(f"lambda0 = {qsd.lambda0:.6g} after {qsd.diagnostics['iterations']} iterations", tables, report, converged=qsd.converged)

    coupled = _coupling(entry, run.coupling)
    if est.name == "coupled-w1":
        x, y = _start(est.x0, "float", "x0"), _start(est.y0, "float", "y0")
        rows = []
        for t in times:
            law_x, law_y = coupled_conditional_laws(coupled, field, x, y, t, run.N, seed, workers)
            rows.append({"t": t, "w1": ensemble_w1(law_x, law_y, metric), "ess": min(law_x.ess, law_y.ess)})
        return finished(f"W1 between coupled conditional laws at {len(times)} times", {"w1": pd.DataFrame(rows)}, report)

    if est.name == "equivalence":
        result = cross_check_equivalence(model, field, coupled, {"times": tuple(times), "N": run.N, "seed": seed, "workers": workers, **options})
        report["equivalence"] = result.as_dict()
        tables = {f"{tag}_curves": r.to_frame() for tag, r in result.reports.items()}
        return finished("equivalence " + ("consistent" if result.consistent else "contradicted"), tables, report)

    pairs = options.pop("pairs", None)
    if est.name == "A":
        result = estimate_A(coupled, field, pairs, times, N=run.N, seed=seed, metric=metric, workers=workers, **options)
    elif est.name == "B":
        result = estimate_B(model, field, pairs, times, N=run.N, seed=seed, metric=metric, workers=workers, **options)
    elif est.name == "C":
        result = estimate_C(coupled, field, pairs, times, N=run.N, seed=seed, workers=workers, **options)
    else:
        result = estimate_H(model, field, options.pop("grid", None), times, N=run.N, seed=seed, workers=workers, **options)
    report["constants"] = result.constants
    tables = {f"{est.name}_curves": result.to_frame()}
    if not result.fits.empty:
        tables[f"{est.name}_fits"] = result.fits
    return finished(f"assumption {est.name}: " + ", ".join(f"{k}={v:.4g}" for k, v in result.constants.items()), tables, report)

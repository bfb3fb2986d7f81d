"""Ready-built processes, penalties and metrics, addressable by name."""

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from penalized.errors import InvalidParameter, RequiresExactArithmetic
from penalized.metric import BoundedMetric, absolute_metric, pdmp_metric, truncate_metric
from penalized.process import (
    CLOSED_FORM_CUBIC,
    CLOSED_FORM_LINEAR,
    DISCRETE_P,
    RK4,
    CoupledModel,
    DiscreteModel,
    PdmpModel,
    PenaltyField,
    StateSpace,
    constant_rate,
    constant_survival,
    continuous_penalty,
    couple_pdmp_merge,
    couple_synchronous,
    cubic_flow,
    linear_flow,
    mode_rate_penalty,
)

HALF = Fraction(1, 2)
UNIFORM_SWITCHING = ((-1.0, 1.0), (1.0, -1.0))


# ---------------------------------------------------------------------------- discrete models


def _half_step(x, theta):
    return x / 2 + theta


def bernoulli_convolution(punctured: bool = False) -> DiscreteModel:
    """X_{n+1} = X_n/2 + θ_{n+1} with Rademacher θ on [−2, 2].

    ``punctured`` gives the state space (−2, 2) minus {0} used by the
    counter-examples.
    """
    space = StateSpace(-2.0, 2.0, open=True, excluded=(0.0,)) if punctured else StateSpace(-2.0, 2.0)
    return DiscreteModel(
        name="bernoulli-punctured" if punctured else "bernoulli",
        step=_half_step,
        state_space=space,
        noise_values=(-1, 1),
        noise_probs=(HALF, HALF),
        lipschitz_factors=(0.5, 0.5),
    )


def _as_fraction(p) -> Fraction:
    return Fraction(p) if isinstance(p, (int, Fraction)) else Fraction(p).limit_denominator(10**12)


def iterated_functions(maps: Sequence[Tuple[Callable, float, Any]], low: float = -2.0, high: float = 2.0, name: str = "iterated-functions") -> DiscreteModel:
    """X_{n+1} = f_θ(X_n) with θ drawn from a finite law; each map is (f, ℓ_θ, probability)."""
    maps = list(maps)
    for _, lipschitz, _ in maps:
        if lipschitz > 1:
            raise InvalidParameter(f"map Lipschitz constant {lipschitz} exceeds 1")
    functions = [fn for fn, _, _ in maps]

    def step(x, index):
        if np.ndim(index) == 0:
            return functions[int(index)](x)
        out = np.empty(np.shape(x), dtype=float)
        for k, fn in enumerate(functions):
            mask = index == k
            if mask.any():
                out[mask] = fn(x[mask])
        return out

    return DiscreteModel(
        name=name,
        step=step,
        state_space=StateSpace(low, high),
        noise_values=tuple(range(len(maps))),
        noise_probs=tuple(_as_fraction(p) for _, _, p in maps),
        lipschitz_factors=tuple(float(lipschitz) for _, lipschitz, _ in maps),
    )


def identity_half_mixture(q: float) -> DiscreteModel:
    """Identity with probability q, x ↦ x/2 otherwise."""
    return iterated_functions([(lambda x: x, 1.0, q), (lambda x: x / 2, 0.5, 1 - _as_fraction(q))], name=f"identity-half({q})")


def lipschitz_law(model: DiscreteModel) -> Tuple[np.ndarray, np.ndarray]:
    """Distribution of ℓ_θ as (values, probabilities)."""
    if model.lipschitz_factors is None:
        raise InvalidParameter(f"{model.name} declares no per-map Lipschitz constants")
    return np.asarray(model.lipschitz_factors, dtype=float), model.float_probs


# ---------------------------------------------------------------------------- discrete penalties


def lipschitz_demo_penalty(c0: float = 0.1, c1: float = 0.2, low: float = -2.0, high: float = 2.0) -> PenaltyField:
    """p(x) = exp(−(c0 + c1 (x − low)/(high − low))): positive, Lipschitz, bounded away from 0."""
    width = high - low

    def survival(x):
        return np.exp(-(c0 + c1 * (np.asarray(x, dtype=float) - low) / width))

    return PenaltyField(
        kind=DISCRETE_P,
        eval=survival,
        lipschitz_const=c1 / width,
        oscillation=c1,
        lower=math.exp(-(c0 + c1)),
        upper=math.exp(-c0),
        name="lipschitz-demo",
        params={"c0": c0, "c1": c1},
    )


def irf_demo_penalty(osc: float, low: float = -2.0, high: float = 2.0) -> PenaltyField:
    """ρ(x) = osc·(x − low)/(high − low), so that osc(ρ) = ``osc``."""
    penalty = lipschitz_demo_penalty(0.0, osc, low, high)
    return replace(penalty, name=f"irf-demo({osc:g})", params={"osc": osc})


def penalty_counterexample_abs() -> PenaltyField:
    """p(x) = |x|/2 on (−2, 2) minus {0}; ρ = −log(|x|/2) is unbounded, hence not Lipschitz."""
    return PenaltyField(
        kind=DISCRETE_P,
        eval=lambda x: abs(x) / 2,
        lipschitz_const=math.inf,
        oscillation=math.inf,
        lower=0.0,
        upper=1.0,
        name="counterexample-abs",
        rho_lipschitz=False,
        exact=True,
    )


def _rational_indicator(x):
    if isinstance(x, (int, Fraction)):
        return HALF if x >= 0 else Fraction(1)
    if isinstance(x, sympy.Basic):
        if x.is_rational is None:
            raise RequiresExactArithmetic(f"cannot decide whether {x} is rational")
        return sympy.Rational(1, 2) if x.is_rational and x >= 0 else sympy.Integer(1)
    raise RequiresExactArithmetic("the rational indicator needs exact (Fraction or sympy) states")


def penalty_counterexample_rational() -> PenaltyField:
    """p(x) = 1/2 if x is rational and nonnegative, 1 otherwise."""
    return PenaltyField(
        kind=DISCRETE_P,
        eval=_rational_indicator,
        lipschitz_const=math.inf,
        oscillation=math.log(2.0),
        lower=0.5,
        upper=1.0,
        name="counterexample-rational",
        rho_lipschitz=False,
        exact=True,
    )


# ---------------------------------------------------------------------------- PDMPs


def _linear_field(A: np.ndarray, center: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: (x - center) @ A.T


def switched_linear(A, a, rates=None, radius: Optional[float] = None) -> PdmpModel:
    """Two modes: F¹(x) = Ax and F²(x) = A(x − a), with closed-form flows.

    Without an explicit radius the invariant ball radius is derived from the
    negative-definite symmetric part of A.
    """
    A = np.asarray(A, dtype=float)
    a = np.asarray(a, dtype=float).reshape(2)
    if A.shape != (2, 2):
        raise InvalidParameter("A must be 2x2")
    if not (np.trace(A) < 0 and np.linalg.det(A) > 0):
        raise InvalidParameter("eigenvalues of A must have negative real parts (trace < 0, det > 0)")
    gamma = -float(np.max(np.linalg.eigvalsh((A + A.T) / 2)))
    if radius is None:
        if gamma <= 0:
            raise InvalidParameter("the symmetric part of A is not negative definite; pass an invariant radius")
        radius = max(2.0 * float(np.linalg.norm(A @ a)) / gamma, 2.0 * float(np.linalg.norm(a)), 1.0)
    origin = np.zeros(2)
    return PdmpModel(
        name="switched-linear",
        modes=(1, 2),
        rate_matrix=np.asarray(UNIFORM_SWITCHING if rates is None else rates, dtype=float),
        vector_fields=(_linear_field(A, origin), _linear_field(A, a)),
        flow_integrator=CLOSED_FORM_LINEAR,
        radius=float(radius),
        dim=2,
        exact_flows=(linear_flow(A, origin), linear_flow(A, a)),
        params={"A": A.tolist(), "a": a.tolist(), "gamma": gamma},
    )


def _cubic_field(p: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: p * x - x**3


def bistable_pdmp(p_plus: float, p_minus: float, r: float, integrator: str = RK4) -> Tuple[PdmpModel, PenaltyField]:
    """ẋ = p_I x − x³ with I switching at rate 1, killed at rate r in mode '+'.

    Mode index 0 is '−', index 1 is '+'. The state interval is
    [−√p₊, √p₊]; the metric radius is 2√p₊.
    """
    if not (p_plus > 0 > p_minus):
        raise InvalidParameter(f"need p_plus > 0 > p_minus, got {p_plus}, {p_minus}")
    if r < 0:
        raise InvalidParameter(f"r must be nonnegative, got {r}")
    if integrator not in (RK4, CLOSED_FORM_CUBIC):
        raise InvalidParameter(f"unsupported integrator {integrator!r} for the cubic field")
    model = PdmpModel(
        name="bistable",
        modes=("-", "+"),
        rate_matrix=np.asarray(UNIFORM_SWITCHING),
        vector_fields=(_cubic_field(p_minus), _cubic_field(p_plus)),
        flow_integrator=integrator,
        radius=2.0 * math.sqrt(p_plus),
        dim=1,
        exact_flows=(cubic_flow(p_minus), cubic_flow(p_plus)),
        keep_sign=True,
        params={"p_plus": p_plus, "p_minus": p_minus, "interval": [-math.sqrt(p_plus), math.sqrt(p_plus)]},
    )
    return model, mode_rate_penalty((0.0, r))


def pdmp_demo_penalty(radius: float, base: Sequence[float] = (0.1, 0.4), slope: float = 0.2) -> PenaltyField:
    """ρ((x, i)) = base_i + slope·‖x‖/R, Lipschitz for the PDMP metric."""
    table = np.asarray(base, dtype=float)

    def rate(states):
        states = np.atleast_2d(states)
        return table[states[:, -1].astype(int)] + slope * np.linalg.norm(states[:, :-1], axis=1) / radius

    lipschitz = max(2.0 * slope, float(table.max() - table.min()) + slope)
    penalty = continuous_penalty(rate, lipschitz, float(table.min()), float(table.max()) + slope, name="pdmp-demo")
    return penalty


# ---------------------------------------------------------------------------- catalog


@dataclass(frozen=True)
class ModelCatalogEntry:
    name: str
    params: Dict[str, Any]
    model: Any
    penalty: PenaltyField
    metric: BoundedMetric
    coupling: CoupledModel = field(repr=False, default=None)


def _discrete_entry(name, params, model, penalty) -> ModelCatalogEntry:
    space = model.state_space
    return ModelCatalogEntry(name, params, model, penalty, absolute_metric(space.low, space.high), couple_synchronous(model))


def _bernoulli_entry(c0: float = 0.1, c1: float = 0.2) -> ModelCatalogEntry:
    return _discrete_entry("bernoulli", {"c0": c0, "c1": c1}, bernoulli_convolution(), lipschitz_demo_penalty(c0, c1))


def _counterexample_abs_entry() -> ModelCatalogEntry:
    return _discrete_entry("counterexample-abs", {}, bernoulli_convolution(punctured=True), penalty_counterexample_abs())


def _counterexample_rational_entry() -> ModelCatalogEntry:
    return _discrete_entry("counterexample-rational", {}, bernoulli_convolution(), penalty_counterexample_rational())


def _irf_entry(q: float = 0.1, osc: float = 1.0) -> ModelCatalogEntry:
    return _discrete_entry("irf-identity-half", {"q": q, "osc": osc}, identity_half_mixture(q), irf_demo_penalty(osc))


def _switched_linear_entry(A=((-0.3, 0.0), (0.0, -0.5)), a=(1.0, 0.0), base=(0.1, 0.4), slope: float = 0.2) -> ModelCatalogEntry:
    model = switched_linear(A, a)
    params = {"A": [list(row) for row in A], "a": list(a), "base": list(base), "slope": slope}
    return ModelCatalogEntry("switched-linear", params, model, pdmp_demo_penalty(model.radius, base, slope), pdmp_metric(model.radius), couple_pdmp_merge(model))


def _bistable_entry(p_plus: float = 2.0, p_minus: float = -1.0, r: float = 0.0, integrator: str = RK4) -> ModelCatalogEntry:
    model, penalty = bistable_pdmp(p_plus, p_minus, r, integrator)
    params = {"p_plus": p_plus, "p_minus": p_minus, "r": r, "integrator": integrator}
    return ModelCatalogEntry("bistable", params, model, penalty, pdmp_metric(model.radius), couple_pdmp_merge(model))


CATALOG: Dict[str, Callable[..., ModelCatalogEntry]] = {
    "bernoulli": _bernoulli_entry,
    "counterexample-abs": _counterexample_abs_entry,
    "counterexample-rational": _counterexample_rational_entry,
    "irf-identity-half": _irf_entry,
    "switched-linear": _switched_linear_entry,
    "bistable": _bistable_entry,
}

PENALTIES: Dict[str, Callable[..., PenaltyField]] = {
    "lipschitz-demo": lipschitz_demo_penalty,
    "constant-survival": constant_survival,
    "counterexample-abs": penalty_counterexample_abs,
    "counterexample-rational": penalty_counterexample_rational,
    "irf-demo": irf_demo_penalty,
    "constant-rate": constant_rate,
    "mode-rates": mode_rate_penalty,
    "pdmp-demo": pdmp_demo_penalty,
}


def build_metric(name: str, entry: ModelCatalogEntry, params: Optional[Dict[str, Any]] = None) -> BoundedMetric:
    params = dict(params or {})
    if name == "default":
        return entry.metric
    if name == "absolute":
        return absolute_metric(**params)
    if name == "pdmp":
        return pdmp_metric(params.get("radius", getattr(entry.model, "radius", 1.0)))
    if name == "truncated":
        return truncate_metric(entry.metric, params["kappa"])
    raise InvalidParameter(f"unknown metric {name!r}")


def build_entry(name: str, params: Optional[Dict[str, Any]] = None, penalty: Optional[str] = None, penalty_params: Optional[Dict[str, Any]] = None) -> ModelCatalogEntry:
    """Look up a catalog entry, optionally swapping its default penalty."""
    if name not in CATALOG:
        raise InvalidParameter(f"unknown model {name!r}; known: {', '.join(CATALOG)}")
    entry = CATALOG[name](**(params or {}))
    if penalty is None:
        return entry
    if penalty not in PENALTIES:
        raise InvalidParameter(f"unknown penalty {penalty!r}; known: {', '.join(PENALTIES)}")
    return ModelCatalogEntry(entry.name, entry.params, entry.model, PENALTIES[penalty](**(penalty_params or {})), entry.metric, entry.coupling)


def catalog_names() -> List[str]:
    return list(CATALOG)

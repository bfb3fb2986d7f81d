"""Closed-form contraction constants and the elementary criteria built on them.

All functions are pure; verdicts that can legitimately fail (transfer of a
coupling rate, the iterated-function condition, the switching threshold)
come back as values rather than exceptions.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from penalized.errors import DegenerateConstants, InvalidConstants, InvalidParameter

logger = logging.getLogger(__name__)

DISCRETE = "discrete"
CONTINUOUS = "continuous"
SUPPORT_TOL = 1e-12
LEGENDRE_TOL = 1e-10
MAX_BRACKET = 2.0**60


def _check_constants(C_A: float, C_B: float, C_C: float, dbar: float) -> None:
    if C_A < 1 or C_C < 1:
        raise InvalidConstants(f"need C_A >= 1 and C_C >= 1, got C_A={C_A}, C_C={C_C}")
    if C_B < 0 or dbar <= 0:
        raise InvalidConstants(f"need C_B >= 0 and dbar > 0, got C_B={C_B}, dbar={dbar}")


def _bracket(C_B: float, C_C: float, dbar: float) -> float:
    """1 ∨ 2 C_B d̄ C_C²/(C_C − 1), with value 1 at C_B = 0."""
    if C_B == 0:
        return 1.0
    if C_C == 1:
        return math.inf
    return max(1.0, 2.0 * C_B * dbar * C_C**2 / (C_C - 1.0))


def alpha_explicit(gamma_A: float, C_A: float, C_B: float, C_C: float, dbar: float) -> float:
    """Convergence rate α = γ_A log(2C_C/(2C_C−1)) / log(2C_A(1+C_B d̄)[1 ∨ 2C_B d̄ C_C²/(C_C−1)]).

    The bracket equals 2C_B C_C d̄/(1 − 1/C_C) written the other way round.
    """
    _check_constants(C_A, C_B, C_C, dbar)
    if gamma_A <= 0:
        raise InvalidConstants(f"gamma_A must be positive, got {gamma_A}")
    bracket = _bracket(C_B, C_C, dbar)
    if math.isinf(bracket):
        logger.warning("C_C = 1 with C_B > 0: the rate bound degenerates to 0")
        return 0.0
    return gamma_A * math.log(2.0 * C_C / (2.0 * C_C - 1.0)) / math.log(2.0 * C_A * (1.0 + C_B * dbar) * bracket)


def beta_kappa(C_B: float, C_C: float) -> Tuple[float, float]:
    """β = 1 − 1/(2C_C) and κ = C_B/(β − ½)."""
    if C_C < 1 or C_B < 0:
        raise InvalidConstants(f"need C_C >= 1 and C_B >= 0, got C_B={C_B}, C_C={C_C}")
    beta = 1.0 - 1.0 / (2.0 * C_C)
    if C_B == 0:
        return beta, 0.0
    if C_C == 1:
        raise DegenerateConstants("kappa is undefined for C_C = 1 with C_B > 0")
    return beta, C_B / (beta - 0.5)


def as_contraction_constants(C0: float, gamma: float, lip_rho: float, osc_rho: float, dbar: float, time_kind: str = DISCRETE) -> Tuple[float, float]:
    """(C_B, C_C) for a coupling with d(X_t, Y_t) ≤ C0 e^{−γt} d(x, y) almost surely."""
    if gamma <= 0:
        raise InvalidParameter(f"gamma must be positive, got {gamma}")
    if C0 < 1:
        raise InvalidParameter(f"C0 must be at least 1, got {C0}")
    if time_kind not in (DISCRETE, CONTINUOUS):
        raise InvalidParameter(f"unknown time kind {time_kind!r}")
    if lip_rho == 0:
        return 0.0, 1.0
    if time_kind == DISCRETE:
        rate = C0 * math.exp(osc_rho) * lip_rho / (1.0 - math.exp(-gamma))
    else:
        rate = lip_rho * C0 / gamma
    C_B = rate * math.exp(rate * dbar)
    return C_B, (1.0 + C_B * dbar) ** 2


@dataclass(frozen=True)
class CftkTransfer:
    accepted: bool
    C_A: Optional[float]
    gamma_A: Optional[float]
    margin: float


def cftk_transfer(C: float, gamma: float, osc_rho: float) -> CftkTransfer:
    """(A) with (C_A, γ_A) = (C, γ − osc(ρ)) from an unweighted coupling rate, when γ > osc(ρ)."""
    if C <= 0 or gamma <= 0:
        raise InvalidParameter(f"need C > 0 and gamma > 0, got C={C}, gamma={gamma}")
    margin = gamma - osc_rho
    if margin <= 0:
        return CftkTransfer(False, None, None, margin)
    return CftkTransfer(True, C, margin, margin)


# ---------------------------------------------------------------------------- large deviations


def _finite_law(dist) -> Tuple[np.ndarray, np.ndarray]:
    values, probs = (np.asarray(part, dtype=float) for part in dist)
    if values.shape != probs.shape or values.size == 0:
        raise InvalidParameter("a finite law needs matching values and probabilities")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > SUPPORT_TOL:
        raise InvalidParameter(f"probabilities must be nonnegative and sum to 1, got {probs.sum()!r}")
    if np.any(values < -SUPPORT_TOL) or np.any(values > 1 + SUPPORT_TOL):
        raise InvalidParameter("the law must be supported in [0, 1]")
    keep = probs > 0
    return values[keep], probs[keep]


def fenchel_legendre(dist, x: float) -> float:
    """Λ*(x) = sup_{t ≥ 0} tx − log E e^{tν} for a finite law ``dist`` = (values, probabilities)."""
    values, probs = _finite_law(dist)
    mean = float(np.dot(values, probs))
    top = float(values.max())
    if x <= mean:
        return 0.0
    if x > top + SUPPORT_TOL:
        return math.inf
    if abs(x - top) <= SUPPORT_TOL:
        return math.log(1.0 / float(probs[values >= top - SUPPORT_TOL].sum()))

    def objective(t: float) -> float:
        return t * x - float(logsumexp(t * values, b=probs))

    def slope(t: float) -> float:
        tilted = np.exp(t * values - logsumexp(t * values, b=probs)) * probs
        return x - float(np.dot(tilted, values))

    upper = 1.0
    while slope(upper) > 0 and upper < MAX_BRACKET:
        upper *= 2.0
    result = minimize_scalar(lambda t: -objective(t), bounds=(0.0, upper), method="bounded", options={"xatol": LEGENDRE_TOL})
    return max(0.0, -float(result.fun), objective(upper))


@dataclass(frozen=True)
class IrfVerdict:
    holds: bool
    q: float
    threshold: float
    margin: float
    epsilon: Optional[float] = None
    chi: Optional[float] = None
    rate: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def _decay_factor(epsilon: float, chi: float, grid: int = 200) -> float:
    """min over δ ∈ (1−ε, 1) of δ^{1−(1−ε)/δ} + e^{−χ}."""
    deltas = np.linspace(1.0 - epsilon, 1.0, grid + 2)[1:-1]
    powers = np.exp((1.0 - (1.0 - epsilon) / deltas) * np.log(deltas))
    return float(powers.min() + math.exp(-chi))


def irf_condition(lipschitz_law, osc_rho: float, grid: int = 100) -> IrfVerdict:
    """q = P(ℓ_θ = 1) < e^{−osc(ρ)}; on success reports ε with χ = Λ*(1−ε) − osc(ρ) > 0.

    Among the ε on a geometric grid with χ > 0 the one with the fastest
    implied decay rate is kept.
    """
    values, probs = _finite_law(lipschitz_law)
    q = float(probs[values >= 1 - SUPPORT_TOL].sum())
    threshold = math.exp(-osc_rho)
    holds = q < threshold
    if not holds:
        return IrfVerdict(False, q, threshold, threshold - q)
    mean = float(np.dot(values, probs))
    best = None
    for epsilon in np.geomspace(1e-8, max(1e-8, 1.0 - mean), grid):
        chi = fenchel_legendre((values, probs), 1.0 - epsilon) - osc_rho
        if chi <= 0:
            continue
        factor = _decay_factor(float(epsilon), chi)
        if best is None or factor < best[2]:
            best = (float(epsilon), chi, factor)
    if best is None:
        logger.warning("q=%.4g < e^-osc but no epsilon on the grid gives chi > 0", q)
        return IrfVerdict(True, q, threshold, threshold - q)
    epsilon, chi, factor = best
    return IrfVerdict(True, q, threshold, threshold - q, epsilon, chi, -math.log(factor))


# ---------------------------------------------------------------------------- two-mode switching


def theta_eig(q_plus: float, q_minus: float) -> float:
    """Top eigenvalue of [[−1+q₊, 1], [1, −1+q₋]]: −1 + (q₊+q₋)/2 + √((q₊−q₋)²+4)/2."""
    centre = (q_plus + q_minus) / 2.0 - 1.0
    half_gap = math.hypot(q_plus - q_minus, 2.0) / 2.0
    if centre >= 0:
        return centre + half_gap
    # cancellation-free form of centre + half_gap
    return (q_plus + q_minus - q_plus * q_minus) / (half_gap - centre)


def switching_gap(p_plus: float, p_minus: float, r: float) -> float:
    """γ(r) = θ(−r, 0) − θ(p₊ − r, p₋)."""
    return theta_eig(-r, 0.0) - theta_eig(p_plus - r, p_minus)


@dataclass(frozen=True)
class RThreshold:
    r: Optional[float]
    gamma_at_r: Optional[float]
    gamma_at_r_max: float
    limit: float
    target: float

    @property
    def found(self) -> bool:
        return self.r is not None


def r_threshold(p_plus: float, p_minus: float, r_max: float, step: float, target: float = 0.0) -> RThreshold:
    """Smallest r on the grid 0, step, ..., r_max with γ(r) > ``target``."""
    if not p_plus > 0 > p_minus:
        raise InvalidParameter(f"need p_plus > 0 > p_minus, got {p_plus}, {p_minus}")
    if step <= 0 or r_max < 0:
        raise InvalidParameter("need step > 0 and r_max >= 0")
    grid = np.arange(0.0, r_max + step / 2, step)
    gamma_max = switching_gap(p_plus, p_minus, r_max)
    for r in grid:
        gamma = switching_gap(p_plus, p_minus, float(r))
        if gamma > target:
            return RThreshold(float(r), gamma, gamma_max, -p_minus, target)
    return RThreshold(None, None, gamma_max, -p_minus, target)


# ---------------------------------------------------------------------------- bundles


@dataclass(frozen=True)
class ProofConstants:
    t1: float
    t2: float
    t0: float
    C0: float
    C1: float
    beta: float
    kappa: float
    alpha: float
    q_process_constant: float

    def as_dict(self) -> dict:
        return asdict(self)


def proof_constants(gamma_A: float, C_A: float, C_B: float, C_C: float, dbar: float) -> ProofConstants:
    """The intermediate times and prefactors of the contraction argument for γ(t) = C_A e^{−γ_A t}."""
    _check_constants(C_A, C_B, C_C, dbar)
    beta, kappa = beta_kappa(C_B, C_C)
    spread = 1.0 + C_B * dbar
    t1 = math.log(2.0 * C_A * spread) / gamma_A
    t2 = math.log(2.0 * C_A * kappa * spread * dbar * C_C) / gamma_A if kappa > 0 else 0.0
    t0 = max(t1, t2)
    gap = 1.0 - 1.0 / C_C
    second = gap + (2.0 * C_B * dbar / gap * C_A if C_B > 0 else 0.0)
    C0 = max(0.5 * gap + spread * C_A, second)
    reach = max(1.0, kappa * dbar)
    inverse = max(1.0 / kappa, dbar) if kappa > 0 else 0.0
    C1 = C0 * spread * reach / beta * (1.0 + C_B * (1.0 + dbar * C_B / 2.0) * inverse)
    alpha = math.log(1.0 / beta) / t0
    return ProofConstants(t1, t2, t0, C0, C1, beta, kappa, alpha, C0 * reach / beta)


@dataclass(frozen=True)
class ConstantBundle:
    gamma_A: float
    C_A: float
    C_B: float
    C_C: float
    C_H: float
    dbar: float
    osc_rho: Optional[float]
    lip_rho: Optional[float]
    beta: float
    kappa: float
    alpha: float

    def as_dict(self) -> dict:
        return asdict(self)


def constant_bundle(gamma_A: float, C_A: float, C_B: float, C_C: float, dbar: float, osc_rho: Optional[float] = None, lip_rho: Optional[float] = None, C_H: Optional[float] = None) -> ConstantBundle:
    """All derived constants at once; C_H defaults to 1 + C_B d̄."""
    alpha = alpha_explicit(gamma_A, C_A, C_B, C_C, dbar)
    try:
        beta, kappa = beta_kappa(C_B, C_C)
    except DegenerateConstants:
        beta, kappa = 0.5, math.inf
    C_H = 1.0 + C_B * dbar if C_H is None else C_H
    return ConstantBundle(gamma_A, C_A, C_B, C_C, C_H, dbar, osc_rho, lip_rho, beta, kappa, alpha)


def constants_from_coupling(C0: float, gamma: float, lip_rho: float, osc_rho: float, dbar: float, time_kind: str = DISCRETE) -> ConstantBundle:
    """Bundle for an almost surely contracting coupling: (A) holds with C_A = C0 and γ_A = γ."""
    C_B, C_C = as_contraction_constants(C0, gamma, lip_rho, osc_rho, dbar, time_kind)
    return constant_bundle(gamma, C0, C_B, C_C, dbar, osc_rho, lip_rho)

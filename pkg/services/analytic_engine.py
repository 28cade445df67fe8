"""
Analytic Engine
Closed-form linear entropy, characteristic times and reservoir equivalence maps

The double sum over reservoir levels factorizes per mode into |g_l(u)|**2 with
g_l(u) = sum_r p_r exp(-i u r**y), so one time point costs O(M * d_r).
"""

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from config import TAIL_EPSILON
from services.errors import ConfigurationError, NoDecoherenceError, PreconditionError
from services.model_spec import (
    ModeDistribution,
    ModelSpec,
    ReservoirSpec,
    SystemState,
    as_exact,
    level_powers,
    make_thermal_mode,
    system_power_variance,
    variance_of_power,
)

logger = logging.getLogger(__name__)

TimeLike = Union[float, np.ndarray]

# Phase multipliers v**x - w**x closer than this are treated as equal
PHASE_KEY_DECIMALS = 12

# log(beta*hbar*Omega) bracket searched for thermal modes at y != 1
THERMAL_LOG_BETA_RANGE = (math.log(1e-4), math.log(60.0))


@dataclass(frozen=True)
class CharacteristicTimes:
    """Decoherence, revival and revival-lifetime times of one configuration"""

    t_D: float
    t_R: Optional[float]
    tau_R: float
    Lambda: Optional[Fraction]
    k_l: Tuple[Optional[Fraction], ...]

    def as_dict(self) -> dict:
        return {
            't_D': self.t_D,
            't_R': self.t_R,
            'tau_R': self.tau_R,
            'Lambda': None if self.Lambda is None else str(self.Lambda),
            'k_l': [None if k is None else str(k) for k in self.k_l],
        }


class RecurrenceTime(NamedTuple):
    """Recurrence time of the reduced state; time is None when absent"""

    time: Optional[float]
    reason: str


class EquivalentReservoir(NamedTuple):
    """Thermal and phase-state reservoirs reproducing a target Delta_2"""

    nbar: float
    r_trunc: int
    beta_homega: float


# ----------------------------------------------------------------------------
# Characteristic functions
# ----------------------------------------------------------------------------

def mode_factors(dist: ModeDistribution, y, u: np.ndarray) -> np.ndarray:
    """g(u) = sum_r p_r exp(-i u r**y) for every u in the array"""
    u = np.asarray(u, dtype=float)
    powers = level_powers(dist.dim, y)
    phases = np.exp(-1j * np.multiply.outer(u, powers))
    return (phases * dist.probs).sum(axis=-1)


def mode_factor(dist: ModeDistribution, y, u: float) -> complex:
    """Characteristic function of one mode at a single phase u"""
    return complex(mode_factors(dist, y, np.array([u]))[0])


# ----------------------------------------------------------------------------
# Linear entropy
# ----------------------------------------------------------------------------

def _check_alignment(model: ModelSpec, res: ReservoirSpec):
    if model.M != res.M:
        raise ConfigurationError(
            [f"model has {model.M} couplings but reservoir has {res.M} modes"])
    reservoir_couplings = np.array([float(Fraction(c)) if isinstance(c, str) else float(c)
                                    for _, c in res.modes])
    if not np.allclose(reservoir_couplings, model.coupling_array, rtol=1e-12, atol=0.0):
        raise ConfigurationError(['reservoir couplings differ from model couplings'])


def _phase_weights(model: ModelSpec, sys: SystemState) -> List[Tuple[float, float]]:
    """Group |B_vw|**2 by |v**x - w**x|; |g(u)|**2 is even in u"""
    weights = np.abs(sys.B) ** 2
    powers = level_powers(sys.dim, model.x)
    keys = np.round(np.abs(np.subtract.outer(powers, powers)), PHASE_KEY_DECIMALS)
    grouped = OrderedDict()
    for key, weight in zip(keys.ravel(), weights.ravel()):
        if weight == 0.0:
            continue
        grouped[float(key)] = grouped.get(float(key), 0.0) + float(weight)
    return sorted(grouped.items())


def _mode_groups(model: ModelSpec, res: ReservoirSpec) -> List[Tuple[ModeDistribution, float, int]]:
    """Identical (distribution, coupling) pairs evaluated once, with multiplicity"""
    groups = OrderedDict()
    for (dist, _), coupling in zip(res.modes, model.coupling_array):
        if coupling == 0.0:
            continue
        key = (dist.key(), float(coupling))
        if key in groups:
            groups[key][2] += 1
        else:
            groups[key] = [dist, float(coupling), 1]
    return [tuple(group) for group in groups.values()]


def linear_entropy(model: ModelSpec, sys: SystemState, res: ReservoirSpec, t: TimeLike) -> TimeLike:
    """
    delta(t) = 1 - sum_{v,w} |B_vw|**2 prod_l |g_l(hbar**(x+y-1) lambda_l (v**x - w**x) t)|**2

    Accepts a scalar time or an array of times.
    """
    _check_alignment(model, res)
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))

    groups = _mode_groups(model, res)
    purity = np.zeros_like(times)
    for key, weight in _phase_weights(model, sys):
        if key == 0.0 or not groups:
            purity += weight
            continue
        survival = np.ones_like(times)
        for dist, coupling, multiplicity in groups:
            u = model.phase_scale * coupling * key * times
            survival *= np.abs(mode_factors(dist, model.y, u)) ** (2 * multiplicity)
        purity += weight * survival

    delta = np.clip(1.0 - purity, 0.0, 1.0)
    return float(delta[0]) if scalar else delta


def thermal_linear_entropy(M: int, beta_homega: float, coupling: float, hbar: float,
                           t: TimeLike) -> TimeLike:
    """Closed form for the superposition state against M identical thermal modes (x = y = 1)"""
    if M < 1:
        raise PreconditionError(f"M must be >= 1, got {M}")
    if beta_homega <= 0:
        raise PreconditionError(f"beta_homega must be > 0, got {beta_homega}")
    q = math.exp(-beta_homega)
    t_arr = np.asarray(t, dtype=float)
    bracket = (1.0 - q) ** 2 / (1.0 + q * q - 2.0 * q * np.cos(coupling * hbar * t_arr))
    delta = 0.5 * (1.0 - bracket ** M)
    return float(delta) if np.ndim(t) == 0 else delta


# ----------------------------------------------------------------------------
# Characteristic times
# ----------------------------------------------------------------------------

def mode_variances(model: ModelSpec, res: ReservoirSpec) -> np.ndarray:
    """(Delta_2^l)**2 for every mode; repeated distribution objects are evaluated once"""
    variances = {}
    for dist in res.distributions:
        if id(dist) not in variances:
            variances[id(dist)] = variance_of_power(dist, model.y)
    return np.array([variances[id(dist)] for dist in res.distributions])


def _coupled_spread(model: ModelSpec, res: ReservoirSpec) -> float:
    """sum_l (lambda_l Delta_2^l)**2"""
    _check_alignment(model, res)
    return float(np.sum((model.coupling_array ** 2) * mode_variances(model, res)))


def decoherence_time(model: ModelSpec, sys: SystemState, res: ReservoirSpec) -> float:
    """t_D = 1 / (hbar**(x+y-1) Delta_1 sqrt(2 sum_l (lambda_l Delta_2^l)**2))"""
    if not sys.is_pure:
        raise PreconditionError(
            f"decoherence time needs a pure initial system state (purity {sys.purity:.15g})")
    delta1 = math.sqrt(system_power_variance(sys, model.x))
    spread = _coupled_spread(model, res)
    if delta1 == 0.0 or spread == 0.0:
        raise NoDecoherenceError('Delta_1 = 0 or every lambda_l Delta_2^l = 0')
    return 1.0 / (model.phase_scale * delta1 * math.sqrt(2.0 * spread))


def least_multiple_frequency(model: ModelSpec) -> Optional[Fraction]:
    """
    Lambda: largest frequency with every lambda_l / Lambda a positive integer

    Decoupled modes are skipped. Absent when any coupling lacks an exact
    rational annotation or every coupling is zero.
    """
    return model.least_multiple


def revival_time(model: ModelSpec, s: int = 1) -> Optional[float]:
    """t_R = 2 pi s / (hbar**(x+y-1) Lambda); absent for non-integer exponents or incommensurate couplings"""
    if s < 1:
        raise PreconditionError(f"revival index s must be >= 1, got {s}")
    if model.x.denominator != 1 or model.y.denominator != 1:
        return None
    Lambda = least_multiple_frequency(model)
    if Lambda is None:
        return None
    return 2.0 * math.pi * s / (model.phase_scale * float(Lambda))


def revival_lifetime(model: ModelSpec, sys: SystemState, res: ReservoirSpec) -> float:
    """
    tau_R = 2 t_D

    When Lambda exists this is evaluated as sqrt(2) / (hbar**(x+y-1) Lambda Delta_1 Delta_2)
    with Delta_2 = sqrt(sum_l (Delta_2^l / k_l)**2) and k_l = Lambda / lambda_l.
    """
    t_D = decoherence_time(model, sys, res)
    Lambda = least_multiple_frequency(model)
    if Lambda is None:
        return 2.0 * t_D
    delta1 = math.sqrt(system_power_variance(sys, model.x))
    Lambda = float(Lambda)
    # Delta_2^l / k_l = Delta_2^l lambda_l / Lambda
    scaled = np.sqrt(mode_variances(model, res)) * model.coupling_array / Lambda
    delta2 = math.sqrt(float(np.sum(scaled ** 2)))
    return math.sqrt(2.0) / (model.phase_scale * Lambda * delta1 * delta2)


def characteristic_times(model: ModelSpec, sys: SystemState, res: ReservoirSpec,
                         s: int = 1) -> CharacteristicTimes:
    """Bundle of t_D, t_R, tau_R, Lambda and k_l; t_D and tau_R are inf without decoherence"""
    try:
        t_D = decoherence_time(model, sys, res)
        tau_R = revival_lifetime(model, sys, res)
    except NoDecoherenceError:
        logger.warning("configuration does not decohere: t_D is infinite")
        t_D = tau_R = math.inf
    Lambda = least_multiple_frequency(model)
    if Lambda is None:
        k_l = tuple(None for _ in model.couplings)
    else:
        k_l = tuple(None if c == 0 else Lambda / abs(c) for c in model.exact_couplings)
    return CharacteristicTimes(t_D=t_D, t_R=revival_time(model, s), tau_R=tau_R,
                               Lambda=Lambda, k_l=k_l)


def recurrence_time(g: float, coupling: float, hbar: float = 1.0, s: int = 1) -> RecurrenceTime:
    """
    Time at which the reduced state returns to its initial value

    lambda = 0: s pi / (hbar g); otherwise 2g/lambda = n/m in lowest terms gives
    2 pi m s / (hbar lambda n).
    """
    if g < 0:
        raise PreconditionError(f"Kerr strength g must be >= 0, got {g}")
    if coupling == 0:
        if g == 0:
            return RecurrenceTime(None, 'degenerate')
        return RecurrenceTime(s * math.pi / (hbar * g), 'kerr_only')
    if g == 0:
        return RecurrenceTime(2.0 * math.pi * s / (hbar * abs(coupling)), 'coupling_only')

    exact_g = as_exact(g)
    exact_coupling = as_exact(coupling)
    if exact_g is None or exact_coupling is None:
        return RecurrenceTime(None, 'incommensurate')
    ratio = abs(2 * exact_g / exact_coupling)
    n, m = ratio.numerator, ratio.denominator
    return RecurrenceTime(2.0 * math.pi * m * s / (hbar * abs(float(coupling)) * n), 'commensurate')


# ----------------------------------------------------------------------------
# Equivalence maps
# ----------------------------------------------------------------------------

def effective_hilbert_size(delta2: float) -> float:
    """Hs = sqrt(1 + 12 Delta_2**2)"""
    if delta2 < 0:
        raise PreconditionError(f"delta2 must be >= 0, got {delta2}")
    return math.sqrt(1.0 + 12.0 * delta2 * delta2)


def equivalent_reservoir(delta2_target: float) -> EquivalentReservoir:
    """Thermal n-bar and phase-state r reproducing delta2_target for y = 1"""
    if delta2_target < 0:
        raise PreconditionError(f"delta2_target must be >= 0, got {delta2_target}")
    nbar = (math.sqrt(1.0 + 4.0 * delta2_target ** 2) - 1.0) / 2.0
    r_trunc = max(int(round(effective_hilbert_size(delta2_target))) - 1, 0)
    beta_homega = math.log1p(1.0 / nbar) if nbar > 0 else math.inf
    return EquivalentReservoir(nbar=nbar, r_trunc=r_trunc, beta_homega=beta_homega)


def equivalent_thermal_temperature(delta2_target: float, y=1,
                                   tail_epsilon: float = TAIL_EPSILON) -> float:
    """
    beta*hbar*Omega of the thermal mode whose N**y variance is delta2_target**2

    Closed form for y = 1; otherwise a root search in log(beta) over the
    truncated geometric distribution.
    """
    if delta2_target < 0:
        raise PreconditionError(f"delta2_target must be >= 0, got {delta2_target}")
    exponent = as_exact(y)
    if exponent == 1:
        return equivalent_reservoir(delta2_target).beta_homega
    if delta2_target == 0:
        return math.inf
    if exponent is None:
        exponent = y

    def mismatch(log_beta: float) -> float:
        mode = make_thermal_mode(math.exp(log_beta), tail_epsilon)
        return math.sqrt(variance_of_power(mode, exponent)) - delta2_target

    low, high = THERMAL_LOG_BETA_RANGE
    if mismatch(low) < 0 or mismatch(high) > 0:
        raise PreconditionError(
            f"no thermal mode with beta*hbar*Omega in [{math.exp(low):.3g}, {math.exp(high):.3g}] "
            f"reaches delta2={delta2_target} for y={y}")
    return math.exp(brentq(mismatch, low, high, xtol=1e-12))


def equivalent_phase_truncation(delta2_target: float, y=1, r_max: int = 10 ** 6) -> int:
    """
    Phase-state truncation r whose N**y variance is closest to delta2_target**2

    Reduces to equivalent_reservoir's r_trunc for y = 1.
    """
    if delta2_target < 0:
        raise PreconditionError(f"delta2_target must be >= 0, got {delta2_target}")
    exponent = as_exact(y)
    if exponent == 1:
        return equivalent_reservoir(delta2_target).r_trunc

    target = delta2_target ** 2
    exponent = float(exponent if exponent is not None else y)
    first = second = 0.0
    previous = 0.0
    for r in range(r_max + 1):
        power = float(r) ** exponent
        first += power
        second += power * power
        count = r + 1
        variance = second / count - (first / count) ** 2
        if variance >= target:
            if r > 0 and target - previous < variance - target:
                return r - 1
            return r
        previous = variance
    raise PreconditionError(f"no phase truncation up to r={r_max} reaches delta2={delta2_target}")


def reservoir_delta2(model: ModelSpec, res: ReservoirSpec) -> float:
    """
    Aggregate Delta_2 of the single-mode equivalent reservoir

    sqrt(sum_l (lambda_l Delta_2^l)**2) / lambda_ref with lambda_ref = Lambda when
    it exists, else the largest |lambda_l|.
    """
    Lambda = least_multiple_frequency(model)
    reference = float(Lambda) if Lambda is not None else model.reference_coupling
    return math.sqrt(_coupled_spread(model, res)) / reference


def heisenberg_time_resolution(model: ModelSpec) -> float:
    """Smallest resolvable time 1/(hbar**(x+y-1) lambda_ref)"""
    Lambda = least_multiple_frequency(model)
    reference = float(Lambda) if Lambda is not None else model.reference_coupling
    return 1.0 / (model.phase_scale * reference)


def revival_visibility(model: ModelSpec, sys: SystemState, res: ReservoirSpec) -> float:
    """tau_R over the Heisenberg-limited resolution; << 1 means the revival cannot be seen"""
    return revival_lifetime(model, sys, res) / heisenberg_time_resolution(model)

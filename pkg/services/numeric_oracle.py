"""
Numeric Oracle
Brute-force evolution of the full truncated product-space density matrix,
plus the empirical readers of delta(t) curves: short-time fit, revival
detection and finite-resolution coarse graining
"""

import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks, peak_widths

from config import ORACLE_SIZE_CAP
from services.errors import (
    FitError,
    InvalidStateError,
    NoDecoherenceError,
    PreconditionError,
    SizeCapError,
)
from services.model_spec import ModeDistribution, ModelSpec, SystemState, level_powers
from services.series import TimeSeries

logger = logging.getLogger(__name__)

FULL_STATE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class FullState:
    """Product-space density matrix, basis order (v, r_1, ..., r_M)"""

    dims: Tuple[int, Tuple[int, ...]]
    rho: np.ndarray

    def __post_init__(self):
        d_s, d_r = self.dims
        d_r = tuple(int(d) for d in d_r)
        rho = np.array(self.rho, dtype=complex)
        D = d_s * int(np.prod(d_r, dtype=np.int64))
        problems = []
        if rho.shape != (D, D):
            raise InvalidStateError([f"rho has shape {rho.shape}, dims imply {(D, D)}"])
        if not np.allclose(rho, rho.conj().T, atol=FULL_STATE_TOLERANCE, rtol=0.0):
            problems.append('rho is not Hermitian')
        if abs(np.trace(rho) - 1.0) > FULL_STATE_TOLERANCE:
            problems.append(f"trace(rho) = {np.trace(rho).real:.15g}, expected 1")
        if not problems:
            # rho + tol*I admits a Cholesky factor iff no eigenvalue is below -tol
            try:
                np.linalg.cholesky(rho + FULL_STATE_TOLERANCE * np.eye(D))
            except np.linalg.LinAlgError:
                problems.append('rho is not positive semidefinite')
        if problems:
            raise InvalidStateError(problems)
        rho.setflags(write=False)
        object.__setattr__(self, 'dims', (int(d_s), d_r))
        object.__setattr__(self, 'rho', rho)

    @property
    def system_dim(self) -> int:
        return self.dims[0]

    @property
    def reservoir_dim(self) -> int:
        return int(np.prod(self.dims[1], dtype=np.int64))

    @property
    def D(self) -> int:
        return self.system_dim * self.reservoir_dim

    @property
    def purity(self) -> float:
        return float(np.sum(np.abs(self.rho) ** 2))

    def is_positive(self) -> bool:
        return float(np.linalg.eigvalsh(self.rho).min()) >= -FULL_STATE_TOLERANCE


@dataclass(frozen=True)
class EnergyTable:
    """Eigenvalues of the diagonal Hamiltonian on the product number basis"""

    energies: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        energies = np.array(self.energies, dtype=float)
        energies.setflags(write=False)
        object.__setattr__(self, 'energies', energies)


class DecoherenceFit(NamedTuple):
    t_D: float
    delta1: float
    delta2: float
    window: float
    samples: int


class RevivalEvent(NamedTuple):
    time: float
    depth: float
    full_width: float


# ----------------------------------------------------------------------------
# Initial states and energies
# ----------------------------------------------------------------------------

def mode_density_matrix(dist: ModeDistribution) -> np.ndarray:
    """
    Full single-mode density matrix

    Thermal and custom modes are diagonal; phase states get their
    exp(i (n - n') phi_m) / (r + 1) off-diagonals back.
    """
    provenance = dist.provenance
    if provenance.kind == 'phase_state':
        r = provenance.r_trunc
        phi = 2.0 * math.pi * provenance.m / (r + 1)
        ket = np.exp(1j * phi * np.arange(r + 1)) / math.sqrt(r + 1)
        return np.outer(ket, ket.conj())
    return np.diag(dist.probs).astype(complex)


def diagonal_projection(matrix: np.ndarray) -> np.ndarray:
    return np.diag(np.diag(matrix))


def build_full_initial_state(sys: SystemState, modes: Sequence[np.ndarray],
                             cap: Optional[int] = None) -> FullState:
    """Tensor product rho = B (x) A^1 (x) ... (x) A^M"""
    cap = ORACLE_SIZE_CAP if cap is None else cap
    modes = [np.asarray(mode, dtype=complex) for mode in modes]
    d_r = tuple(mode.shape[0] for mode in modes)
    D = sys.dim * int(np.prod(d_r, dtype=np.int64))
    if D > cap:
        raise SizeCapError(D, cap)

    problems = []
    for index, mode in enumerate(modes):
        if mode.ndim != 2 or mode.shape[0] != mode.shape[1]:
            problems.append(f"mode {index} is not square")
            continue
        if not np.allclose(mode, mode.conj().T, atol=FULL_STATE_TOLERANCE, rtol=0.0):
            problems.append(f"mode {index} is not Hermitian")
        elif float(np.linalg.eigvalsh(mode).min()) < -FULL_STATE_TOLERANCE:
            problems.append(f"mode {index} is not positive semidefinite")
        if abs(np.trace(mode) - 1.0) > FULL_STATE_TOLERANCE:
            problems.append(f"mode {index} has trace {np.trace(mode).real:.15g}")
    if problems:
        raise InvalidStateError(problems)

    rho = reduce(np.kron, modes, np.asarray(sys.B, dtype=complex))
    logger.debug("built full state with D=%d (d_s=%d, d_r=%s)", D, sys.dim, d_r)
    return FullState((sys.dim, d_r), rho)


def build_energy_table(model: ModelSpec, dims: Tuple[int, Sequence[int]]) -> EnergyTable:
    """
    E(v, r) = hbar omega v + hbar**2 g v**2 + sum_l hbar Omega r_l
              + sum_l hbar**(x+y) lambda_l v**x r_l**y
    """
    d_s, d_r = dims
    if len(d_r) != model.M:
        raise PreconditionError(f"{len(d_r)} reservoir dimensions for {model.M} couplings")
    hbar = model.hbar
    grids = np.meshgrid(np.arange(d_s, dtype=float),
                        *[np.arange(d, dtype=float) for d in d_r], indexing='ij')
    v = grids[0]
    energies = hbar * model.omega * v + hbar ** 2 * model.g * v ** 2
    v_power = v ** float(model.x)
    interaction = hbar ** float(model.x + model.y)
    for r_l, coupling in zip(grids[1:], model.coupling_array):
        energies = energies + hbar * model.Omega * r_l
        energies = energies + interaction * coupling * v_power * r_l ** float(model.y)
    return EnergyTable(energies.ravel(), hbar)


# ----------------------------------------------------------------------------
# Evolution
# ----------------------------------------------------------------------------

def evolve_full_state(state: FullState, table: EnergyTable, t: float) -> FullState:
    """rho_ab(t) = rho_ab(0) exp(-i (E_a - E_b) t / hbar)"""
    gaps = np.subtract.outer(table.energies, table.energies)
    rho_t = state.rho * np.exp(-1j * gaps * t / table.hbar)
    return FullState(state.dims, rho_t)


def _reservoir_diagonal(state: FullState, table: EnergyTable):
    """Elements rho_(v,R),(w,R) and their energy gaps; the partial trace reads nothing else"""
    d_s, R = state.system_dim, state.reservoir_dim
    blocks = state.rho.reshape(d_s, R, d_s, R)
    index = np.arange(R)
    # shape (d_s, d_s, R)
    elements = blocks[:, index, :, index].transpose(1, 2, 0)
    energies = table.energies.reshape(d_s, R)
    gaps = energies[:, None, :] - energies[None, :, :]
    return elements, gaps


def reduced_state(state: FullState, table: EnergyTable, t: float) -> np.ndarray:
    """rho_1(t): partial trace over every reservoir index"""
    elements, gaps = _reservoir_diagonal(state, table)
    return (elements * np.exp(-1j * gaps * t / table.hbar)).sum(axis=-1)


def evolve_linear_entropy(state: FullState, table: EnergyTable, times) -> TimeSeries:
    """1 - Tr rho_1(t)**2 at every sample time"""
    if table.energies.size != state.D:
        raise PreconditionError(f"energy table has {table.energies.size} entries for D={state.D}")
    times = np.asarray(times, dtype=float)
    elements, gaps = _reservoir_diagonal(state, table)
    values = np.empty(times.size)
    for i, t in enumerate(times):
        rho_1 = (elements * np.exp(-1j * gaps * t / table.hbar)).sum(axis=-1)
        values[i] = 1.0 - float(np.sum(np.abs(rho_1) ** 2))
    return TimeSeries(times, values, {'source': 'oracle', 'D': state.D})


def recurrence_distance(state: FullState, table: EnergyTable, t: float) -> float:
    """max |rho_1(t) - rho_1(0)|"""
    return float(np.max(np.abs(reduced_state(state, table, t) - reduced_state(state, table, 0.0))))


# ----------------------------------------------------------------------------
# Curve readers
# ----------------------------------------------------------------------------

def fit_decoherence_time(series: TimeSeries, window: Optional[float] = None,
                         min_samples: int = 8, degree: int = 6,
                         tolerance: float = 0.01) -> DecoherenceFit:
    """
    Least-squares short-time fit delta(t) ~ delta1 t + delta2 t**2 + ...

    Terms up to t**degree absorb the curvature of the tail so delta2 stays
    unbiased. The window starts at the hint (or the whole series) and is
    halved until two successive delta2 estimates agree within `tolerance`,
    the window lies inside the fitted t_D and the fit residual is below
    `tolerance` of the quadratic term. A non-positive quadratic term only
    means the window is still too wide; it is an error on the narrowest
    window that keeps `min_samples` points.

    Returns:
        DecoherenceFit with t_D = 1/sqrt(delta2)
    """
    times, values = series.times, series.values
    if times.size == 0 or abs(times[0]) > 1e-15:
        raise PreconditionError('series must start at t = 0')
    if values[0] >= 1e-12:
        raise PreconditionError(f"series must start pure, delta(0) = {values[0]:.3g}")

    def inside(limit):
        return times <= limit * (1.0 + 1e-12)

    span = float(times[-1]) if window is None else float(window)
    count = int(inside(span).sum())
    if count < min_samples:
        raise FitError(f"only {count} samples inside window {span:.6g}; need {min_samples}")

    previous = None
    while True:
        mask = inside(span)
        count = int(mask.sum())
        scaled = times[mask] / span
        order = max(2, min(degree, count - 2))
        design = np.vander(scaled, order + 1, increasing=True)[:, 1:]
        coefficients, *_ = np.linalg.lstsq(design, values[mask], rcond=None)
        quadratic = float(coefficients[1])
        estimate = quadratic / span ** 2
        if quadratic > 0:
            residual = float(np.max(np.abs(design @ coefficients - values[mask])))
            converged = (previous is not None
                         and abs(estimate - previous) <= tolerance * estimate
                         and quadratic <= 1.0
                         and residual <= tolerance * quadratic)
            if converged:
                break
            previous = estimate
        else:
            previous = None

        if int(inside(span / 2.0).sum()) < min_samples:
            if quadratic <= 0:
                raise NoDecoherenceError(
                    f"fitted quadratic coefficient {quadratic:.3g} is not positive on the narrowest window {span:.6g}")
            raise FitError(f"delta2 did not settle before the window {span:.6g} ran out of samples")
        span /= 2.0

    delta1 = float(coefficients[0] / span)
    return DecoherenceFit(1.0 / math.sqrt(estimate), delta1, estimate, span, count)


def detect_revivals(series: TimeSeries, depth_threshold: float) -> List[RevivalEvent]:
    """
    Local minima of delta below depth_threshold

    The plateau of each dip is the lower of its two surrounding maxima; the
    width is measured where delta crosses minimum + (plateau - minimum)/2.
    """
    if not 0 < depth_threshold < 1:
        raise PreconditionError(f"depth_threshold must lie in (0, 1), got {depth_threshold}")
    if len(series) < 3:
        return []
    inverted = -series.values
    peaks, _ = find_peaks(inverted, height=-depth_threshold)
    if peaks.size == 0:
        return []
    widths, _, left, right = peak_widths(inverted, peaks, rel_height=0.5)
    index = np.arange(len(series), dtype=float)
    events = []
    for peak, lo, hi in zip(peaks, left, right):
        t_lo = float(np.interp(lo, index, series.times))
        t_hi = float(np.interp(hi, index, series.times))
        events.append(RevivalEvent(float(series.times[peak]), float(series.values[peak]), t_hi - t_lo))
    return events


def coarse_grain(series: TimeSeries, resolution: float) -> TimeSeries:
    """Centered moving average of width `resolution` (finite time resolution)"""
    if resolution < 0:
        raise PreconditionError(f"resolution must be >= 0, got {resolution}")
    if resolution == 0 or len(series) < 2:
        return series.with_values(series.values.copy(), coarse_resolution=resolution)
    if not series.is_uniform():
        raise PreconditionError('coarse graining needs a uniformly sampled series')
    spacing = series.spacing
    if spacing > resolution / 4.0:
        raise PreconditionError(
            f"sampling interval {spacing:.6g} exceeds resolution/4 = {resolution / 4.0:.6g}; resample first")
    size = int(round(resolution / spacing))
    if size % 2 == 0:
        size += 1
    averaged = uniform_filter1d(series.values, size=size, mode='mirror')
    return series.with_values(averaged, coarse_resolution=resolution)

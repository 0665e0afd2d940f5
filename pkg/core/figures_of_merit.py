"""
Figures of merit for a cavity-coupled single-photon emitter.

- cooperativity C = 4g²/(κγ)
- cavity efficiency β = κ∫⟨a†a⟩dt from |e, 0⟩ (total κ; β_wg = (κ_wg/κ)·β on request)
- indistinguishability I = ∫∫|⟨a†(t+τ)a(t)⟩|² / ∫∫⟨a†a⟩(t+τ)⟨a†a⟩(t)
- coupling ↔ mode volume g = ξ·μ·√(ω/(2ε₀ħV))

One-time integrals are exact (running integral of the propagated state). The
double integrals use the trapezoidal rule on the product of one emission grid
with itself (see quantum_core.emission_time_grid).
"""
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import constants

import config
from core.config_utils import normalized_volume_unit, to_cubic_metres, wavelength_from_omega
from core.exceptions import (
    InvariantViolationError,
    NonConvergenceError,
    ParameterError,
    UndefinedQuantityError,
)
from core.log_decorators import log_timed
from core.logger_config import get_logger
from core.parallel import ordered_map
from core.quantum_core import (
    HilbertSpec,
    HorizonInfo,
    PropagatorCache,
    Superoperator,
    SystemParams,
    _functional,
    _vec_stack,
    build_liouvillian,
    build_operators,
    emission_horizon,
    emission_time_grid,
    evolve,
    excited_state,
    propagate_stack,
    select_backend,
    trapezoid_weights,
)

logger = get_logger(__name__)

ORIENTATIONS = ("aligned", "fixed")
CLAMP_SLACK = 1e-6
PHOTON_FLOOR = 1e-12


@dataclass(frozen=True)
class NumericsSpec:
    """Integrator and quadrature settings shared by β and I"""
    tol: float = config.DEFAULT_TOL
    backend: str = "auto"
    samples_per_rate: int = config.SAMPLES_PER_RATE
    growth: float = config.GRID_GROWTH
    excitation_cutoff: float = config.EXCITATION_CUTOFF
    residual_limit: float = config.RESIDUAL_LIMIT
    horizon_cap_factor: float = config.HORIZON_CAP_FACTOR

    def __post_init__(self):
        if not 0.0 < self.tol <= 1e-3:
            raise ParameterError(f"tol must lie in (0, 1e-3], got {self.tol!r}")
        if self.samples_per_rate < 1:
            raise ParameterError("samples_per_rate must be >= 1")
        if self.growth < 1.0:
            raise ParameterError("growth must be >= 1")
        if not 0.0 < self.excitation_cutoff <= self.residual_limit < 1.0:
            raise ParameterError("need 0 < excitation_cutoff <= residual_limit < 1")
        if self.horizon_cap_factor <= 0:
            raise ParameterError("horizon_cap_factor must be positive")

    def refined(self, factor: int) -> "NumericsSpec":
        """Same settings with a grid ``factor`` times finer"""
        return replace(self, samples_per_rate=self.samples_per_rate * int(factor))


@dataclass(frozen=True)
class DipoleSpec:
    """
    Emitter dipole.

    mu is in C·m. ``orientation`` is "aligned" (μ ∥ E everywhere, the upper
    bound on g) or "fixed" with a unit ``axis``. overlap_xi ∈ (0, 1] scales
    the coupling at the mode maximum.
    """
    mu: float
    orientation: str = "aligned"
    axis: Optional[Tuple[float, float, float]] = None
    overlap_xi: float = config.DEFAULT_OVERLAP_XI

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ParameterError(f"dipole moment must be positive, got {self.mu!r}")
        if not 0.0 < self.overlap_xi <= 1.0:
            raise ParameterError(f"overlap_xi must lie in (0, 1], got {self.overlap_xi!r}")
        if self.orientation not in ORIENTATIONS:
            raise ParameterError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")
        if self.orientation == "fixed":
            if self.axis is None or len(self.axis) != 3:
                raise ParameterError("fixed orientation needs a 3-component axis")
            norm = math.sqrt(sum(float(c) ** 2 for c in self.axis))
            if abs(norm - 1.0) > 1e-12:
                raise ParameterError(f"dipole axis must be a unit vector (norm {norm!r})")


@dataclass(frozen=True)
class NumericsReport:
    """What was actually used to produce a FomResult"""
    horizon: float
    residual: float
    capped: bool
    tol: float
    backend: str
    grid_points: int
    samples_per_rate: int


@dataclass(frozen=True)
class EmissionBudget:
    """Where the initial excitation went: cavity κ∫⟨a†a⟩, emitter γ∫⟨σ₊σ₋⟩, still inside"""
    cavity: float
    emitter: float
    residual: float
    horizon: float


@dataclass(frozen=True)
class FomResult:
    beta: float
    indist: float
    cooperativity: Optional[float]
    params: SystemParams
    numerics: NumericsReport
    beta_wg: float
    emitter_fraction: float


class RowStatus(Enum):
    """Status of one sweep point"""
    OK = "ok"
    ERROR = "error"


@dataclass
class SweepRow:
    index: int
    g: Optional[float]
    volume_m3: Optional[float] = None
    volume_normalized: Optional[float] = None
    result: Optional[FomResult] = None
    status: RowStatus = RowStatus.OK
    message: str = ""


# ==========================================
# CLOSED FORMS
# ==========================================

def cooperativity(params: SystemParams) -> float:
    """C = 4g²/(κγ) with κ = κ_wg + κ_sc"""
    if params.kappa <= 0 or params.gamma <= 0:
        raise UndefinedQuantityError("cooperativity needs κ > 0 and γ > 0")
    return 4.0 * params.g ** 2 / (params.kappa * params.gamma)


def purcell_rate(params: SystemParams) -> float:
    """Cavity-enhanced emitter decay 4g²/κ (weak coupling)"""
    if params.kappa <= 0:
        raise UndefinedQuantityError("Purcell rate needs κ > 0")
    return 4.0 * params.g ** 2 / params.kappa


def adiabatic_beta(params: SystemParams) -> float:
    """β ≈ C/(C+1), valid once the cavity can be adiabatically eliminated (κ ≫ g, γ*)"""
    c = cooperativity(params)
    return c / (c + 1.0)


# ==========================================
# COUPLING AND MODE VOLUME
# ==========================================

def _volume_in_m3(volume, unit, omega, wavelength, refractive_index):
    if unit == "lambda_n3" and wavelength is None:
        wavelength = wavelength_from_omega(omega)
    return to_cubic_metres(volume, unit, wavelength, refractive_index)


def g_from_mode_volume(volume: float, dipole: DipoleSpec, omega: float, unit: str = "m3",
                       wavelength: Optional[float] = None,
                       refractive_index: Optional[float] = None) -> float:
    """
    Peak coupling rate for a mode volume.

    Args:
        volume: Mode volume in ``unit`` (m3, um3 or lambda_n3)
        dipole: Emitter dipole (μ in C·m, overlap_xi)
        omega: Optical angular frequency (rad/s)
        unit: Unit of ``volume``
        wavelength: Vacuum wavelength for lambda_n3 (defaults to 2πc/ω)
        refractive_index: n for lambda_n3

    Returns:
        float: g = ξ·μ·√(ω/(2ε₀ħV)) in rad/s
    """
    if omega <= 0:
        raise ParameterError(f"omega must be positive, got {omega!r}")
    v_m3 = _volume_in_m3(volume, unit, omega, wavelength, refractive_index)
    if not v_m3 > 0:
        raise ParameterError(f"mode volume must be positive, got {volume!r} {unit}")
    return dipole.overlap_xi * dipole.mu * math.sqrt(omega / (2.0 * constants.epsilon_0 * constants.hbar * v_m3))


def mode_volume_from_g(g: float, dipole: DipoleSpec, omega: float) -> float:
    """Inverse of g_from_mode_volume: V (m³) = (ξμ)²ω / (2ε₀ħg²)"""
    if not g > 0:
        raise ParameterError(f"coupling must be positive to define a mode volume, got {g!r}")
    if omega <= 0:
        raise ParameterError(f"omega must be positive, got {omega!r}")
    return (dipole.overlap_xi * dipole.mu) ** 2 * omega / (2.0 * constants.epsilon_0 * constants.hbar * g ** 2)


# ==========================================
# EMISSION DYNAMICS
# ==========================================

@dataclass
class _Emission:
    params: SystemParams
    spec: HilbertSpec
    numerics: NumericsSpec
    L: Superoperator
    horizon: HorizonInfo
    backend: str
    rho0: np.ndarray = field(repr=False, default=None)


def _prepare_emission(params: SystemParams, spec: HilbertSpec, numerics: NumericsSpec) -> _Emission:
    L = build_liouvillian(params, spec)
    rho0 = excited_state(spec).entries
    info = emission_horizon(params, L, rho0, spec,
                            cutoff=numerics.excitation_cutoff,
                            cap_factor=numerics.horizon_cap_factor)
    if info.capped and info.residual > numerics.residual_limit:
        raise NonConvergenceError(
            f"non-converged integral: residual excitation {info.residual:.3e} exceeds "
            f"{numerics.residual_limit:.0e} at the horizon cap",
            t_reached=info.horizon,
        )
    return _Emission(params=params, spec=spec, numerics=numerics, L=L, horizon=info,
                     backend=select_backend(numerics.backend, spec.dim), rho0=rho0)


def _checked_fraction(value: float, name: str) -> float:
    if not -CLAMP_SLACK <= value <= 1.0 + CLAMP_SLACK:
        raise InvariantViolationError(f"{name} = {value!r} outside [0, 1] beyond {CLAMP_SLACK:.0e}")
    return min(1.0, max(0.0, value))


def _budget(em: _Emission) -> EmissionBudget:
    ops = build_operators(em.spec)
    traj = evolve(em.L, em.rho0, [0.0, em.horizon.horizon], tol=em.numerics.tol,
                  backend=em.backend, accumulate=True)
    cavity = em.params.kappa * float(np.real(traj.integrated_expect(ops.n_cav)[-1]))
    emitter = em.params.gamma * float(np.real(traj.integrated_expect(ops.n_em)[-1]))
    return EmissionBudget(cavity=cavity, emitter=emitter,
                          residual=em.horizon.residual, horizon=em.horizon.horizon)


def _indistinguishability(em: _Emission) -> Tuple[float, int]:
    ops = build_operators(em.spec)
    grid = emission_time_grid(em.L, em.horizon.horizon,
                              samples_per_rate=em.numerics.samples_per_rate,
                              growth=em.numerics.growth,
                              cutoff=em.numerics.excitation_cutoff)
    weights = trapezoid_weights(grid)
    cache = PropagatorCache(em.L.matrix) if em.backend == "exact" else None

    traj = evolve(em.L, em.rho0, grid, tol=em.numerics.tol, backend=em.backend)
    n_t = np.real(traj.expect(ops.n_cav))
    emitted = em.params.kappa * float(np.dot(weights, n_t))
    if not emitted > PHOTON_FLOOR:
        raise UndefinedQuantityError(
            f"indistinguishability undefined: cavity emits {emitted:.1e} photons"
        )

    nt = grid.size
    # rows 0..nt-1 carry a·ρ(t) for ⟨a†(t+τ)a(t)⟩, rows nt.. carry ρ(t) for ⟨a†a⟩(t+τ)
    stack = np.vstack([
        _vec_stack(np.einsum("ij,tjk->tik", ops.a, traj.states)),
        _vec_stack(traj.states),
    ])
    f_adag = _functional(ops.adag)
    f_n = _functional(ops.n_cav)
    weighted_n = weights * n_t

    numerator = 0.0
    denominator = 0.0
    for j, x in propagate_stack(em.L, stack, grid, backend=em.backend,
                                tol=em.numerics.tol, cache=cache):
        corr = x[:nt] @ f_adag
        n_later = np.real(x[nt:] @ f_n)
        numerator += weights[j] * float(np.dot(weights, np.abs(corr) ** 2))
        denominator += weights[j] * float(np.dot(weighted_n, n_later))

    if not denominator > 0.0:
        raise UndefinedQuantityError("indistinguishability undefined: no photon reaches the cavity")
    logger.debug(f"I quadrature on {nt}x{nt} grid: num={numerator:.6e} den={denominator:.6e}")
    return _checked_fraction(numerator / denominator, "indistinguishability"), nt


def emission_budget(params: SystemParams, spec: HilbertSpec = None,
                    numerics: NumericsSpec = None) -> EmissionBudget:
    """Fractions of the |e, 0⟩ excitation leaving through the cavity and the emitter"""
    spec = spec or HilbertSpec()
    numerics = numerics or NumericsSpec()
    return _budget(_prepare_emission(params, spec, numerics))


def cavity_efficiency(params: SystemParams, spec: HilbertSpec = None,
                      numerics: NumericsSpec = None, waveguide_only: bool = False) -> float:
    """
    β = κ∫₀^∞⟨a†a⟩dt for ρ0 = |e, 0⟩⟨e, 0|.

    Args:
        params: System rates
        spec: Hilbert truncation
        numerics: Integrator settings
        waveguide_only: Return β_wg = (κ_wg/κ)·β instead

    Returns:
        float in [0, 1]
    """
    budget = emission_budget(params, spec, numerics)
    beta = _checked_fraction(budget.cavity, "beta")
    if waveguide_only:
        return beta * params.kappa_wg / params.kappa if params.kappa > 0 else 0.0
    return beta


def indistinguishability(params: SystemParams, spec: HilbertSpec = None,
                         numerics: NumericsSpec = None) -> float:
    """Two-photon interference visibility of the cavity emission from |e, 0⟩"""
    spec = spec or HilbertSpec()
    numerics = numerics or NumericsSpec()
    value, _ = _indistinguishability(_prepare_emission(params, spec, numerics))
    return value


@log_timed
def evaluate_fom(params: SystemParams, spec: HilbertSpec = None,
                 numerics: NumericsSpec = None) -> FomResult:
    """β, β_wg, I and C at one parameter point, sharing one horizon"""
    spec = spec or HilbertSpec()
    numerics = numerics or NumericsSpec()
    em = _prepare_emission(params, spec, numerics)

    budget = _budget(em)
    beta = _checked_fraction(budget.cavity, "beta")
    indist, grid_points = _indistinguishability(em)
    try:
        coop = cooperativity(params)
    except UndefinedQuantityError:
        coop = None

    report = NumericsReport(
        horizon=em.horizon.horizon,
        residual=em.horizon.residual,
        capped=em.horizon.capped,
        tol=numerics.tol,
        backend=em.backend,
        grid_points=grid_points,
        samples_per_rate=numerics.samples_per_rate,
    )
    beta_wg = beta * params.kappa_wg / params.kappa if params.kappa > 0 else 0.0
    return FomResult(beta=beta, indist=indist, cooperativity=coop, params=params,
                     numerics=report, beta_wg=beta_wg, emitter_fraction=budget.emitter)


@log_timed
def fom_sweep(base: SystemParams, g_values: Sequence[float] = None,
              v_values: Sequence[float] = None, dipole: DipoleSpec = None,
              spec: HilbertSpec = None, numerics: NumericsSpec = None,
              refractive_index: Optional[float] = None, v_unit: str = "m3",
              max_workers: Optional[int] = None) -> List[SweepRow]:
    """
    Figures of merit over a list of couplings or of mode volumes.

    Exactly one of ``g_values`` (rad/s) and ``v_values`` (in ``v_unit``) is
    given. Mode volumes need a dipole; with a dipole the V columns are filled
    for g sweeps too (normalized units when refractive_index is known). Rows
    keep input order and a failing point is reported in its row status.

    Returns:
        list[SweepRow]
    """
    if (g_values is None) == (v_values is None):
        raise ParameterError("give exactly one of g_values and v_values")
    values = list(g_values if g_values is not None else v_values)
    if not values:
        raise ParameterError("sweep list is empty")
    if v_values is not None and dipole is None:
        raise ParameterError("a mode-volume sweep needs a dipole")

    spec = spec or HilbertSpec()
    numerics = numerics or NumericsSpec()
    wavelength = wavelength_from_omega(base.omega)
    unit_volume = normalized_volume_unit(wavelength, refractive_index) if refractive_index else None

    rows = []
    for index, value in enumerate(values):
        if g_values is not None:
            g = float(value)
            v_m3 = mode_volume_from_g(g, dipole, base.omega) if dipole is not None and g > 0 else None
            rows.append(SweepRow(index=index, g=g, volume_m3=v_m3))
            continue
        v_m3 = _volume_in_m3(value, v_unit, base.omega, wavelength, refractive_index)
        try:
            rows.append(SweepRow(index=index, g=g_from_mode_volume(v_m3, dipole, base.omega),
                                 volume_m3=v_m3))
        except ParameterError as e:
            logger.warning(f"sweep point {index + 1}/{len(values)} skipped: {e}")
            rows.append(SweepRow(index=index, g=None, volume_m3=v_m3, status=RowStatus.ERROR,
                                 message=f"{type(e).__name__}: {e}"))
    for row in rows:
        if row.volume_m3 is not None and unit_volume:
            row.volume_normalized = row.volume_m3 / unit_volume

    pending = [row for row in rows if row.status == RowStatus.OK]
    logger.info(f"FoM sweep over {len(pending)}/{len(rows)} points "
                f"(n_max={spec.n_max}, backend={numerics.backend})")
    outcomes = ordered_map(lambda row: evaluate_fom(base.replace(g=row.g), spec, numerics),
                           pending, max_workers=max_workers, label="sweep point")

    for row, outcome in zip(pending, outcomes):
        if outcome.ok:
            row.result = outcome.value
        else:
            row.status = RowStatus.ERROR
            row.message = f"{type(outcome.error).__name__}: {outcome.error}"
    return rows

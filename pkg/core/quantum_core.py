"""
Quantum core: Jaynes–Cummings emitter-cavity model with Lindblad losses.

Conventions used throughout the package:

- Basis |s, n⟩ with s = 0 (ground) or 1 (excited) and n = 0..n_max photons,
  flattened as index = s·(n_max+1) + n (emitter ⊗ cavity Kronecker order).
- Hamiltonian in the frame rotating at the emitter frequency, in rad/s:
  H/ħ = g(σ₋a† + σ₊a) + δ_ca·a†a.
- Dissipators: a at rate κ = κ_wg + κ_sc, σ₊σ₋ at rate γ*, σ₋ at rate γ.
- Column-stacking vectorization, vec(AXB) = (Bᵀ ⊗ A) vec(X).
"""
import dataclasses
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

import config
from core.config_utils import omega_from_wavelength
from core.exceptions import (
    DimensionError,
    IntegrationError,
    InvariantViolationError,
    NonConvergenceError,
    ParameterError,
)
from core.logger_config import get_logger

logger = get_logger(__name__)

GROUND = 0
EXCITED = 1

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8

BACKENDS = ("auto", "exact", "rk")

DEFAULT_OMEGA = omega_from_wavelength(config.DEFAULT_WAVELENGTH_NM * 1e-9)

_PROPAGATOR_CACHE_LIMIT = 8192


# ==========================================
# DOMAIN TYPES
# ==========================================

@dataclass(frozen=True)
class SystemParams:
    """Cavity-emitter rate set, all angular frequencies in rad/s"""
    g: float
    kappa_wg: float
    kappa_sc: float = 0.0
    gamma: float = 0.0
    gamma_star: float = 0.0
    delta_ca: float = 0.0
    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        for name in ("g", "kappa_wg", "kappa_sc", "gamma", "gamma_star", "delta_ca", "omega"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        for name in ("g", "kappa_wg", "kappa_sc", "gamma", "gamma_star"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.omega <= 0:
            raise ParameterError(f"omega must be > 0, got {self.omega!r}")

    @property
    def kappa(self) -> float:
        """Total cavity loss κ = κ_wg + κ_sc"""
        return self.kappa_wg + self.kappa_sc

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class HilbertSpec:
    """Truncated emitter ⊗ Fock space, dimension 2·(n_max+1)"""
    n_max: int = config.DEFAULT_N_MAX

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ParameterError(
                f"n_max must be an integer >= 1 (vacuum Rabi needs a photon state), got {self.n_max!r}"
            )

    @property
    def n_levels(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    def index(self, s: int, n: int) -> int:
        if s not in (GROUND, EXCITED) or not 0 <= n <= self.n_max:
            raise ParameterError(f"no basis state |{s}, {n}⟩ for n_max={self.n_max}")
        return s * self.n_levels + n


@dataclass(frozen=True)
class Operators:
    """Named operators on a HilbertSpec"""
    a: np.ndarray
    adag: np.ndarray
    sm: np.ndarray
    sp: np.ndarray
    n_cav: np.ndarray
    n_em: np.ndarray
    identity: np.ndarray


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def validate(self, normalized: bool = True) -> "DensityMatrix":
        validate_density_matrix(self.entries, normalized=normalized)
        return self


@dataclass(frozen=True)
class Superoperator:
    """Liouvillian acting on column-stacked density matrices"""
    matrix: np.ndarray
    dim: int

    @property
    def dim2(self) -> int:
        return self.dim * self.dim

    def apply(self, x: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(x), self.dim)


@dataclass(frozen=True)
class InvariantDefects:
    """Largest deviations seen on a raw trajectory, before Hermitian projection"""
    hermiticity: float
    trace: float
    min_eigenvalue: float


@dataclass
class Trajectory:
    """
    States on a strictly increasing time grid.

    ``integrals`` holds the running integral ∫ρ ds from times[0] when the
    evolution was asked to accumulate it.
    """
    times: np.ndarray
    states: np.ndarray
    integrals: Optional[np.ndarray] = None
    backend: str = "exact"
    defects: Optional[InvariantDefects] = None

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> DensityMatrix:
        return DensityMatrix(self.states[k])

    def expect(self, op: np.ndarray) -> np.ndarray:
        """tr(op·ρ(t)) for every output time"""
        return np.einsum("ij,tji->t", op, self.states)

    def integrated_expect(self, op: np.ndarray) -> np.ndarray:
        """tr(op·∫ρ ds) for every output time"""
        if self.integrals is None:
            raise ParameterError("trajectory was evolved without accumulate=True")
        return np.einsum("ij,tji->t", op, self.integrals)


@dataclass
class CorrGrid:
    """Two-time correlation G[i, j] = G(t_grid[i], tau_grid[j])"""
    t_grid: np.ndarray
    tau_grid: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class HorizonInfo:
    horizon: float
    residual: float
    capped: bool


# ==========================================
# VECTORIZATION
# ==========================================

def vec(x: np.ndarray) -> np.ndarray:
    """Column-stack a matrix"""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def _vec_stack(xs: np.ndarray) -> np.ndarray:
    # row k is vec(xs[k])
    return np.ascontiguousarray(np.transpose(xs, (0, 2, 1))).reshape(xs.shape[0], -1)


def _unvec_stack(vs: np.ndarray, dim: int) -> np.ndarray:
    return np.transpose(vs.reshape(vs.shape[0], dim, dim), (0, 2, 1))


def _functional(op: np.ndarray) -> np.ndarray:
    """Row vector f with f·vec(X) = tr(op·X)"""
    return vec(np.asarray(op).T)


def left_multiplication(op: np.ndarray) -> np.ndarray:
    """Superoperator X ↦ op·X"""
    return np.kron(np.eye(op.shape[0]), op)


def right_multiplication(op: np.ndarray) -> np.ndarray:
    """Superoperator X ↦ X·op"""
    return np.kron(op.T, np.eye(op.shape[0]))


def dissipator(c: np.ndarray) -> np.ndarray:
    """Superoperator X ↦ cXc† − {c†c, X}/2"""
    cdc = c.conj().T @ c
    return np.kron(c.conj(), c) - 0.5 * (left_multiplication(cdc) + right_multiplication(cdc))


# ==========================================
# STATES AND OPERATORS
# ==========================================

def build_operators(spec: HilbertSpec) -> Operators:
    destroy = np.diag(np.sqrt(np.arange(1, spec.n_levels, dtype=float)), k=1).astype(complex)
    lower = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g⟩⟨e| in (g, e) order

    a = np.kron(np.eye(2), destroy)
    sm = np.kron(lower, np.eye(spec.n_levels))
    adag = a.conj().T
    sp = sm.conj().T
    return Operators(
        a=a,
        adag=adag,
        sm=sm,
        sp=sp,
        n_cav=adag @ a,
        n_em=sp @ sm,
        identity=np.eye(spec.dim, dtype=complex),
    )


def basis_state(spec: HilbertSpec, s: int, n: int) -> DensityMatrix:
    """Projector |s, n⟩⟨s, n|"""
    rho = np.zeros((spec.dim, spec.dim), dtype=complex)
    k = spec.index(s, n)
    rho[k, k] = 1.0
    return DensityMatrix(rho)


def excited_state(spec: HilbertSpec) -> DensityMatrix:
    """|e, 0⟩⟨e, 0|: excited emitter, empty cavity"""
    return basis_state(spec, EXCITED, 0)


def validate_density_matrix(rho, normalized: bool = True,
                            hermiticity_tol: float = HERMITICITY_TOL,
                            trace_tol: float = TRACE_TOL,
                            positivity_tol: float = POSITIVITY_TOL) -> None:
    """
    Check the DensityMatrix invariants and raise on the first violation.

    Args:
        rho: Square complex matrix
        normalized: Require unit trace
        hermiticity_tol: Bound on max |ρ − ρ†|
        trace_tol: Bound on |tr ρ − 1|
        positivity_tol: Bound on −(minimum eigenvalue)
    """
    rho = _as_matrix(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvariantViolationError("density matrix has non-finite entries")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > hermiticity_tol:
        raise InvariantViolationError(f"density matrix not Hermitian: max|ρ−ρ†| = {herm:.3e}")
    if normalized:
        trace_err = abs(np.trace(rho) - 1.0)
        if trace_err > trace_tol:
            raise InvariantViolationError(f"density matrix trace off by {trace_err:.3e}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if min_eig < -positivity_tol:
        raise InvariantViolationError(f"density matrix not positive: min eigenvalue {min_eig:.3e}")


def _as_matrix(x: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.entries
    return np.asarray(x, dtype=complex)


def expectation(op: np.ndarray, rho: Union[DensityMatrix, np.ndarray]) -> complex:
    """tr(op·ρ)"""
    op = np.asarray(op)
    rho = _as_matrix(rho)
    if op.ndim != 2 or op.shape != rho.shape:
        raise DimensionError(f"operator shape {op.shape} does not match state shape {rho.shape}")
    return complex(np.einsum("ij,ji->", op, rho))


# ==========================================
# GENERATORS
# ==========================================

def build_hamiltonian(params: SystemParams, spec: HilbertSpec) -> np.ndarray:
    """H/ħ = g(σ₋a† + σ₊a) + δ_ca·a†a, rad/s, emitter rotating frame"""
    if spec.n_max < 1:
        raise ParameterError("n_max must be >= 1")
    ops = build_operators(spec)
    return params.g * (ops.sm @ ops.adag + ops.sp @ ops.a) + params.delta_ca * ops.n_cav


def build_liouvillian(params: SystemParams, spec: HilbertSpec) -> Superoperator:
    """
    Lindblad generator L with dvec(ρ)/dt = L·vec(ρ).

    L = −i(1⊗H − Hᵀ⊗1) + κD[a] + γ*D[σ₊σ₋] + γD[σ₋] on column-stacked ρ.
    """
    ops = build_operators(spec)
    h = build_hamiltonian(params, spec)

    matrix = -1j * (left_multiplication(h) - right_multiplication(h))
    if params.kappa > 0:
        matrix = matrix + params.kappa * dissipator(ops.a)
    if params.gamma_star > 0:
        matrix = matrix + params.gamma_star * dissipator(ops.n_em)
    if params.gamma > 0:
        matrix = matrix + params.gamma * dissipator(ops.sm)

    L = Superoperator(matrix=matrix, dim=spec.dim)
    defect = trace_defect(L)
    if defect > 1e-12:
        raise InvariantViolationError(f"Liouvillian is not trace preserving (relative defect {defect:.3e})")
    return L


def trace_defect(L: Superoperator) -> float:
    """max |tr(L[E_ij])| relative to the largest generator entry"""
    scale = float(np.max(np.abs(L.matrix))) if L.matrix.size else 0.0
    if scale == 0.0:
        return 0.0
    row = _functional(np.eye(L.dim)) @ L.matrix
    return float(np.max(np.abs(row))) / scale


# ==========================================
# PROPAGATION
# ==========================================

def select_backend(backend: str, dim: int) -> str:
    if backend not in BACKENDS:
        raise ParameterError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if backend == "auto":
        return "exact" if dim <= config.EXACT_BACKEND_MAX_DIM else "rk"
    return backend


class PropagatorCache:
    """expm(M·dt) keyed by the step length"""

    def __init__(self, generator: np.ndarray):
        self.generator = generator
        self._cache = {}

    def __call__(self, dt: float) -> np.ndarray:
        key = float(dt)
        prop = self._cache.get(key)
        if prop is None:
            if len(self._cache) >= _PROPAGATOR_CACHE_LIMIT:
                self._cache.clear()
            prop = expm(self.generator * key)
            self._cache[key] = prop
        return prop


def _augmented(matrix: np.ndarray, scale: float) -> np.ndarray:
    # d/dt [v; w] = [L v; s·v]  so w(t) = s·∫ v ds, same magnitude as v
    n = matrix.shape[0]
    aug = np.zeros((2 * n, 2 * n), dtype=complex)
    aug[:n, :n] = matrix
    aug[n:, :n] = scale * np.eye(n)
    return aug


def _check_times(times, name="times") -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError(f"{name} must be a nonempty 1-D grid")
    if not np.all(np.isfinite(times)):
        raise ParameterError(f"{name} must be finite")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ParameterError(f"{name} must be strictly increasing")
    return times


def _check_tol(tol: float) -> float:
    if not 0.0 < tol <= 1e-3:
        raise ParameterError(f"tol must lie in (0, 1e-3], got {tol!r}")
    return float(tol)


def _solve_rk(matrix: np.ndarray, y0: np.ndarray, times: np.ndarray, tol: float) -> np.ndarray:
    """DOP853 with dense output at the requested times; returns (nt, n)"""
    def rhs(_t, y):
        return matrix @ y

    sol = solve_ivp(rhs, (times[0], times[-1]), y0, method="DOP853",
                    t_eval=times, rtol=tol, atol=1e-2 * tol)
    if sol.status != 0:
        t_reached = float(sol.t[-1]) if sol.t.size else float(times[0])
        raise IntegrationError(f"adaptive integration failed: {sol.message}", t_reached=t_reached)
    return sol.y.T


def _propagate_vectors(matrix: np.ndarray, y0: np.ndarray, times: np.ndarray,
                       backend: str, tol: float,
                       cache: Optional[PropagatorCache] = None) -> np.ndarray:
    out = np.empty((times.size, y0.size), dtype=complex)
    out[0] = y0
    if times.size == 1:
        return out
    if backend == "rk":
        return _solve_rk(matrix, y0.astype(complex), times, tol)

    cache = cache or PropagatorCache(matrix)
    y = y0.astype(complex)
    for k, dt in enumerate(np.diff(times), start=1):
        y = cache(dt) @ y
        out[k] = y
    return out


def _check_trajectory(states: np.ndarray, trace0: complex, tol: float) -> InvariantDefects:
    limit = 10.0 * tol
    herm = float(np.max(np.abs(states - np.conj(np.transpose(states, (0, 2, 1))))))
    if herm > limit:
        raise InvariantViolationError(f"Hermiticity lost during evolution: {herm:.3e} > {limit:.1e}")
    trace_err = float(np.max(np.abs(np.trace(states, axis1=1, axis2=2) - trace0)))
    if trace_err > limit:
        raise InvariantViolationError(f"trace drift during evolution: {trace_err:.3e} > {limit:.1e}")
    hermitian = 0.5 * (states + np.conj(np.transpose(states, (0, 2, 1))))
    min_eig = float(np.min(np.linalg.eigvalsh(hermitian)[:, 0]))
    if min_eig < -max(POSITIVITY_TOL, limit):
        raise InvariantViolationError(f"positivity lost during evolution: min eigenvalue {min_eig:.3e}")
    return InvariantDefects(hermiticity=herm, trace=trace_err, min_eigenvalue=min_eig)


def evolve(L: Superoperator, rho0: Union[DensityMatrix, np.ndarray], times,
           tol: float = config.DEFAULT_TOL, backend: str = "auto",
           accumulate: bool = False) -> Trajectory:
    """
    Propagate ρ0 (the state at times[0]) through the requested grid.

    Args:
        L: Liouvillian
        rho0: Normalized density matrix at times[0]
        times: Strictly increasing output grid (s)
        tol: Local error target of the adaptive backend, in (0, 1e-3]
        backend: "exact" (matrix exponential), "rk" (DOP853) or "auto"
        accumulate: Also return the running integral ∫ρ ds

    Returns:
        Trajectory with one trace-preserved state per time. The raw states
        are checked against 10·tol, then projected onto Hermitian matrices;
        ``defects`` keeps the deviations measured before the projection.
    """
    tol = _check_tol(tol)
    times = _check_times(times)
    rho0 = _as_matrix(rho0)
    if rho0.shape != (L.dim, L.dim):
        raise DimensionError(f"state shape {rho0.shape} does not match Liouvillian dim {L.dim}")
    validate_density_matrix(rho0)
    backend = select_backend(backend, L.dim)

    v0 = vec(rho0)
    matrix = L.matrix
    scale = float(np.max(np.abs(matrix))) or 1.0
    if accumulate:
        matrix = _augmented(matrix, scale)
        v0 = np.concatenate([v0, np.zeros_like(v0)])

    out = _propagate_vectors(matrix, v0, times, backend, tol)

    d2 = L.dim2
    states = _unvec_stack(out[:, :d2], L.dim)
    defects = _check_trajectory(states, np.trace(rho0), tol)
    states = 0.5 * (states + np.conj(np.transpose(states, (0, 2, 1))))

    integrals = None
    if accumulate:
        integrals = _unvec_stack(out[:, d2:], L.dim) / scale
        integrals = 0.5 * (integrals + np.conj(np.transpose(integrals, (0, 2, 1))))

    return Trajectory(times=times, states=states, integrals=integrals, backend=backend, defects=defects)


def propagate_stack(L: Superoperator, stack: np.ndarray, tau_grid: np.ndarray,
                    backend: str = "auto", tol: float = config.DEFAULT_TOL,
                    cache: Optional[PropagatorCache] = None) -> Iterator[Tuple[int, np.ndarray]]:
    """
    Propagate many vectorized operators together, yielding (j, X(τ_j)).

    ``stack`` has one vec'd operator per row; tau_grid starts at 0.
    Arbitrary (not necessarily physical) operators are allowed, so no
    density-matrix checks are made here.
    """
    backend = select_backend(backend, L.dim)
    x = np.array(stack, dtype=complex)
    yield 0, x
    if tau_grid.size == 1:
        return

    if backend == "exact":
        cache = cache or PropagatorCache(L.matrix)
        for j, dt in enumerate(np.diff(tau_grid), start=1):
            x = x @ cache(dt).T
            yield j, x
        return

    rows, d2 = x.shape

    def rhs(_t, y):
        return (y.reshape(rows, d2) @ L.matrix.T).ravel()

    for j in range(1, tau_grid.size):
        sol = solve_ivp(rhs, (tau_grid[j - 1], tau_grid[j]), x.ravel(), method="DOP853",
                        rtol=tol, atol=1e-2 * tol)
        if sol.status != 0:
            raise IntegrationError(f"regression propagation failed: {sol.message}",
                                   t_reached=float(sol.t[-1]))
        x = sol.y[:, -1].reshape(rows, d2)
        yield j, x


def two_time_correlation(L: Superoperator, rho0: Union[DensityMatrix, np.ndarray],
                         left: np.ndarray, right: np.ndarray, t_grid, tau_grid,
                         tol: float = config.DEFAULT_TOL, backend: str = "auto") -> CorrGrid:
    """
    G(t, τ) = tr[left · e^{Lτ}(right · ρ(t))] by the quantum regression theorem.

    With left = a†, right = a this is ⟨a†(t+τ)a(t)⟩. Both grids start at 0.
    """
    t_grid = _check_times(t_grid, "t_grid")
    tau_grid = _check_times(tau_grid, "tau_grid")
    if t_grid[0] != 0.0 or tau_grid[0] != 0.0:
        raise ParameterError("t_grid and tau_grid must start at 0")
    left = np.asarray(left)
    right = np.asarray(right)
    if left.shape != (L.dim, L.dim) or right.shape != (L.dim, L.dim):
        raise DimensionError(f"correlation operators must be {L.dim}x{L.dim}")

    backend = select_backend(backend, L.dim)
    cache = PropagatorCache(L.matrix) if backend == "exact" else None
    traj = evolve(L, rho0, t_grid, tol=tol, backend=backend)

    stack = _vec_stack(np.einsum("ij,tjk->tik", right, traj.states))
    left_row = _functional(left)
    values = np.empty((t_grid.size, tau_grid.size), dtype=complex)
    for j, x in propagate_stack(L, stack, tau_grid, backend=backend, tol=tol, cache=cache):
        values[:, j] = x @ left_row
    return CorrGrid(t_grid=t_grid, tau_grid=tau_grid, values=values)


# ==========================================
# EMISSION HORIZON AND TIME GRID
# ==========================================

def remaining_excitation(L: Superoperator, rho0: Union[DensityMatrix, np.ndarray],
                         spec: HilbertSpec, t: float) -> float:
    """tr[(a†a + σ₊σ₋)ρ(t)] by a single matrix exponential"""
    ops = build_operators(spec)
    v = expm(L.matrix * t) @ vec(_as_matrix(rho0))
    return float(np.real(_functional(ops.n_cav + ops.n_em) @ v))


def _nonzero_spectrum(L: Superoperator) -> np.ndarray:
    eig = np.linalg.eigvals(L.matrix)
    scale = float(np.max(np.abs(eig))) if eig.size else 0.0
    if scale == 0.0:
        return eig[:0]
    return eig[np.abs(eig) > 1e-12 * scale]


def emission_horizon(params: SystemParams, L: Superoperator,
                     rho0: Union[DensityMatrix, np.ndarray], spec: HilbertSpec,
                     cutoff: float = config.EXCITATION_CUTOFF,
                     cap_factor: float = config.HORIZON_CAP_FACTOR) -> HorizonInfo:
    """
    Time after which the remaining excitation is below ``cutoff``.

    Starts from the slowest decaying Liouvillian mode and doubles until the
    excitation has left the system, never beyond cap_factor / min(κ, γ).
    A capped horizon is returned with capped=True and logged as a warning;
    callers decide whether the residual is acceptable.
    """
    channels = [r for r in (params.kappa, params.gamma) if r > 0]
    if not channels:
        raise NonConvergenceError("no decay channel (κ = γ = 0): the excitation never leaves the system")
    cap = cap_factor / min(channels)

    spectrum = _nonzero_spectrum(L)
    scale = float(np.max(np.abs(spectrum))) if spectrum.size else 0.0
    decay = -spectrum.real[spectrum.real < -1e-12 * scale] if scale else np.empty(0)
    horizon = min(cap, math.log(1.0 / cutoff) / float(decay.min())) if decay.size else cap

    while True:
        residual = remaining_excitation(L, rho0, spec, horizon)
        if residual < cutoff:
            logger.debug(f"Emission horizon {horizon:.4e} s, residual excitation {residual:.3e}")
            return HorizonInfo(horizon=horizon, residual=residual, capped=False)
        if horizon >= cap:
            logger.warning(f"Emission horizon capped at {cap:.4e} s with residual excitation {residual:.3e}")
            return HorizonInfo(horizon=cap, residual=residual, capped=True)
        horizon = min(2.0 * horizon, cap)


def emission_time_grid(L: Superoperator, horizon: float,
                       samples_per_rate: int = config.SAMPLES_PER_RATE,
                       growth: float = config.GRID_GROWTH,
                       cutoff: float = config.EXCITATION_CUTOFF) -> np.ndarray:
    """
    Grid on [0, horizon] resolving every Liouvillian mode while it is alive.

    The step is at most 1/(samples_per_rate·|λ|) for the fastest mode λ whose
    envelope e^{Re λ t} is still above ``cutoff``; once fast modes have died
    the step grows geometrically by ``growth`` per point. The grid is built in
    units of the fastest rate, so rescaling all rates rescales it exactly.
    """
    if samples_per_rate < 1 or growth < 1.0:
        raise ParameterError("samples_per_rate must be >= 1 and growth >= 1")
    if horizon <= 0:
        raise ParameterError(f"horizon must be positive, got {horizon!r}")

    spectrum = _nonzero_spectrum(L)
    if spectrum.size == 0:
        return np.array([0.0, horizon])
    scale = float(np.max(np.abs(spectrum)))
    rates = np.abs(spectrum) / scale
    decay = np.clip(-spectrum.real, 0.0, None) / scale
    with np.errstate(divide="ignore"):
        alive_until = np.where(decay > 0, math.log(1.0 / cutoff) / decay, np.inf)

    end = horizon * scale
    points = [0.0]
    t = 0.0
    step = None
    while t < end:
        alive = rates[alive_until > t]
        bound = 1.0 / (samples_per_rate * float(alive.max())) if alive.size else end - t
        step = bound if step is None else min(bound, step * growth)
        t_next = t + step
        if end - t_next < 0.5 * step:
            t_next = end
        points.append(t_next)
        t = t_next
    return np.asarray(points) / scale


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Weights w with Σ w_k f(t_k) = trapezoidal ∫ f dt on the grid"""
    grid = np.asarray(grid, dtype=float)
    w = np.zeros_like(grid)
    if grid.size < 2:
        return w
    h = np.diff(grid)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w

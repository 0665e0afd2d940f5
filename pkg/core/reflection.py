"""
Spin-dependent cavity reflection spectra and spin contrast.

Single-sided cavity with a coupled emitter, input-output linear response:

    r(Δ) = 1 − κ_wg / [iΔ + κ/2 + g² / (i(Δ − δ_a) + γ_tot/2)]

Δ is the probe detuning from the bare cavity, δ_a = −δ_ca the emitter detuning
from the cavity and γ_tot = γ + 2γ* the emitter's homogeneous linewidth.
Spectral drift of the emitter line is modelled as a Gaussian convolution of
each reflectivity spectrum.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks, peak_widths

from core.exceptions import DriftResolutionError, ParameterError, UndefinedQuantityError
from core.logger_config import get_logger
from core.parallel import ordered_map
from core.quantum_core import SystemParams

logger = get_logger(__name__)

DRIFT_CONVENTIONS = ("sigma", "fwhm")
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
PROBE_POLICIES = ("optimize", "fixed")

# Smallest R↓ + R↑ for which a contrast is computed
DEGENERATE_SUM = 1e-12
# Kernel support in standard deviations
DRIFT_TRUNCATE = 6.0
UNIFORM_RTOL = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Reflection amplitude r or reflectivity R on a probe grid (rad/s from the bare cavity)"""
    probe_detunings: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.probe_detunings, dtype=float)
        values = np.asarray(self.amplitude)
        if grid.ndim != 1 or grid.size == 0:
            raise ParameterError("probe grid must be a nonempty 1-D array")
        if values.shape != grid.shape:
            raise ParameterError(f"spectrum has {values.shape} values for {grid.shape} probe points")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise ParameterError("probe grid must be strictly increasing")
        object.__setattr__(self, "probe_detunings", grid)
        object.__setattr__(self, "amplitude", values)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.amplitude)

    def reflectivity(self) -> "Spectrum":
        """R = |r|²"""
        if not self.is_complex:
            return self
        return Spectrum(self.probe_detunings, np.abs(self.amplitude) ** 2)

    def spacing(self) -> float:
        """Uniform grid spacing; raises when the grid is not uniform"""
        if self.probe_detunings.size < 2:
            raise ParameterError("need at least two probe points for a grid spacing")
        steps = np.diff(self.probe_detunings)
        h = float(steps.mean())
        if np.max(np.abs(steps - h)) > UNIFORM_RTOL * abs(h):
            raise ParameterError("probe grid must be uniform for drift convolution")
        return h


@dataclass(frozen=True)
class SpinConfig:
    """
    Spin-dependent emitter lines.

    zeeman_split: spin-up line minus spin-down line (rad/s)
    drift_sigma: spectral drift scale (rad/s), read as σ or as FWHM per
        drift_convention
    spin_down_offset: extra detuning of the spin-down line from the
        emitter frequency of SystemParams (rad/s)
    """
    zeeman_split: float = 0.0
    drift_sigma: float = 0.0
    spin_down_offset: float = 0.0
    drift_convention: str = "sigma"

    def __post_init__(self):
        if not self.zeeman_split >= 0:
            raise ParameterError(f"zeeman_split must be >= 0, got {self.zeeman_split!r}")
        if not self.drift_sigma >= 0:
            raise ParameterError(f"drift_sigma must be >= 0, got {self.drift_sigma!r}")
        if not math.isfinite(self.spin_down_offset):
            raise ParameterError("spin_down_offset must be finite")
        if self.drift_convention not in DRIFT_CONVENTIONS:
            raise ParameterError(f"drift_convention must be one of {DRIFT_CONVENTIONS}")

    @property
    def sigma(self) -> float:
        """Drift as a Gaussian standard deviation"""
        if self.drift_convention == "fwhm":
            return self.drift_sigma / FWHM_PER_SIGMA
        return self.drift_sigma


@dataclass(frozen=True)
class ProbePolicy:
    """How contrast_curve picks the probe: best over the window, or a fixed offset from the spin-down line"""
    mode: str = "optimize"
    offset: float = 0.0

    def __post_init__(self):
        if self.mode not in PROBE_POLICIES:
            raise ParameterError(f"probe policy must be one of {PROBE_POLICIES}, got {self.mode!r}")


@dataclass(frozen=True)
class ContrastRow:
    cavity_detuning: float
    probe: Optional[float]
    contrast: Optional[float]
    difference: Optional[float]
    r_down: Optional[float]
    r_up: Optional[float]


@dataclass(frozen=True)
class ContrastWindow:
    """Cavity-detuning span around the optimum where contrast ≥ fraction·optimum"""
    optimum_detuning: float
    optimum: float
    lower: float
    upper: float
    fraction: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class Dip:
    detuning: float
    reflectivity: float
    depth: float
    width: float


# ==========================================
# SPECTRA
# ==========================================

def quality_factor(params: SystemParams) -> float:
    """Loaded Q = ω/κ"""
    if params.kappa <= 0:
        raise UndefinedQuantityError("quality factor needs κ > 0")
    return params.omega / params.kappa


def reflectivity(params: SystemParams, atom_detuning: float, probe_grid) -> Spectrum:
    """
    Complex reflection amplitude of the coupled cavity.

    Args:
        params: Rates (κ_wg, κ_sc, g, γ, γ* used; delta_ca ignored)
        atom_detuning: Emitter minus cavity frequency δ_a (rad/s)
        probe_grid: Probe minus cavity detunings Δ (rad/s), strictly increasing

    Returns:
        Spectrum with complex amplitude r(Δ), |r| ≤ 1
    """
    delta = np.asarray(probe_grid, dtype=float)
    if params.kappa_wg == 0:
        return Spectrum(delta, np.ones(delta.shape, dtype=complex))

    gamma_tot = params.gamma + 2.0 * params.gamma_star
    emitter_denominator = 1j * (delta - atom_detuning) + 0.5 * gamma_tot
    emitter = np.zeros(delta.shape, dtype=complex)
    if params.g > 0:
        # lossless emitter exactly on its line blocks the cavity: r = 1
        blocked = emitter_denominator == 0
        safe = np.where(blocked, 1.0, emitter_denominator)
        emitter = np.where(blocked, 0.0, params.g ** 2 / safe)
    else:
        blocked = np.zeros(delta.shape, dtype=bool)

    cavity = 1j * delta + 0.5 * params.kappa + emitter
    r = 1.0 - params.kappa_wg / cavity
    r = np.where(blocked, 1.0 + 0j, r)
    return Spectrum(delta, r)


def apply_drift(spectrum: Spectrum, drift_sigma: float) -> Spectrum:
    """
    Gaussian convolution of a reflectivity spectrum.

    The kernel is sampled on the (uniform) probe grid, truncated at 6σ and
    normalized to unit sum; edges are padded with the boundary value.

    Args:
        spectrum: Real reflectivity on a uniform grid
        drift_sigma: Standard deviation of the drift (rad/s)

    Returns:
        Spectrum: R ⊛ Gaussian
    """
    if spectrum.is_complex:
        raise ParameterError("drift applies to reflectivity |r|², not to the complex amplitude")
    if drift_sigma < 0:
        raise ParameterError(f"drift_sigma must be >= 0, got {drift_sigma!r}")
    if drift_sigma == 0:
        return spectrum

    h = spectrum.spacing()
    if drift_sigma < 2.0 * h * (1.0 - UNIFORM_RTOL):
        raise DriftResolutionError(
            f"probe spacing {h:.4e} rad/s too coarse for drift σ = {drift_sigma:.4e} rad/s (need σ >= 2·spacing)"
        )
    span = spectrum.probe_detunings[-1] - spectrum.probe_detunings[0]
    if span < 8.0 * drift_sigma:
        logger.warning(f"Probe window ({span:.4e} rad/s) narrower than 8σ of the drift kernel")

    smoothed = gaussian_filter1d(spectrum.amplitude.astype(float), drift_sigma / h,
                                 mode="nearest", truncate=DRIFT_TRUNCATE)
    return Spectrum(spectrum.probe_detunings, smoothed)


def spin_line_detunings(params: SystemParams, spin: SpinConfig) -> Tuple[float, float]:
    """Spin-down and spin-up emitter lines relative to the cavity"""
    down = -params.delta_ca + spin.spin_down_offset
    return down, down + spin.zeeman_split


def spin_spectra(params: SystemParams, spin: SpinConfig, probe_grid) -> Tuple[Spectrum, Spectrum]:
    """Drift-convolved reflectivities (R↓, R↑) on a probe grid relative to the cavity"""
    down, up = spin_line_detunings(params, spin)
    r_down = apply_drift(reflectivity(params, down, probe_grid).reflectivity(), spin.sigma)
    r_up = apply_drift(reflectivity(params, up, probe_grid).reflectivity(), spin.sigma)
    return r_down, r_up


def reflection_dips(spectrum: Spectrum, min_depth: float = 1e-3) -> List[Dip]:
    """
    Local minima of a reflectivity spectrum, deepest first.

    Depth is the prominence of the minimum, width its full width at half
    prominence (rad/s, linear interpolation between grid points).
    """
    values = spectrum.reflectivity().amplitude.astype(float)
    grid = spectrum.probe_detunings
    peaks, props = find_peaks(-values, prominence=min_depth)
    if peaks.size == 0:
        return []
    widths = peak_widths(-values, peaks, rel_height=0.5, prominence_data=(
        props["prominences"], props["left_bases"], props["right_bases"]))
    index = np.arange(grid.size)
    left = np.interp(widths[2], index, grid)
    right = np.interp(widths[3], index, grid)

    dips = [
        Dip(detuning=float(grid[p]), reflectivity=float(values[p]),
            depth=float(prom), width=float(r - l))
        for p, prom, l, r in zip(peaks, props["prominences"], left, right)
    ]
    return sorted(dips, key=lambda d: d.depth, reverse=True)


# ==========================================
# CONTRAST
# ==========================================

def _contrast_at(r_down: float, r_up: float) -> Optional[float]:
    total = r_down + r_up
    if total < DEGENERATE_SUM:
        return None
    return abs(r_down - r_up) / total


def _contrast_row(params: SystemParams, spin: SpinConfig, cavity_detuning: float,
                  probe_offsets: np.ndarray, policy: ProbePolicy) -> ContrastRow:
    point = params.replace(delta_ca=float(cavity_detuning))
    down_line, _ = spin_line_detunings(point, spin)
    r_down, r_up = spin_spectra(point, spin, probe_offsets + down_line)
    rd = r_down.amplitude
    ru = r_up.amplitude

    if policy.mode == "fixed":
        d = float(np.interp(policy.offset, probe_offsets, rd))
        u = float(np.interp(policy.offset, probe_offsets, ru))
        contrast = _contrast_at(d, u)
        if contrast is None:
            return ContrastRow(cavity_detuning, policy.offset, None, None, d, u)
        return ContrastRow(cavity_detuning, policy.offset, min(contrast, 1.0), abs(d - u), d, u)

    total = rd + ru
    valid = total >= DEGENERATE_SUM
    if not np.any(valid):
        logger.warning(f"No usable probe at cavity detuning {cavity_detuning:.4e} rad/s (R↓+R↑ ≈ 0)")
        return ContrastRow(cavity_detuning, None, None, None, None, None)
    contrast = np.full(total.shape, -1.0)
    contrast[valid] = np.abs(rd[valid] - ru[valid]) / total[valid]
    best = int(np.argmax(contrast))
    return ContrastRow(
        cavity_detuning=cavity_detuning,
        probe=float(probe_offsets[best]),
        contrast=min(float(contrast[best]), 1.0),
        difference=float(abs(rd[best] - ru[best])),
        r_down=float(rd[best]),
        r_up=float(ru[best]),
    )


def contrast_curve(params: SystemParams, spin: SpinConfig, cavity_detuning_grid: Sequence[float],
                   probe_offsets, probe_policy: ProbePolicy = None,
                   max_workers: Optional[int] = None) -> List[ContrastRow]:
    """
    Spin contrast |R↓−R↑|/(R↓+R↑) against cavity-emitter detuning.

    For every δ_ca on the grid the spectra are evaluated on ``probe_offsets``
    (probe minus spin-down line, uniform). With the "optimize" policy the probe
    maximizing the contrast is kept (first on ties); "fixed" reads both spectra
    at policy.offset. Candidates with R↓ + R↑ < 1e-12 are skipped.

    Returns:
        list[ContrastRow] in grid order; ``difference`` is |R↓−R↑| at the
        chosen probe, i.e. (R↓+R↑)·contrast
    """
    detunings = [float(d) for d in cavity_detuning_grid]
    if not detunings:
        raise ParameterError("cavity detuning grid is empty")
    offsets = np.asarray(probe_offsets, dtype=float)
    if offsets.ndim != 1 or offsets.size < 2:
        raise ParameterError("probe window needs at least two points")
    policy = probe_policy or ProbePolicy()

    outcomes = ordered_map(lambda d: _contrast_row(params, spin, d, offsets, policy),
                           detunings, max_workers=max_workers, label="cavity detuning")
    failed = [o for o in outcomes if not o.ok]
    if failed:
        raise failed[0].error
    return [o.value for o in outcomes]


def contrast_window(rows: Sequence[ContrastRow], fraction: float = 0.5) -> ContrastWindow:
    """
    Contiguous detuning span around the optimal contrast where contrast ≥ fraction·optimum.

    A wide window means the spin readout tolerates cavity-emitter detuning drift.
    """
    if not 0.0 < fraction <= 1.0:
        raise ParameterError(f"fraction must lie in (0, 1], got {fraction!r}")
    usable = [r for r in rows if r.contrast is not None]
    if not usable:
        raise UndefinedQuantityError("no contrast values to build a window from")

    values = np.array([r.contrast for r in usable])
    best = int(np.argmax(values))
    threshold = fraction * values[best]
    lo = best
    while lo > 0 and values[lo - 1] >= threshold:
        lo -= 1
    hi = best
    while hi < values.size - 1 and values[hi + 1] >= threshold:
        hi += 1
    return ContrastWindow(
        optimum_detuning=usable[best].cavity_detuning,
        optimum=float(values[best]),
        lower=usable[lo].cavity_detuning,
        upper=usable[hi].cavity_detuning,
        fraction=fraction,
    )

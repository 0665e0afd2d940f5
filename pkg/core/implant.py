"""
Coupling statistics over an implantation-uncertainty disk.

An emitter aimed at the dielectric g-maximum lands anywhere in a lateral disk
of diameter D. Every dielectric voxel whose centre lies in the disk is a
sample, weighted by its lateral area dx·dy (no partial-voxel weighting; depth
is not varied). Percentiles interpolate linearly between weighted order
statistics placed at the centres of their cumulative weight.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core.exceptions import ParameterError, RegionError, UndefinedQuantityError
from core.fieldgrid import ScalarField
from core.log_decorators import log_timed
from core.logger_config import get_logger
from core.parallel import ordered_map

logger = get_logger(__name__)

PLANE_MAX_DEPTH = "max-depth"
PLANE_PROJECTION = "projection"
SUMMARY_PERCENTILES = (25.0, 40.0, 50.0, 60.0, 75.0)
WHISKER_IQR = 1.5

Plane = Union[str, int]


@dataclass(frozen=True)
class ImplantRegion:
    """
    Disk of diameter D (m) in a lateral plane.

    ``center`` is a voxel index (i, j) or (i, j, k); None means the dielectric
    g-maximum. ``plane`` is "max-depth" (depth of the centre), a depth index,
    or "projection" (per-column maximum over dielectric voxels).
    """
    diameter: float
    center: Optional[Tuple[int, ...]] = None
    plane: Plane = PLANE_MAX_DEPTH

    def __post_init__(self):
        if not self.diameter >= 0:
            raise ParameterError(f"implantation diameter must be >= 0, got {self.diameter!r}")
        if isinstance(self.plane, str) and self.plane not in (PLANE_MAX_DEPTH, PLANE_PROJECTION):
            raise ParameterError(f"plane must be {PLANE_MAX_DEPTH!r}, {PLANE_PROJECTION!r} or a depth index")
        if self.center is not None and len(self.center) not in (2, 3):
            raise ParameterError(f"center must be a 2- or 3-component voxel index, got {self.center!r}")


@dataclass(frozen=True)
class GSummary:
    median: float
    p25: float
    p40: float
    p60: float
    p75: float
    min: float
    max: float
    n_samples: int


@dataclass(frozen=True)
class GDistribution:
    """Weighted g samples (rad/s) in grid order"""
    values: np.ndarray
    weights: np.ndarray
    diameter: float
    center: Tuple[int, int, int]

    def __post_init__(self):
        if self.values.shape != self.weights.shape or self.values.ndim != 1:
            raise ParameterError("values and weights must be matching 1-D arrays")
        if np.any(self.weights < 0):
            raise ParameterError("weights must be >= 0")

    @property
    def summary(self) -> GSummary:
        p25, p40, p50, p60, p75 = percentile_stats(self, SUMMARY_PERCENTILES)
        support = self.values[self.weights > 0]
        return GSummary(median=p50, p25=p25, p40=p40, p60=p60, p75=p75,
                        min=float(support.min()), max=float(support.max()),
                        n_samples=int(support.size))


@dataclass(frozen=True)
class ViolinTable:
    bin_centers: np.ndarray
    density: np.ndarray
    bin_width: float
    p25: float
    median: float
    p75: float
    whisker_low: float
    whisker_high: float
    min: float
    max: float


@dataclass(frozen=True)
class MedianRow:
    diameter: float
    median: float
    p40: float
    p60: float
    n_voxels: int


# ==========================================
# WEIGHTED STATISTICS
# ==========================================

def weighted_percentile(values, weights, percentiles) -> np.ndarray:
    """
    Weighted percentiles with linear interpolation.

    Samples are sorted stably (ties keep input order); sample k sits at the
    centre of its cumulative weight, rescaled so the smallest sample is the
    0th and the largest the 100th percentile. With equal weights this is
    numpy's default linear percentile.

    Args:
        values: Samples
        weights: Non-negative weights, positive sum
        percentiles: Percentiles in [0, 100]

    Returns:
        np.ndarray of interpolated values
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    ps = np.atleast_1d(np.asarray(percentiles, dtype=float))
    if np.any((ps < 0) | (ps > 100)):
        raise ParameterError(f"percentiles must lie in [0, 100], got {ps.tolist()}")

    keep = weights > 0
    values = values[keep]
    weights = weights[keep]
    if values.size == 0:
        raise UndefinedQuantityError("empty distribution")
    if values.size == 1:
        return np.full(ps.shape, values[0])

    order = np.argsort(values, kind="stable")
    values = values[order]
    weights = weights[order]
    position = np.cumsum(weights) - 0.5 * weights
    position = (position - position[0]) / (position[-1] - position[0])
    return np.interp(ps / 100.0, position, values)


def percentile_stats(dist: GDistribution, ps: Sequence[float]) -> List[float]:
    """Weighted percentiles of a g distribution (rad/s)"""
    return [float(v) for v in weighted_percentile(dist.values, dist.weights, ps)]


def mass_below(dist: GDistribution, value: float) -> float:
    """Weighted fraction of samples strictly below ``value``"""
    total = float(dist.weights.sum())
    if not total > 0:
        raise UndefinedQuantityError("empty distribution")
    return float(dist.weights[dist.values < value].sum()) / total


def violin_export(dist: GDistribution, n_bins: int = 40) -> ViolinTable:
    """
    Normalized histogram density over [min, max] plus box-and-whisker fields.

    Whiskers reach 1.5·IQR beyond the quartiles, clipped to the data range.
    A single-valued distribution puts all density in one narrow bin.
    """
    if n_bins < 2:
        raise ParameterError(f"n_bins must be >= 2, got {n_bins!r}")
    summary = dist.summary
    lo, hi = summary.min, summary.max
    if hi == lo:
        half = max(abs(lo) * 1e-9, 1e-12)
        lo, hi = lo - half, hi + half

    density, edges = np.histogram(dist.values, bins=n_bins, range=(lo, hi),
                                  weights=dist.weights, density=True)
    iqr = summary.p75 - summary.p25
    return ViolinTable(
        bin_centers=0.5 * (edges[:-1] + edges[1:]),
        density=density,
        bin_width=float(edges[1] - edges[0]),
        p25=summary.p25,
        median=summary.median,
        p75=summary.p75,
        whisker_low=max(summary.min, summary.p25 - WHISKER_IQR * iqr),
        whisker_high=min(summary.max, summary.p75 + WHISKER_IQR * iqr),
        min=summary.min,
        max=summary.max,
    )


# ==========================================
# REGIONS
# ==========================================

def _first_argmax(values: np.ndarray) -> Tuple[int, ...]:
    flat = int(np.argmax(values.ravel(order="F")))
    return tuple(int(i) for i in np.unravel_index(flat, values.shape, order="F"))


def locate_center(gmap: ScalarField) -> Tuple[int, int, int]:
    """Voxel of the largest g inside the dielectric (first in x-fastest order on ties)"""
    if not np.any(gmap.dielectric_mask):
        raise RegionError("g-map has no dielectric voxels")
    return _first_argmax(np.where(gmap.dielectric_mask, gmap.values, -1.0))


def lateral_plane(gmap: ScalarField, plane: Plane = PLANE_MAX_DEPTH,
                  center: Optional[Tuple[int, ...]] = None) -> Tuple[np.ndarray, np.ndarray, Tuple[int, int, int]]:
    """
    Select the lateral (x, y) slice the disk lives in.

    Returns:
        (values, mask, center) with 2-D values and mask and the 3-D centre
        index; for "projection" the centre depth is that of its column maximum
    """
    mask = gmap.dielectric_mask
    nz = gmap.shape[2]

    if plane == PLANE_PROJECTION:
        masked = np.where(mask, gmap.values, -1.0)
        values = np.clip(masked.max(axis=2), 0.0, None)
        plane_mask = mask.any(axis=2)
        if center is None:
            if not np.any(plane_mask):
                raise RegionError("g-map has no dielectric voxels")
            i, j = _first_argmax(np.where(plane_mask, values, -1.0))
        else:
            i, j = (int(c) for c in center[:2])
            if not (0 <= i < gmap.shape[0] and 0 <= j < gmap.shape[1]):
                raise RegionError(f"center {tuple(center)} outside the grid {gmap.shape}")
        return values, plane_mask, (int(i), int(j), int(np.argmax(masked[i, j])))

    if isinstance(plane, str):
        if center is None:
            full = locate_center(gmap)
        elif len(center) == 3:
            full = tuple(center)
        else:
            full = (center[0], center[1], locate_center(gmap)[2])
    else:
        k = int(plane)
        if not 0 <= k < nz:
            raise RegionError(f"depth index {k} outside 0..{nz - 1}")
        if center is None:
            plane_mask = mask[:, :, k]
            if not np.any(plane_mask):
                raise RegionError(f"plane {k} has no dielectric voxels")
            i, j = _first_argmax(np.where(plane_mask, gmap.values[:, :, k], -1.0))
            full = (i, j, k)
        else:
            full = (center[0], center[1], k)

    i, j, k = (int(c) for c in full)
    if not (0 <= i < gmap.shape[0] and 0 <= j < gmap.shape[1] and 0 <= k < nz):
        raise RegionError(f"center {full} outside the grid {gmap.shape}")
    return gmap.values[:, :, k], mask[:, :, k], (i, j, k)


def implant_distribution(gmap: ScalarField, region: ImplantRegion) -> GDistribution:
    """
    g samples over the dielectric voxels of a lateral disk.

    Raises:
        RegionError: centre outside the dielectric or outside the grid
    """
    values, mask, center = lateral_plane(gmap, region.plane, region.center)
    i0, j0, _ = center
    if not mask[i0, j0]:
        raise RegionError(f"implant center {center} is not in the dielectric")

    x, y, _ = gmap.axes()
    dx, dy, _ = gmap.spacing
    X, Y = np.meshgrid(x - x[i0], y - y[j0], indexing="ij")
    radius = 0.5 * region.diameter
    inside = (X ** 2 + Y ** 2 <= radius ** 2) & mask

    selected = inside.ravel(order="F")
    samples = values.ravel(order="F")[selected]
    if samples.size == 0:
        raise RegionError("implantation region is empty after hole exclusion")
    weights = np.full(samples.shape, dx * dy)
    logger.debug(f"Implant disk D={region.diameter:.3e} m at {center}: {samples.size} voxels")
    return GDistribution(values=samples, weights=weights, diameter=region.diameter, center=center)


@log_timed
def median_vs_D_curve(gmap: ScalarField, diameters: Sequence[float],
                      center: Optional[Tuple[int, ...]] = None, plane: Plane = PLANE_MAX_DEPTH,
                      max_workers: Optional[int] = None) -> List[MedianRow]:
    """Median and 40th-60th percentile band of g for each implantation diameter"""
    diameters = [float(d) for d in diameters]
    if not diameters:
        raise ParameterError("diameter list is empty")

    def one(diameter):
        dist = implant_distribution(gmap, ImplantRegion(diameter=diameter, center=center, plane=plane))
        p40, median, p60 = percentile_stats(dist, (40.0, 50.0, 60.0))
        return MedianRow(diameter=diameter, median=median, p40=p40, p60=p60, n_voxels=int(dist.values.size))

    outcomes = ordered_map(one, diameters, max_workers=max_workers, label="implant diameter")
    failed = [o for o in outcomes if not o.ok]
    if failed:
        raise failed[0].error
    return [o.value for o in outcomes]

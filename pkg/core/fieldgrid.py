"""
Electromagnetic field grids: storage, mode volume, coupling maps.

Grids are voxel-centred: voxel (i, j, k) sits at origin + (i·dx, j·dy, k·dz).
Mode volume is the midpoint Riemann sum

    V = Σ ε|E|² dV / max(ε|E|²)

and the coupling map is g(r) = ξ·|μ̂·E(r)|/|E_max| · μ√(ω/(2ε₀ħV)) with
|E_max| the largest field magnitude on the grid.

File formats
- .fgrd: little-endian header '<4sH3I8d' (magic FGRD, version, nx ny nz,
  dx dy dz, origin xyz, wavelength, n_ref), eps as float64, then six float64
  per voxel (Ex re/im, Ey re/im, Ez re/im); voxels x-fastest.
- .csv: '# dx=.. dy=.. dz=.. wavelength=.. n_ref=..' metadata line, header
  x,y,z,eps,Ex_re,Ex_im,Ey_re,Ey_im,Ez_re,Ez_im, one row per voxel x-fastest.
"""
import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

import config
from core.exceptions import GridFormatError, ParameterError, RegionError, UndefinedQuantityError
from core.figures_of_merit import DipoleSpec, g_from_mode_volume
from core.log_decorators import log_timed
from core.logger_config import get_logger

logger = get_logger(__name__)

MAGIC = b"FGRD"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sH3I8d")
DIELECTRIC_THRESHOLD = 1.0 + 1e-6
EPS_FLOOR = 1.0 - 1e-9
CSV_COLUMNS = ["x", "y", "z", "eps", "Ex_re", "Ex_im", "Ey_re", "Ey_im", "Ez_re", "Ez_im"]
METADATA_KEYS = ("dx", "dy", "dz", "wavelength", "n_ref")


@dataclass(frozen=True)
class FieldGrid:
    """
    Permittivity and complex E-field on a regular voxel grid.

    eps has shape (nx, ny, nz); efield (nx, ny, nz, 3). Lengths in metres,
    field in arbitrary linear units.
    """
    eps: np.ndarray
    efield: np.ndarray
    spacing: Tuple[float, float, float]
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    wavelength: float = config.DEFAULT_WAVELENGTH_NM * 1e-9
    refractive_index: float = config.DEFAULT_REFRACTIVE_INDEX

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        efield = np.asarray(self.efield, dtype=complex)
        if eps.ndim != 3 or efield.shape != eps.shape + (3,):
            raise ParameterError(f"eps {eps.shape} and efield {efield.shape} do not describe one 3-D grid")
        if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(efield))):
            raise ParameterError("field grid has non-finite entries")
        if np.any(eps < EPS_FLOOR):
            raise ParameterError(f"relative permittivity below 1 (min {float(eps.min())!r})")
        if len(self.spacing) != 3 or any(not d > 0 for d in self.spacing):
            raise ParameterError(f"grid spacings must be positive, got {self.spacing!r}")
        if not (self.wavelength > 0 and self.refractive_index > 0):
            raise ParameterError("wavelength and refractive index must be positive")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "efield", efield)
        object.__setattr__(self, "spacing", tuple(float(d) for d in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.eps.shape

    @property
    def voxel_volume(self) -> float:
        dx, dy, dz = self.spacing
        return dx * dy * dz

    @property
    def dielectric_mask(self) -> np.ndarray:
        return self.eps > DIELECTRIC_THRESHOLD

    def axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Voxel-centre coordinates along x, y, z"""
        return tuple(o + d * np.arange(n) for o, d, n in zip(self.origin, self.spacing, self.shape))

    def field_magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.efield) ** 2, axis=-1))

    def energy_density(self) -> np.ndarray:
        """ε|E|² per voxel"""
        return self.eps * np.sum(np.abs(self.efield) ** 2, axis=-1)


@dataclass(frozen=True)
class ScalarField:
    """Real per-voxel values (g-maps in rad/s) with the dielectric mask of their grid"""
    values: np.ndarray
    dielectric_mask: np.ndarray
    spacing: Tuple[float, float, float]
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.values.shape != self.dielectric_mask.shape or self.values.ndim != 3:
            raise ParameterError("values and mask must share one 3-D shape")
        if np.any(self.values < 0):
            raise ParameterError("scalar field values must be >= 0")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.values.shape

    def axes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(o + d * np.arange(n) for o, d, n in zip(self.origin, self.spacing, self.shape))


@dataclass(frozen=True)
class ModeVolume:
    volume_m3: float
    volume_normalized: float
    argmax: Tuple[int, int, int]
    argmax_position: Tuple[float, float, float]
    max_energy_density: float


@dataclass(frozen=True)
class SynthSpec:
    """
    Analytic stand-in for a photonic-crystal nanobeam mode.

    The beam is a box of beam_width (y) by beam_thickness (z) along x. With
    holes on, air holes are centred at x = (m + ½)·a; each spans
    |x − (m + ½)a| < a/2 − bridge_half_width and |y| < hole_half_width, so
    dielectric bridges of width 2·bridge_half_width remain at x = m·a.
    """
    shape: Tuple[int, int, int] = (81, 61, 41)
    spacing: Tuple[float, float, float] = (10e-9, 10e-9, 10e-9)
    lattice_period: float = 250e-9
    envelope_sigma: Optional[float] = 300e-9
    beam_width: float = 400e-9
    beam_thickness: float = 200e-9
    holes: bool = True
    bridge_half_width: float = 40e-9
    hole_half_width: float = 150e-9
    eps_dielectric: float = config.DEFAULT_REFRACTIVE_INDEX ** 2
    wavelength: float = config.DEFAULT_WAVELENGTH_NM * 1e-9
    refractive_index: float = config.DEFAULT_REFRACTIVE_INDEX

    def __post_init__(self):
        if len(self.shape) != 3 or any(int(n) != n or n < 1 or n % 2 == 0 for n in self.shape):
            raise ParameterError(f"synthetic grid needs odd positive dimensions, got {self.shape!r}")
        if len(self.spacing) != 3 or any(not d > 0 for d in self.spacing):
            raise ParameterError("synthetic grid spacings must be positive")
        for name in ("lattice_period", "beam_width", "beam_thickness", "wavelength", "refractive_index"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.envelope_sigma is not None and not self.envelope_sigma > 0:
            raise ParameterError("envelope_sigma must be positive (or None for no envelope)")
        if not self.eps_dielectric > DIELECTRIC_THRESHOLD:
            raise ParameterError("eps_dielectric must exceed 1")
        if self.holes:
            if not 0 < self.bridge_half_width < 0.5 * self.lattice_period:
                raise ParameterError("bridge_half_width must lie in (0, a/2)")
            if not self.hole_half_width > 0:
                raise ParameterError("hole_half_width must be positive")


# ==========================================
# MODE VOLUME AND COUPLING
# ==========================================

def _first_argmax(values: np.ndarray) -> Tuple[int, int, int]:
    # ties resolve to the first voxel in file (x-fastest) order
    flat = int(np.argmax(values.ravel(order="F")))
    return tuple(int(i) for i in np.unravel_index(flat, values.shape, order="F"))


@log_timed
def mode_volume(grid: FieldGrid) -> ModeVolume:
    """
    Mode volume V = Σ ε|E|² dV / max(ε|E|²).

    Returns:
        ModeVolume in m³ and in (λ/n)³, with the voxel holding the maximum
    """
    density = grid.energy_density()
    peak = float(density.max())
    if not peak > 0:
        raise UndefinedQuantityError("zero field: mode volume undefined")

    # pairwise summation over the flattened grid
    total = float(np.sum(density.ravel()))
    volume = (total / peak) * grid.voxel_volume
    index = _first_argmax(density)
    position = tuple(float(ax[i]) for ax, i in zip(grid.axes(), index))
    normalized = volume / (grid.wavelength / grid.refractive_index) ** 3

    logger.debug(f"Mode volume {volume:.4e} m³ = {normalized:.4f} (λ/n)³ at voxel {index}")
    return ModeVolume(volume_m3=volume, volume_normalized=normalized, argmax=index,
                      argmax_position=position, max_energy_density=peak)


def field_maximum_in_dielectric(grid: FieldGrid) -> Tuple[Tuple[int, int, int], float]:
    """Voxel and value of the largest |E| among dielectric voxels"""
    mask = grid.dielectric_mask
    if not np.any(mask):
        raise RegionError("grid has no dielectric voxels")
    magnitude = np.where(mask, grid.field_magnitude(), -1.0)
    index = _first_argmax(magnitude)
    return index, float(magnitude[index])


def _projected_field(grid: FieldGrid, dipole: DipoleSpec) -> np.ndarray:
    if dipole.orientation == "aligned":
        return grid.field_magnitude()
    axis = np.asarray(dipole.axis, dtype=float)
    return np.abs(grid.efield @ axis)


@log_timed
def g_field(grid: FieldGrid, dipole: DipoleSpec, omega: float) -> ScalarField:
    """
    Coupling map g(r) in rad/s.

    Args:
        grid: Field grid
        dipole: Emitter dipole; "aligned" uses |E(r)|, "fixed" uses |axis·E(r)|
        omega: Emitter angular frequency (rad/s)

    Returns:
        ScalarField with g per voxel and the dielectric mask
    """
    mv = mode_volume(grid)
    g_peak = g_from_mode_volume(mv.volume_m3, dipole, omega)
    e_max = float(grid.field_magnitude().max())
    values = g_peak * _projected_field(grid, dipole) / e_max
    return ScalarField(values=values, dielectric_mask=grid.dielectric_mask,
                       spacing=grid.spacing, origin=grid.origin)


# ==========================================
# SYNTHETIC MODES
# ==========================================

def synth_mode(spec: SynthSpec) -> FieldGrid:
    """
    Deterministic nanobeam-like test mode.

    E = ŷ·cos(πx/a)·exp(−(x²+y²+z²)/(2σ²)) in the dielectric and the same
    profile divided by eps_dielectric at air voxels. σ = None drops the
    envelope. The grid is centred on the origin.
    """
    origin = tuple(-0.5 * (n - 1) * d for n, d in zip(spec.shape, spec.spacing))
    x, y, z = (o + d * np.arange(n) for o, d, n in zip(origin, spec.spacing, spec.shape))
    X, Y, Z = np.meshgrid(x, y, z, indexing="ij")

    inside = (np.abs(Y) <= 0.5 * spec.beam_width) & (np.abs(Z) <= 0.5 * spec.beam_thickness)
    if spec.holes:
        a = spec.lattice_period
        offset = X - (np.floor(X / a) + 0.5) * a
        in_hole = (np.abs(offset) < 0.5 * a - spec.bridge_half_width) & (np.abs(Y) < spec.hole_half_width)
        inside &= ~in_hole
    if not np.any(inside):
        raise ParameterError("synthetic mask excludes the entire grid")

    profile = np.cos(np.pi * X / spec.lattice_period)
    if spec.envelope_sigma is not None:
        profile = profile * np.exp(-(X ** 2 + Y ** 2 + Z ** 2) / (2.0 * spec.envelope_sigma ** 2))

    eps = np.where(inside, spec.eps_dielectric, 1.0)
    efield = np.zeros(spec.shape + (3,), dtype=complex)
    efield[..., 1] = np.where(inside, profile, profile / spec.eps_dielectric)
    return FieldGrid(eps=eps, efield=efield, spacing=spec.spacing, origin=origin,
                     wavelength=spec.wavelength, refractive_index=spec.refractive_index)


# ==========================================
# FILE I/O
# ==========================================

def _voxel_rows(efield: np.ndarray) -> np.ndarray:
    # (voxels x-fastest, 6) as Ex_re, Ex_im, Ey_re, Ey_im, Ez_re, Ez_im
    parts = np.stack([efield.real, efield.imag], axis=-1).reshape(efield.shape[:3] + (6,))
    return parts.transpose(2, 1, 0, 3).reshape(-1, 6)


def _efield_from_rows(rows: np.ndarray, shape: Tuple[int, int, int]) -> np.ndarray:
    nx, ny, nz = shape
    parts = rows.reshape(nz, ny, nx, 6).transpose(2, 1, 0, 3)
    efield = np.empty(shape + (3,), dtype=complex)
    efield.real = parts[..., 0::2]
    efield.imag = parts[..., 1::2]
    return efield


def _save_binary(grid: FieldGrid, path: Path) -> None:
    header = HEADER.pack(MAGIC, FORMAT_VERSION, *grid.shape, *grid.spacing, *grid.origin,
                         grid.wavelength, grid.refractive_index)
    with open(path, "wb") as f:
        f.write(header)
        f.write(grid.eps.ravel(order="F").astype("<f8").tobytes())
        f.write(_voxel_rows(grid.efield).astype("<f8").tobytes())


def _load_binary(path: Path) -> FieldGrid:
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise GridFormatError(f"{path}: header needs {HEADER.size} bytes, found {len(data)}")
    magic, version, nx, ny, nz, dx, dy, dz, ox, oy, oz, wavelength, n_ref = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise GridFormatError(f"{path}: unsupported format version {version}")
    if min(nx, ny, nz) < 1:
        raise GridFormatError(f"{path}: empty grid dimensions {(nx, ny, nz)}")

    voxels = nx * ny * nz
    expected = HEADER.size + 8 * voxels + 48 * voxels
    if len(data) != expected:
        raise GridFormatError(f"{path}: payload size mismatch, expected {expected} bytes, found {len(data)}")

    eps = np.frombuffer(data, dtype="<f8", count=voxels, offset=HEADER.size)
    rows = np.frombuffer(data, dtype="<f8", count=6 * voxels, offset=HEADER.size + 8 * voxels)
    if not (np.all(np.isfinite(eps)) and np.all(np.isfinite(rows))):
        raise GridFormatError(f"{path}: non-finite values in payload")
    meta = np.array([dx, dy, dz, ox, oy, oz, wavelength, n_ref])
    if not np.all(np.isfinite(meta)):
        raise GridFormatError(f"{path}: non-finite values in header")

    shape = (nx, ny, nz)
    return _build_grid(path, eps.reshape(shape, order="F").astype(float), _efield_from_rows(rows, shape),
                       (dx, dy, dz), (ox, oy, oz), wavelength, n_ref)


def _build_grid(path, eps, efield, spacing, origin, wavelength, n_ref) -> FieldGrid:
    try:
        return FieldGrid(eps=eps, efield=efield, spacing=spacing, origin=origin,
                         wavelength=wavelength, refractive_index=n_ref)
    except ParameterError as e:
        raise GridFormatError(f"{path}: {e}") from e


def _save_csv(grid: FieldGrid, path: Path) -> None:
    x, y, z = grid.axes()
    X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
    coords = [c.ravel(order="F") for c in (X, Y, Z)]
    eps = grid.eps.ravel(order="F")
    rows = _voxel_rows(grid.efield)
    meta = dict(zip(METADATA_KEYS, (*grid.spacing, grid.wavelength, grid.refractive_index)))

    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write("# " + " ".join(f"{k}={v!r}" for k, v in meta.items()) + "\n")
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for k in range(eps.size):
            writer.writerow([repr(float(coords[0][k])), repr(float(coords[1][k])), repr(float(coords[2][k])),
                             repr(float(eps[k]))] + [repr(float(v)) for v in rows[k]])


def _parse_metadata(path: Path, line: str) -> dict:
    if not line.startswith("#"):
        raise GridFormatError(f"{path}: missing '# dx=.. dy=.. dz=.. wavelength=.. n_ref=..' metadata line")
    meta = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise GridFormatError(f"{path}: malformed metadata token {token!r}")
        try:
            meta[key] = float(value)
        except ValueError as e:
            raise GridFormatError(f"{path}: metadata {key} is not a number: {value!r}") from e
    missing = [k for k in METADATA_KEYS if k not in meta]
    if missing:
        raise GridFormatError(f"{path}: metadata lacks {', '.join(missing)}")
    return meta


def _load_csv(path: Path) -> FieldGrid:
    with open(path, newline="", encoding="utf-8") as f:
        meta = _parse_metadata(path, f.readline())
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise GridFormatError(f"{path}: header {header!r} != {CSV_COLUMNS!r}")
        try:
            table = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        except ValueError as e:
            raise GridFormatError(f"{path}: non-numeric entry ({e})") from e

    if table.ndim != 2 or table.shape[0] == 0 or table.shape[1] != len(CSV_COLUMNS):
        raise GridFormatError(f"{path}: expected rows of {len(CSV_COLUMNS)} columns")
    if not np.all(np.isfinite(table)):
        raise GridFormatError(f"{path}: non-finite values")

    spacing = (meta["dx"], meta["dy"], meta["dz"])
    origin = tuple(float(table[0, c]) for c in range(3))
    shape = tuple(len(np.unique(table[:, c])) for c in range(3))
    if shape[0] * shape[1] * shape[2] != table.shape[0]:
        raise GridFormatError(f"{path}: {table.shape[0]} rows do not fill a {shape} grid")

    index = np.rint((table[:, :3] - np.array(origin)) / np.array(spacing)).astype(int)
    expected = np.stack(np.unravel_index(np.arange(table.shape[0]), shape, order="F"), axis=1)
    if not np.array_equal(index, expected):
        raise GridFormatError(f"{path}: voxels must be listed x-fastest on a regular grid")

    eps = table[:, 3].reshape(shape, order="F")
    efield = _efield_from_rows(np.ascontiguousarray(table[:, 4:]), shape)
    return _build_grid(path, eps, efield, spacing, origin, meta["wavelength"], meta["n_ref"])


def save_grid(grid: FieldGrid, path) -> Path:
    """Write a grid as .fgrd (binary) or .csv depending on the suffix"""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".fgrd":
        _save_binary(grid, path)
    elif suffix == ".csv":
        _save_csv(grid, path)
    else:
        raise GridFormatError(f"{path}: unknown grid format {suffix!r} (use .fgrd or .csv)")
    logger.info(f"Saved {grid.shape} field grid to {path}")
    return path


def load_grid(path) -> FieldGrid:
    """Read a .fgrd or .csv field grid"""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".fgrd":
        grid = _load_binary(path)
    elif suffix == ".csv":
        grid = _load_csv(path)
    else:
        raise GridFormatError(f"{path}: unknown grid format {suffix!r} (use .fgrd or .csv)")
    logger.info(f"Loaded {grid.shape} field grid from {path}")
    return grid

#!/usr/bin/env python3
"""
Unit tests for field grids: mode volume, g-maps, synthetic modes and grid files.
"""
import math
import struct

import numpy as np
import pytest

from core.config_utils import debye_to_coulomb_metre, omega_from_wavelength
from core.exceptions import GridFormatError, ParameterError, RegionError, UndefinedQuantityError
from core.fieldgrid import (
    HEADER,
    FieldGrid,
    SynthSpec,
    field_maximum_in_dielectric,
    g_field,
    load_grid,
    mode_volume,
    save_grid,
    synth_mode,
)
from core.figures_of_merit import DipoleSpec, g_from_mode_volume

OMEGA = omega_from_wavelength(737e-9)
DIPOLE = DipoleSpec(mu=debye_to_coulomb_metre(2.31))


def _full_beam(**overrides):
    # dielectric everywhere, no holes
    settings = dict(holes=False, beam_width=1e-5, beam_thickness=1e-5)
    settings.update(overrides)
    return SynthSpec(**settings)


def test_mode_volume_of_standing_wave_matches_closed_form():
    """cos²(πx/a) without envelope: Σ cos² is a Dirichlet sum"""
    print("=" * 70)
    print("TEST: Mode volume, closed form")
    print("=" * 70)

    spec = _full_beam(shape=(81, 11, 11), envelope_sigma=None)
    grid = synth_mode(spec)
    mv = mode_volume(grid)

    nx, ny, nz = spec.shape
    dx = spec.spacing[0]
    a = spec.lattice_period
    dirichlet = 0.5 * nx + 0.5 * math.sin(nx * math.pi * dx / a) / math.sin(math.pi * dx / a)
    expected = ny * nz * grid.voxel_volume * dirichlet
    print(f"[OK] V = {mv.volume_m3:.6e} m³, expected {expected:.6e}")
    assert mv.volume_m3 == pytest.approx(expected, rel=1e-12)
    # maxima tie across y and z; the first in x-fastest order wins
    assert mv.argmax[1:] == (0, 0)
    assert grid.energy_density()[mv.argmax] == mv.max_energy_density
    assert mv.max_energy_density == pytest.approx(spec.eps_dielectric)

    # uniform ε cancels
    other = synth_mode(_full_beam(shape=(81, 11, 11), envelope_sigma=None, eps_dielectric=12.0))
    assert mode_volume(other).volume_m3 == pytest.approx(mv.volume_m3, rel=1e-12)

    print("[PASS] Closed form OK\n")


def test_gaussian_mode_volume_matches_continuum_integral():
    sigma, a = 60e-9, 200e-9
    spec = _full_beam(shape=(81, 41, 41), lattice_period=a, envelope_sigma=sigma)
    mv = mode_volume(synth_mode(spec))

    along_x = 0.5 * math.sqrt(math.pi) * sigma * (1.0 + math.exp(-(math.pi * sigma / a) ** 2))
    expected = along_x * (math.sqrt(math.pi) * sigma) ** 2
    assert mv.volume_m3 == pytest.approx(expected, rel=0.01)
    assert mv.volume_normalized == pytest.approx(mv.volume_m3 / (737e-9 / 2.4) ** 3)


def test_mode_volume_scales_with_voxel_volume():
    base = synth_mode(_full_beam(shape=(21, 11, 11), envelope_sigma=80e-9))
    stretched = FieldGrid(eps=base.eps, efield=base.efield,
                          spacing=tuple(2.0 * d for d in base.spacing))
    assert mode_volume(stretched).volume_m3 == pytest.approx(8.0 * mode_volume(base).volume_m3, rel=1e-12)


def test_zero_field_has_no_mode_volume():
    grid = FieldGrid(eps=np.ones((3, 3, 3)), efield=np.zeros((3, 3, 3, 3)), spacing=(1e-8, 1e-8, 1e-8))
    with pytest.raises(UndefinedQuantityError):
        mode_volume(grid)


def test_field_grid_validation():
    with pytest.raises(ParameterError):
        FieldGrid(eps=np.full((2, 2, 2), 0.5), efield=np.zeros((2, 2, 2, 3)), spacing=(1.0, 1.0, 1.0))
    with pytest.raises(ParameterError):
        FieldGrid(eps=np.ones((2, 2, 2)), efield=np.zeros((2, 2, 3)), spacing=(1.0, 1.0, 1.0))
    with pytest.raises(ParameterError):
        FieldGrid(eps=np.ones((2, 2, 2)), efield=np.zeros((2, 2, 2, 3)), spacing=(1.0, 0.0, 1.0))
    with pytest.raises(ParameterError):
        SynthSpec(shape=(80, 41, 21))


def test_synthetic_nanobeam_geometry():
    spec = SynthSpec()
    grid = synth_mode(spec)
    nx, ny, nz = spec.shape
    ci, cj, ck = nx // 2, ny // 2, nz // 2
    x, y, z = grid.axes()
    assert x[ci] == pytest.approx(0.0, abs=1e-18)

    mask = grid.dielectric_mask
    # bridge at x = 0, hole centred at x = a/2
    assert mask[ci, cj, ck]
    hole_i = ci + int(round(0.5 * spec.lattice_period / spec.spacing[0]))
    assert not mask[hole_i, cj, ck]
    # outside the beam thickness is air
    assert not mask[ci, cj, 0]

    # air voxels carry the profile divided by ε_d
    assert abs(grid.efield[hole_i, cj, ck, 1]) < abs(grid.efield[ci, cj, ck, 1]) / spec.eps_dielectric + 1e-12
    assert np.all(grid.efield[..., 0] == 0) and np.all(grid.efield[..., 2] == 0)

    index, value = field_maximum_in_dielectric(grid)
    assert index == (ci, cj, ck)
    assert value == pytest.approx(1.0)

    mv = mode_volume(grid)
    assert mv.argmax == (ci, cj, ck)
    assert mv.argmax_position == pytest.approx((0.0, 0.0, 0.0), abs=1e-18)


def test_g_map_peaks_at_the_mode_volume_coupling():
    print("=" * 70)
    print("TEST: g-map")
    print("=" * 70)

    grid = synth_mode(SynthSpec(shape=(41, 21, 11)))
    gmap = g_field(grid, DIPOLE, OMEGA)
    g_peak = g_from_mode_volume(mode_volume(grid).volume_m3, DIPOLE, OMEGA)

    assert gmap.shape == grid.shape
    assert float(gmap.values.max()) == pytest.approx(g_peak, rel=1e-12)
    assert gmap.values[20, 10, 5] == pytest.approx(g_peak, rel=1e-12)
    assert np.array_equal(gmap.dielectric_mask, grid.dielectric_mask)
    print(f"[OK] g_max/2π = {g_peak / (2 * math.pi * 1e9):.3f} GHz")

    # a dipole orthogonal to the field does not couple
    across = DipoleSpec(mu=DIPOLE.mu, orientation="fixed", axis=(1.0, 0.0, 0.0))
    assert np.all(g_field(grid, across, OMEGA).values == 0.0)

    along = DipoleSpec(mu=DIPOLE.mu, orientation="fixed", axis=(0.0, 1.0, 0.0))
    assert np.allclose(g_field(grid, along, OMEGA).values, gmap.values, rtol=1e-12, atol=0.0)

    print("[PASS] g-map OK\n")


def test_mode_volume_and_g_map_ignore_field_amplitude():
    grid = synth_mode(SynthSpec(shape=(41, 21, 11)))
    base_v = mode_volume(grid).volume_m3
    base_g = g_field(grid, DIPOLE, OMEGA).values
    for c in (1e-3, 7.3, 2.5e6, 3.0 * np.exp(0.7j)):
        scaled = FieldGrid(eps=grid.eps, efield=c * grid.efield, spacing=grid.spacing, origin=grid.origin)
        assert abs(mode_volume(scaled).volume_m3 - base_v) <= 1e-12 * base_v
        g = g_field(scaled, DIPOLE, OMEGA).values
        assert float(np.max(np.abs(g - base_g))) <= 1e-12 * float(base_g.max())


def test_narrower_bridges_shrink_the_mode_volume():
    print("=" * 70)
    print("TEST: Bridge-width sweep")
    print("=" * 70)

    volumes = []
    for half_width in (100e-9, 80e-9, 60e-9, 40e-9, 20e-9):
        mv = mode_volume(synth_mode(SynthSpec(shape=(41, 31, 21), bridge_half_width=half_width)))
        volumes.append(mv.volume_normalized)
        print(f"[OK] bridge {2 * half_width * 1e9:5.0f} nm: V = {mv.volume_normalized:.5f} (λ/n)³")
    assert all(b < a for a, b in zip(volumes, volumes[1:]))

    print("[PASS] Bridge sweep OK\n")


def test_single_voxel_and_uniform_field_volumes():
    spacing = (1e-8, 2e-8, 3e-8)
    efield = np.zeros((1, 1, 1, 3), dtype=complex)
    efield[0, 0, 0] = (0.3, 2.0 + 1.0j, -0.5)
    single = FieldGrid(eps=np.full((1, 1, 1), 5.76), efield=efield, spacing=spacing)
    mv = mode_volume(single)
    assert mv.volume_m3 == spacing[0] * spacing[1] * spacing[2]
    assert mv.argmax == (0, 0, 0)

    uniform = FieldGrid(eps=np.full((4, 3, 5), 2.0), efield=np.ones((4, 3, 5, 3)), spacing=spacing)
    assert mode_volume(uniform).volume_m3 == pytest.approx(60 * single.voxel_volume, rel=1e-15)


def test_synth_mode_is_deterministic(tmp_path):
    spec = SynthSpec(shape=(41, 21, 11))
    first, second = synth_mode(spec), synth_mode(spec)
    assert first.eps.tobytes() == second.eps.tobytes()
    assert first.efield.tobytes() == second.efield.tobytes()
    assert first.origin == second.origin

    a = save_grid(first, tmp_path / "a.fgrd")
    b = save_grid(second, tmp_path / "b.fgrd")
    assert a.read_bytes() == b.read_bytes()


def test_mode_volume_is_stable_under_grid_refinement():
    """Same 600 nm box at 30, 15 and 7.5 nm voxels"""
    sigma, a = 60e-9, 200e-9
    steps = ((21, 30e-9), (41, 15e-9), (81, 7.5e-9))
    volumes = []
    for n, h in steps:
        spec = _full_beam(shape=(n, n, n), spacing=(h, h, h), lattice_period=a, envelope_sigma=sigma)
        volumes.append(mode_volume(synth_mode(spec)).volume_m3)

    along_x = 0.5 * math.sqrt(math.pi) * sigma * (1.0 + math.exp(-(math.pi * sigma / a) ** 2))
    continuum = along_x * (math.sqrt(math.pi) * sigma) ** 2
    print("[OK] V/V_continuum − 1: " + ", ".join(f"{v / continuum - 1.0:.1e}" for v in volumes))
    # |V_h − V_h/2| ≤ C·h
    c = 1e-6 * continuum / 30e-9
    for (_, h), coarse, fine in zip(steps, volumes, volumes[1:]):
        assert abs(coarse - fine) <= c * h
    assert volumes[2] == pytest.approx(continuum, rel=1e-6)


def test_csv_and_binary_files_load_the_same_grid(tmp_path):
    grid = synth_mode(SynthSpec(shape=(9, 7, 5), lattice_period=40e-9, bridge_half_width=5e-9,
                                hole_half_width=20e-9, envelope_sigma=30e-9))
    efield = grid.efield * np.exp(0.3j)
    efield[..., 0] = -1e-7 * grid.efield[..., 1]
    grid = FieldGrid(eps=grid.eps, efield=efield, spacing=grid.spacing, origin=grid.origin,
                     wavelength=620e-9, refractive_index=2.6)

    binary = load_grid(save_grid(grid, tmp_path / "mode.fgrd"))
    text = load_grid(save_grid(grid, tmp_path / "mode.csv"))
    assert np.array_equal(binary.eps, text.eps)
    assert np.array_equal(binary.efield, text.efield)
    assert (binary.spacing, binary.origin) == (text.spacing, text.origin)
    assert (binary.wavelength, binary.refractive_index) == (text.wavelength, text.refractive_index)
    assert mode_volume(binary) == mode_volume(text)


def test_no_dielectric_voxels():
    grid = FieldGrid(eps=np.ones((3, 3, 3)), efield=np.ones((3, 3, 3, 3)), spacing=(1e-8, 1e-8, 1e-8))
    with pytest.raises(RegionError):
        field_maximum_in_dielectric(grid)


@pytest.mark.parametrize("suffix", [".fgrd", ".csv"])
def test_grid_files_preserve_the_grid(tmp_path, suffix):
    grid = synth_mode(SynthSpec(shape=(9, 7, 5), lattice_period=40e-9, bridge_half_width=5e-9,
                                hole_half_width=20e-9, envelope_sigma=30e-9))
    complex_field = grid.efield.copy()
    complex_field[..., 2] = 0.25j * grid.efield[..., 1]
    grid = FieldGrid(eps=grid.eps, efield=complex_field, spacing=grid.spacing, origin=grid.origin)

    path = save_grid(grid, tmp_path / f"mode{suffix}")
    loaded = load_grid(path)
    assert loaded.shape == grid.shape
    assert np.array_equal(loaded.eps, grid.eps)
    assert np.array_equal(loaded.efield, grid.efield)
    assert loaded.spacing == grid.spacing
    assert loaded.origin == grid.origin
    assert loaded.wavelength == grid.wavelength
    assert loaded.refractive_index == grid.refractive_index


def test_binary_layout(tmp_path):
    grid = synth_mode(SynthSpec(shape=(3, 3, 3), spacing=(1e-8, 2e-8, 3e-8), holes=False))
    path = save_grid(grid, tmp_path / "small.fgrd")
    data = path.read_bytes()
    assert HEADER.size == 82
    assert len(data) == 82 + 27 * 8 + 27 * 48

    fields = HEADER.unpack_from(data)
    assert fields[0] == b"FGRD"
    assert fields[2:5] == (3, 3, 3)
    assert fields[5:8] == (1e-8, 2e-8, 3e-8)
    # second eps entry is voxel (1, 0, 0)
    second = struct.unpack_from("<d", data, 82 + 8)[0]
    assert second == grid.eps[1, 0, 0]


def test_malformed_binary_grids(tmp_path):
    grid = synth_mode(SynthSpec(shape=(3, 3, 3), holes=False))
    good = save_grid(grid, tmp_path / "good.fgrd").read_bytes()

    truncated = tmp_path / "truncated.fgrd"
    truncated.write_bytes(good[:-8])
    with pytest.raises(GridFormatError, match="expected"):
        load_grid(truncated)

    wrong_magic = tmp_path / "magic.fgrd"
    wrong_magic.write_bytes(b"XXXX" + good[4:])
    with pytest.raises(GridFormatError, match="magic"):
        load_grid(wrong_magic)

    short = tmp_path / "short.fgrd"
    short.write_bytes(good[:10])
    with pytest.raises(GridFormatError):
        load_grid(short)

    with pytest.raises(GridFormatError):
        save_grid(grid, tmp_path / "mode.h5")
    with pytest.raises(GridFormatError):
        load_grid(tmp_path / "mode.h5")


def test_malformed_csv_grids(tmp_path):
    grid = synth_mode(SynthSpec(shape=(3, 3, 3), holes=False))
    lines = save_grid(grid, tmp_path / "good.csv").read_text(encoding="utf-8").splitlines()

    shuffled = tmp_path / "shuffled.csv"
    shuffled.write_text("\n".join(lines[:2] + [lines[3], lines[2]] + lines[4:]) + "\n", encoding="utf-8")
    with pytest.raises(GridFormatError, match="x-fastest"):
        load_grid(shuffled)

    no_meta = tmp_path / "no_meta.csv"
    no_meta.write_text("\n".join(lines[1:]) + "\n", encoding="utf-8")
    with pytest.raises(GridFormatError, match="metadata"):
        load_grid(no_meta)

    missing_row = tmp_path / "missing_row.csv"
    missing_row.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(GridFormatError):
        load_grid(missing_row)

    bad_header = tmp_path / "bad_header.csv"
    bad_header.write_text("\n".join([lines[0], "x,y,z,eps"] + lines[2:]) + "\n", encoding="utf-8")
    with pytest.raises(GridFormatError, match="header"):
        load_grid(bad_header)

"""
Command handlers for the cqed_fom CLI

Each handler takes a validated RunConfig, writes its tables into the output
directory and returns the written paths. Tables are CSV (header row, floats
as repr) or JSON (list of row objects, indent=2); both are deterministic.
"""
import csv
import json
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from core.config_utils import angular_rate_to_ghz, angular_rate_to_hz, wavelength_from_omega
from core.exceptions import (
    ConfigError,
    GridFormatError,
    IntegrationError,
    InvariantViolationError,
    ParameterError,
    UndefinedQuantityError,
)
from core.fieldgrid import (
    FieldGrid,
    field_maximum_in_dielectric,
    g_field,
    load_grid,
    mode_volume,
    save_grid,
    synth_mode,
)
from core.figures_of_merit import cooperativity, fom_sweep, g_from_mode_volume
from core.implant import (
    ImplantRegion,
    implant_distribution,
    lateral_plane,
    median_vs_D_curve,
    violin_export,
)
from core.log_decorators import log_errors
from core.logger_config import get_logger
from core.models.run_config import RunConfig
from core.reflection import (
    contrast_curve,
    contrast_window,
    quality_factor,
    reflection_dips,
    spin_spectra,
)

logger = get_logger(__name__)

FORMATS = ("csv", "json")
GHZ = 2.0 * math.pi * 1e9


# ==========================================
# WRITERS
# ==========================================

def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(out_dir: Path, name: str, columns: Sequence[str], rows: Sequence[Sequence], fmt: str) -> Path:
    """Write rows as name.csv or name.json"""
    if fmt == "csv":
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    else:
        path = out_dir / f"{name}.json"
        write_json(path, [dict(zip(columns, row)) for row in rows])
    logger.info(f"Wrote {len(rows)} rows to {path.name}")
    return path


def write_json(path: Path, payload) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
        f.write("\n")
    return path


def write_run_echo(out_dir: Path, command: str, run_config: RunConfig, derived: Optional[dict] = None) -> Path:
    """run_config.json: the validated config, its internal-unit values and derived scalars"""
    payload = {
        "command": command,
        "config": run_config.model_dump(mode="json"),
        "internal": run_config.internal(),
        "derived": derived or {},
    }
    return write_json(out_dir / "run_config.json", payload)


def _ghz(rate):
    return None if rate is None else angular_rate_to_ghz(rate)


def _nm(length_m: float) -> float:
    return round(length_m * 1e9, 9)


def _diameter_label(diameter_m: float) -> str:
    return f"{_nm(diameter_m):g}nm"


# ==========================================
# COMMANDS
# ==========================================

@log_errors
def run_fom_sweep(run_config: RunConfig, out_dir: Path, fmt: str, threads: int) -> List[Path]:
    """β, β_wg, I and C over the configured g (or V) list"""
    base = run_config.system.to_params()
    n_ref = run_config.refractive_index
    kwargs = dict(dipole=run_config.dipole.to_spec(), spec=run_config.hilbert.to_spec(),
                  numerics=run_config.numerics.to_spec(), refractive_index=n_ref, max_workers=threads)
    if run_config.sweep.V_values is not None:
        volumes = run_config.sweep.V_values.to_si(wavelength_from_omega(base.omega), n_ref)
        rows = fom_sweep(base, v_values=volumes, v_unit="m3", **kwargs)
    else:
        rows = fom_sweep(base, g_values=run_config.sweep.axis().to_si(), **kwargs)

    columns = ["index", "g_GHz", "V_lambda_n3", "V_m3", "beta", "beta_wg", "indist",
               "cooperativity", "horizon_s", "status", "message"]
    table = []
    for row in rows:
        res = row.result
        table.append([
            row.index, _ghz(row.g), row.volume_normalized, row.volume_m3,
            res.beta if res else None, res.beta_wg if res else None, res.indist if res else None,
            res.cooperativity if res else None, res.numerics.horizon if res else None,
            row.status.value, row.message,
        ])
    failed = sum(1 for row in rows if row.result is None)
    if failed:
        logger.warning(f"{failed}/{len(rows)} sweep points failed; see status column")
    return [write_table(out_dir, "fom_sweep", columns, table, fmt),
            write_run_echo(out_dir, "fom-sweep", run_config, _system_derived(base))]


def _system_derived(params) -> dict:
    derived = {}
    try:
        derived["quality_factor"] = quality_factor(params)
        derived["cooperativity"] = cooperativity(params)
    except UndefinedQuantityError:
        pass
    return derived


@log_errors
def run_spectrum(run_config: RunConfig, out_dir: Path, fmt: str, threads: int) -> List[Path]:
    """Drift-convolved reflectivity for both spin states, probe relative to the bare cavity"""
    params = run_config.system.to_params()
    probe = run_config.probe.grid()
    r_down, r_up = spin_spectra(params, run_config.spin.to_spin(), probe)

    derived = _system_derived(params)
    for label, spectrum in (("down", r_down), ("up", r_up)):
        dips = reflection_dips(spectrum)
        derived[f"dips_{label}_GHz"] = [angular_rate_to_ghz(d.detuning) for d in dips]

    paths = []
    for name, spectrum in (("spectrum_down", r_down), ("spectrum_up", r_up)):
        rows = [[angular_rate_to_hz(d), float(r)] for d, r in zip(spectrum.probe_detunings, spectrum.amplitude)]
        paths.append(write_table(out_dir, name, ["detuning_Hz", "R"], rows, fmt))
    paths.append(write_run_echo(out_dir, "spectrum", run_config, derived))
    return paths


@log_errors
def run_contrast(run_config: RunConfig, out_dir: Path, fmt: str, threads: int) -> List[Path]:
    """Spin contrast against cavity-emitter detuning"""
    params = run_config.system.to_params()
    rows = contrast_curve(params, run_config.spin.to_spin(), run_config.contrast.detunings(),
                          run_config.probe.grid(), run_config.contrast.to_policy(), max_workers=threads)

    columns = ["cavity_detuning_GHz", "probe_GHz", "contrast", "abs_difference", "R_down", "R_up"]
    table = [[_ghz(r.cavity_detuning), _ghz(r.probe), r.contrast, r.difference, r.r_down, r.r_up] for r in rows]

    derived = _system_derived(params)
    window = contrast_window(rows, run_config.contrast.window_fraction)
    derived["contrast_window"] = {
        "optimum_detuning_GHz": _ghz(window.optimum_detuning),
        "optimum": window.optimum,
        "lower_GHz": _ghz(window.lower),
        "upper_GHz": _ghz(window.upper),
        "fraction": window.fraction,
    }
    return [write_table(out_dir, "contrast", columns, table, fmt),
            write_run_echo(out_dir, "contrast", run_config, derived)]


def _field(run_config: RunConfig) -> FieldGrid:
    if run_config.grid.path:
        return load_grid(run_config.grid.path)
    logger.info("No grid path configured; synthesizing the analytic test mode")
    return synth_mode(run_config.synth.to_spec(run_config.system.wavelength.to_si(), run_config.refractive_index))


@log_errors
def run_modevol(run_config: RunConfig, out_dir: Path, fmt: str, threads: int) -> List[Path]:
    """Mode volume, field maximum and peak couplings of a field grid"""
    grid = _field(run_config)
    mv = mode_volume(grid)
    dipole = run_config.dipole.to_spec()
    omega = run_config.system.to_params().omega
    g_peak = g_from_mode_volume(mv.volume_m3, dipole, omega)
    gmap = g_field(grid, dipole, omega)
    (i, j, k), _ = field_maximum_in_dielectric(grid)

    columns = ["V_m3", "V_lambda_n3", "argmax_i", "argmax_j", "argmax_k", "x_m", "y_m", "z_m",
               "max_energy_density", "g_max_GHz", "g_dielectric_max_GHz"]
    row = [mv.volume_m3, mv.volume_normalized, *mv.argmax, *mv.argmax_position,
           mv.max_energy_density, angular_rate_to_ghz(g_peak), angular_rate_to_ghz(float(gmap.values[i, j, k]))]
    return [write_table(out_dir, "modevol", columns, [row], fmt),
            write_run_echo(out_dir, "modevol", run_config)]


@log_errors
def run_gmap(run_config: RunConfig, out_dir: Path, fmt: str, threads: int) -> List[Path]:
    """Lateral coupling map through the implant plane"""
    grid = _field(run_config)
    gmap = g_field(grid, run_config.dipole.to_spec(), run_config.system.to_params().omega)
    values, mask, center = lateral_plane(gmap, run_config.implant.plane,
                                         tuple(run_config.implant.center) if run_config.implant.center else None)
    x, y, _ = gmap.axes()
    rows = [[float(x[a]), float(y[b]), angular_rate_to_ghz(float(values[a, b])), int(mask[a, b])]
            for b in range(values.shape[1]) for a in range(values.shape[0])]
    derived = {"center_index": list(center)}
    return [write_table(out_dir, "gmap", ["x_m", "y_m", "g_GHz", "dielectric"], rows, fmt),
            write_run_echo(out_dir, "gmap", run_config, derived)]


@log_errors
def run_implant_stats(run_config: RunConfig, out_dir: Path, fmt: str, threads: int) -> List[Path]:
    """Median g against implantation diameter plus violin tables"""
    grid = _field(run_config)
    gmap = g_field(grid, run_config.dipole.to_spec(), run_config.system.to_params().omega)
    block = run_config.implant
    center = tuple(block.center) if block.center else None

    curve = median_vs_D_curve(gmap, block.diameters.to_si(), center=center, plane=block.plane,
                              max_workers=threads)
    columns = ["D_nm", "median_GHz", "p40_GHz", "p60_GHz", "n_voxels"]
    rows = [[_nm(r.diameter), _ghz(r.median), _ghz(r.p40), _ghz(r.p60), r.n_voxels] for r in curve]
    paths = [write_table(out_dir, "implant_median", columns, rows, fmt)]

    for diameter in block.violin_diameters.to_si():
        dist = implant_distribution(gmap, ImplantRegion(diameter=diameter, center=center, plane=block.plane))
        violin = violin_export(dist, block.n_bins)
        name = f"implant_violin_D{_diameter_label(diameter)}"
        # density per GHz so that Σ density·Δ(GHz) = 1
        table = [[angular_rate_to_ghz(float(c)), float(d) * GHZ] for c, d in zip(violin.bin_centers, violin.density)]
        if fmt == "csv":
            paths.append(write_table(out_dir, name, ["bin_center_GHz", "density"], table, fmt))
        else:
            summary = {key: _ghz(getattr(violin, key)) for key in
                       ("p25", "median", "p75", "whisker_low", "whisker_high", "min", "max")}
            summary["D_nm"] = _nm(diameter)
            summary["n_samples"] = int(dist.values.size)
            rows_json = [{"bin_center_GHz": c, "density": d} for c, d in table]
            paths.append(write_json(out_dir / f"{name}.json", {"summary": summary, "table": rows_json}))

    paths.append(write_run_echo(out_dir, "implant-stats", run_config))
    return paths


@log_errors
def run_synth_field(run_config: RunConfig, out_dir: Path, fmt: str, threads: int) -> List[Path]:
    """Write the analytic test mode as a grid file plus a summary row"""
    spec = run_config.synth.to_spec(run_config.system.wavelength.to_si(), run_config.refractive_index)
    grid = synth_mode(spec)
    grid_path = save_grid(grid, out_dir / run_config.synth.output)
    mv = mode_volume(grid)
    columns = ["grid_file", "nx", "ny", "nz", "V_m3", "V_lambda_n3"]
    row = [grid_path.name, *grid.shape, mv.volume_m3, mv.volume_normalized]
    return [grid_path, write_table(out_dir, "synth_field", columns, [row], fmt),
            write_run_echo(out_dir, "synth-field", run_config)]


COMMANDS: Dict[str, Callable[[RunConfig, Path, str, int], List[Path]]] = {
    "fom-sweep": run_fom_sweep,
    "spectrum": run_spectrum,
    "contrast": run_contrast,
    "modevol": run_modevol,
    "gmap": run_gmap,
    "implant-stats": run_implant_stats,
    "synth-field": run_synth_field,
}


# ==========================================
# ERRORS
# ==========================================

def exit_code_for(error: BaseException) -> int:
    """
    Map an exception to the CLI exit status.

    2 config/parameter, 3 numerical, 4 I/O, 1 anything else.
    """
    if isinstance(error, (ConfigError, ParameterError, ValidationError)):
        return 2
    if isinstance(error, (IntegrationError, InvariantViolationError, UndefinedQuantityError)):
        return 3
    if isinstance(error, (GridFormatError, OSError)):
        return 4
    return 1


def error_payload(error: BaseException) -> dict:
    return {"error": type(error).__name__, "message": str(error), "exit_code": exit_code_for(error)}

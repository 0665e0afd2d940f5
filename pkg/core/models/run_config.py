"""
Pydantic models for CLI run configurations

Every dimensioned quantity is written as {"value": x, "unit": "..."} and
converted to internal units (rad/s, m, m³, C·m) by ``to_si()``.
"""
import json
import typing
from typing import Any, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

import config
from core.config_utils import (
    omega_from_wavelength,
    suggest_key,
    to_angular_rate,
    to_coulomb_metre,
    to_cubic_metres,
    to_metres,
)
from core.exceptions import ConfigError
from core.fieldgrid import SynthSpec
from core.figures_of_merit import DipoleSpec, NumericsSpec
from core.quantum_core import HilbertSpec, SystemParams
from core.reflection import ProbePolicy, SpinConfig

FrequencyUnit = Literal["Hz", "kHz", "MHz", "GHz", "rad/s"]
LengthUnit = Literal["m", "um", "nm"]
DipoleUnit = Literal["Debye", "C*m"]
VolumeUnit = Literal["m3", "um3", "lambda_n3"]

STRICT = {"extra": "forbid"}


# ==========================================
# TAGGED QUANTITIES
# ==========================================

class Frequency(BaseModel):
    """Ordinary frequency (×2π on ingest) or angular rate"""
    value: float
    unit: FrequencyUnit

    model_config = STRICT

    def to_si(self) -> float:
        return to_angular_rate(self.value, self.unit)


class Length(BaseModel):
    value: float
    unit: LengthUnit

    model_config = STRICT

    def to_si(self) -> float:
        return to_metres(self.value, self.unit)


class DipoleMoment(BaseModel):
    value: float = Field(..., gt=0)
    unit: DipoleUnit

    model_config = STRICT

    def to_si(self) -> float:
        return to_coulomb_metre(self.value, self.unit)


class FrequencyList(BaseModel):
    values: List[float] = Field(..., min_length=1)
    unit: FrequencyUnit

    model_config = STRICT

    def to_si(self) -> List[float]:
        return [to_angular_rate(v, self.unit) for v in self.values]


class LengthList(BaseModel):
    values: List[float] = Field(..., min_length=1)
    unit: LengthUnit

    model_config = STRICT

    def to_si(self) -> List[float]:
        return [to_metres(v, self.unit) for v in self.values]


class VolumeList(BaseModel):
    """Mode volumes; lambda_n3 is resolved against the system wavelength and refractive_index"""
    values: List[float] = Field(..., min_length=1)
    unit: VolumeUnit

    model_config = STRICT

    def to_si(self, wavelength: float, refractive_index: float) -> List[float]:
        return [to_cubic_metres(v, self.unit, wavelength, refractive_index) for v in self.values]


def _ghz(value):
    return Field(default_factory=lambda: Frequency(value=value, unit="GHz"))


def _nm(value):
    return Field(default_factory=lambda: Length(value=value, unit="nm"))


# ==========================================
# BLOCKS
# ==========================================

class SystemBlock(BaseModel):
    """Cavity-emitter rates; defaults are the κ = κ_wg = 10 GHz nanobeam"""
    g: Frequency = _ghz(10.0)
    kappa_wg: Frequency = _ghz(10.0)
    kappa_sc: Frequency = _ghz(0.0)
    gamma: Frequency = _ghz(0.1)
    gamma_star: Frequency = Field(default_factory=lambda: Frequency(value=50.0, unit="MHz"))
    delta_ca: Frequency = _ghz(0.0)
    wavelength: Length = _nm(config.DEFAULT_WAVELENGTH_NM)

    model_config = STRICT

    def to_params(self):
        return SystemParams(
            g=self.g.to_si(),
            kappa_wg=self.kappa_wg.to_si(),
            kappa_sc=self.kappa_sc.to_si(),
            gamma=self.gamma.to_si(),
            gamma_star=self.gamma_star.to_si(),
            delta_ca=self.delta_ca.to_si(),
            omega=omega_from_wavelength(self.wavelength.to_si()),
        )


class HilbertBlock(BaseModel):
    n_max: int = Field(default=config.DEFAULT_N_MAX, ge=1)

    model_config = STRICT

    def to_spec(self):
        return HilbertSpec(n_max=self.n_max)


class NumericsBlock(BaseModel):
    tol: float = Field(default=config.DEFAULT_TOL, gt=0, le=1e-3)
    backend: Literal["auto", "exact", "rk"] = "auto"
    samples_per_rate: int = Field(default=config.SAMPLES_PER_RATE, ge=1)
    growth: float = Field(default=config.GRID_GROWTH, ge=1.0)
    excitation_cutoff: float = Field(default=config.EXCITATION_CUTOFF, gt=0, lt=1)
    residual_limit: float = Field(default=config.RESIDUAL_LIMIT, gt=0, lt=1)
    horizon_cap_factor: float = Field(default=config.HORIZON_CAP_FACTOR, gt=0)

    model_config = STRICT

    def to_spec(self):
        return NumericsSpec(**self.model_dump())


class DipoleBlock(BaseModel):
    mu: DipoleMoment = Field(default_factory=lambda: DipoleMoment(value=config.DEFAULT_DIPOLE_DEBYE, unit="Debye"))
    orientation: Literal["aligned", "fixed"] = "aligned"
    axis: Optional[List[float]] = None
    overlap_xi: float = Field(default=config.DEFAULT_OVERLAP_XI, gt=0, le=1)

    model_config = STRICT

    def to_spec(self):
        axis = tuple(self.axis) if self.axis is not None else None
        return DipoleSpec(mu=self.mu.to_si(), orientation=self.orientation, axis=axis,
                          overlap_xi=self.overlap_xi)


class SweepBlock(BaseModel):
    """Exactly one of g_values and V_values; neither means the default g list"""
    g_values: Optional[FrequencyList] = None
    V_values: Optional[VolumeList] = None

    model_config = STRICT

    @model_validator(mode="after")
    def _one_axis(self):
        if self.g_values is not None and self.V_values is not None:
            raise ValueError("give g_values or V_values, not both")
        return self

    def axis(self) -> FrequencyList:
        return self.g_values or FrequencyList(values=[0.5, 1, 2, 5, 10, 20, 50], unit="GHz")


class SpinBlock(BaseModel):
    zeeman_split: Frequency = _ghz(1.0)
    drift: Frequency = Field(default_factory=lambda: Frequency(value=50.0, unit="MHz"))
    drift_convention: Literal["sigma", "fwhm"] = "sigma"
    spin_down_offset: Frequency = _ghz(0.0)

    model_config = STRICT

    def to_spin(self):
        return SpinConfig(zeeman_split=self.zeeman_split.to_si(), drift_sigma=self.drift.to_si(),
                          spin_down_offset=self.spin_down_offset.to_si(),
                          drift_convention=self.drift_convention)


class ProbeBlock(BaseModel):
    """
    Uniform probe window.

    For `spectrum` the window is relative to the bare cavity; for `contrast`
    it is relative to the spin-down emitter line.
    """
    start: Frequency = _ghz(-40.0)
    stop: Frequency = _ghz(40.0)
    points: int = Field(default=3201, ge=2)

    model_config = STRICT

    @model_validator(mode="after")
    def _ordered(self):
        if not self.stop.to_si() > self.start.to_si():
            raise ValueError("probe stop must exceed start")
        return self

    def grid(self) -> np.ndarray:
        return np.linspace(self.start.to_si(), self.stop.to_si(), self.points)


class ContrastBlock(BaseModel):
    """Cavity-emitter detuning grid and probe policy for the contrast curve"""
    detuning_start: Frequency = _ghz(0.0)
    detuning_stop: Frequency = _ghz(1500.0)
    points: int = Field(default=151, ge=1)
    policy: Literal["optimize", "fixed"] = "optimize"
    probe_offset: Frequency = _ghz(0.0)
    window_fraction: float = Field(default=0.5, gt=0, le=1)

    model_config = STRICT

    def detunings(self) -> np.ndarray:
        return np.linspace(self.detuning_start.to_si(), self.detuning_stop.to_si(), self.points)

    def to_policy(self):
        return ProbePolicy(mode=self.policy, offset=self.probe_offset.to_si())


class GridBlock(BaseModel):
    """Field grid file (.fgrd or .csv); None means synthesize from the synth block"""
    path: Optional[str] = None

    model_config = STRICT


class SynthBlock(BaseModel):
    shape: List[int] = Field(default_factory=lambda: [81, 61, 41], min_length=3, max_length=3)
    spacing: Length = _nm(10.0)
    lattice_period: Length = _nm(250.0)
    envelope_sigma: Optional[Length] = _nm(300.0)
    beam_width: Length = _nm(400.0)
    beam_thickness: Length = _nm(200.0)
    holes: bool = True
    bridge_half_width: Length = _nm(40.0)
    hole_half_width: Length = _nm(150.0)
    eps_dielectric: float = Field(default=config.DEFAULT_REFRACTIVE_INDEX ** 2, gt=1)
    output: str = "synth_field.fgrd"

    model_config = STRICT

    def to_spec(self, wavelength: float, refractive_index: float):
        d = self.spacing.to_si()
        return SynthSpec(
            shape=tuple(self.shape),
            spacing=(d, d, d),
            lattice_period=self.lattice_period.to_si(),
            envelope_sigma=self.envelope_sigma.to_si() if self.envelope_sigma is not None else None,
            beam_width=self.beam_width.to_si(),
            beam_thickness=self.beam_thickness.to_si(),
            holes=self.holes,
            bridge_half_width=self.bridge_half_width.to_si(),
            hole_half_width=self.hole_half_width.to_si(),
            eps_dielectric=self.eps_dielectric,
            wavelength=wavelength,
            refractive_index=refractive_index,
        )


class ImplantBlock(BaseModel):
    diameters: LengthList = Field(default_factory=lambda: LengthList(values=[0, 10, 20, 30, 50, 100], unit="nm"))
    violin_diameters: LengthList = Field(default_factory=lambda: LengthList(values=[10, 30], unit="nm"))
    plane: Union[Literal["max-depth", "projection"], int] = "max-depth"
    center: Optional[List[int]] = None
    n_bins: int = Field(default=40, ge=2)

    model_config = STRICT


class RunConfig(BaseModel):
    """Complete run configuration; every block is optional"""
    system: SystemBlock = Field(default_factory=SystemBlock)
    refractive_index: float = Field(default=config.DEFAULT_REFRACTIVE_INDEX, gt=0)
    hilbert: HilbertBlock = Field(default_factory=HilbertBlock)
    numerics: NumericsBlock = Field(default_factory=NumericsBlock)
    dipole: DipoleBlock = Field(default_factory=DipoleBlock)
    sweep: SweepBlock = Field(default_factory=SweepBlock)
    spin: SpinBlock = Field(default_factory=SpinBlock)
    probe: ProbeBlock = Field(default_factory=ProbeBlock)
    contrast: ContrastBlock = Field(default_factory=ContrastBlock)
    grid: GridBlock = Field(default_factory=GridBlock)
    synth: SynthBlock = Field(default_factory=SynthBlock)
    implant: ImplantBlock = Field(default_factory=ImplantBlock)

    model_config = STRICT

    def internal(self) -> dict:
        """Resolved internal values (rad/s, m, C·m) for the run_config echo"""
        params = self.system.to_params()
        return {
            "system": params.to_dict(),
            "kappa": params.kappa,
            "wavelength_m": self.system.wavelength.to_si(),
            "refractive_index": self.refractive_index,
            "n_max": self.hilbert.n_max,
            "dipole_mu_Cm": self.dipole.mu.to_si(),
            "spin": {
                "zeeman_split": self.spin.zeeman_split.to_si(),
                "drift_sigma": self.spin.to_spin().sigma,
                "spin_down_offset": self.spin.spin_down_offset.to_si(),
            },
        }


# ==========================================
# PARSING
# ==========================================

def _model_of(annotation) -> Optional[type]:
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        return annotation
    for arg in typing.get_args(annotation):
        model = _model_of(arg)
        if model is not None:
            return model
    return None


def _check_keys(data: Any, model: type, path: str = "") -> None:
    """Reject unknown keys before validation, naming the nearest valid key"""
    if not isinstance(data, dict):
        return
    fields = model.model_fields
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in fields:
            guess = suggest_key(key, fields)
            hint = f"; did you mean {guess!r}?" if guess else f"; valid keys: {sorted(fields)}"
            raise ConfigError(f"unknown key {key!r}{hint}", path=where)
        nested = _model_of(fields[key].annotation)
        if nested is not None:
            _check_keys(value, nested, where)


def parse_config(text: str) -> RunConfig:
    """
    Parse and validate a JSON run configuration.

    Raises:
        ConfigError: invalid JSON, unknown key, missing field or bad unit,
            with the dotted path of the offending entry
    """
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (line {e.lineno}, column {e.colno})") from e
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")

    _check_keys(data, RunConfig)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first["loc"])
        raise ConfigError(first["msg"], path=path) from e


def load_config(path) -> RunConfig:
    """Read and parse a config file (UTF-8 JSON)"""
    with open(path, "r", encoding="utf-8") as f:
        try:
            text = f.read()
        except UnicodeDecodeError as e:
            raise ConfigError(f"{path}: not valid UTF-8 ({e.reason} at byte {e.start})") from e
    return parse_config(text)

"""
Unit conversion and configuration helper functions for the cavity-QED toolkit

Internal convention: every rate is an angular frequency in rad/s, every
length in metres, every volume in m³, dipole moments in C·m.
"""
import difflib
import math

from scipy import constants

from core.exceptions import ConfigError, ParameterError

# Fixed Debye conversion (C·m per Debye)
DEBYE = 3.33564e-30

# Ordinary-frequency units are multiplied by 2π on ingest
FREQUENCY_UNITS = {
    "Hz": 1.0,
    "kHz": 1e3,
    "MHz": 1e6,
    "GHz": 1e9,
}
LENGTH_UNITS = {
    "m": 1.0,
    "um": 1e-6,
    "nm": 1e-9,
}
DIPOLE_UNITS = {
    "C*m": 1.0,
    "Debye": DEBYE,
}
VOLUME_UNITS = {
    "m3": 1.0,
    "um3": 1e-18,
}


def to_angular_rate(value, unit):
    """
    Convert a tagged frequency to an angular rate.

    Args:
        value: Numeric value as written in the config
        unit: One of Hz, kHz, MHz, GHz (ordinary frequency) or rad/s

    Returns:
        float: Angular frequency in rad/s

    Examples:
        to_angular_rate(10, "GHz")
        → 2π·1e10 = 62831853071.79586

        to_angular_rate(5.0, "rad/s")
        → 5.0
    """
    if unit == "rad/s":
        return float(value)
    if unit not in FREQUENCY_UNITS:
        raise ConfigError(f"unknown frequency unit {unit!r}; expected one of "
                          f"{sorted(FREQUENCY_UNITS) + ['rad/s']}")
    return 2.0 * math.pi * float(value) * FREQUENCY_UNITS[unit]


def angular_rate_to_ghz(rate):
    """
    Express an angular rate as an ordinary frequency in GHz (rate / 2π / 1e9).

    Args:
        rate: Angular frequency in rad/s

    Returns:
        float: Frequency in GHz
    """
    return rate / (2.0 * math.pi) / 1e9


def angular_rate_to_hz(rate):
    """Express an angular rate as an ordinary frequency in Hz"""
    return rate / (2.0 * math.pi)


def to_metres(value, unit):
    """
    Convert a tagged length to metres.

    Args:
        value: Numeric value
        unit: nm, um or m

    Returns:
        float: Length in metres

    Examples:
        to_metres(737, "nm")
        → 7.37e-07
    """
    if unit not in LENGTH_UNITS:
        raise ConfigError(f"unknown length unit {unit!r}; expected one of {sorted(LENGTH_UNITS)}")
    return float(value) * LENGTH_UNITS[unit]


def debye_to_coulomb_metre(mu_debye):
    """Convert a dipole moment from Debye to C·m"""
    return float(mu_debye) * DEBYE


def to_coulomb_metre(value, unit):
    """
    Convert a tagged dipole moment to C·m.

    Args:
        value: Numeric value
        unit: Debye or C*m

    Returns:
        float: Dipole moment in C·m

    Examples:
        to_coulomb_metre(2.31, "Debye")
        → 7.7053284e-30
    """
    if unit not in DIPOLE_UNITS:
        raise ConfigError(f"unknown dipole unit {unit!r}; expected one of {sorted(DIPOLE_UNITS)}")
    return float(value) * DIPOLE_UNITS[unit]


def normalized_volume_unit(wavelength, refractive_index):
    """
    Size of one (λ/n)³ volume unit in m³.

    Args:
        wavelength: Vacuum wavelength in metres
        refractive_index: Reference index n

    Returns:
        float: (λ/n)³ in m³
    """
    if wavelength <= 0 or refractive_index <= 0:
        raise ParameterError("wavelength and refractive index must be positive")
    return (wavelength / refractive_index) ** 3


def to_cubic_metres(value, unit, wavelength=None, refractive_index=None):
    """
    Convert a tagged mode volume to m³.

    Args:
        value: Numeric value
        unit: m3, um3 or lambda_n3 (units of (λ/n)³)
        wavelength: Vacuum wavelength in metres (lambda_n3 only)
        refractive_index: Reference index (lambda_n3 only)

    Returns:
        float: Volume in m³

    Examples:
        to_cubic_metres(0.5, "lambda_n3", 737e-9, 2.4)
        → 0.5 · (307.08 nm)³ ≈ 1.448e-20
    """
    if unit == "lambda_n3":
        if wavelength is None or refractive_index is None:
            raise ConfigError("lambda_n3 volumes need a wavelength and refractive index")
        return float(value) * normalized_volume_unit(wavelength, refractive_index)
    if unit not in VOLUME_UNITS:
        raise ConfigError(f"unknown volume unit {unit!r}; expected one of "
                          f"{sorted(VOLUME_UNITS) + ['lambda_n3']}")
    return float(value) * VOLUME_UNITS[unit]


def omega_from_wavelength(wavelength):
    """
    Optical carrier angular frequency for a vacuum wavelength.

    Args:
        wavelength: Vacuum wavelength in metres

    Returns:
        float: ω = 2πc/λ in rad/s

    Examples:
        omega_from_wavelength(737e-9)
        → 2.5558e15 (ω/2π ≈ 406.8 THz)
    """
    if wavelength <= 0:
        raise ParameterError(f"wavelength must be positive, got {wavelength!r}")
    return 2.0 * math.pi * constants.c / wavelength


def wavelength_from_omega(omega):
    """Vacuum wavelength (m) for an angular frequency"""
    if omega <= 0:
        raise ParameterError(f"omega must be positive, got {omega!r}")
    return 2.0 * math.pi * constants.c / omega


def suggest_key(name, valid_keys):
    """
    Find the valid key closest to a misspelt one.

    Args:
        name: Key found in the config
        valid_keys: Iterable of accepted keys

    Returns:
        str or None: Closest valid key, or None when nothing is similar

    Examples:
        suggest_key("kapa_wg", ["kappa_wg", "kappa_sc", "gamma"])
        → "kappa_wg"
    """
    matches = difflib.get_close_matches(name, list(valid_keys), n=1, cutoff=0.5)
    return matches[0] if matches else None

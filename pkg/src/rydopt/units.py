"""Unit conversions between laboratory units and atomic units (hbar = 1).

All physics in the package runs in atomic units. Conversions happen once,
when configuration values enter the library.

Constants are CODATA 2022 values.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration value."""


# hartree expressed in cm^-1
HARTREE_WAVENUMBER = 219474.63136314
# atomic unit of time in seconds
AU_TIME_SECONDS = 2.4188843265864e-17
# e * a0 in C m
AU_DIPOLE_CM = 8.4783536198e-30
# 1 debye = 1e-21 / c  C m
DEBYE_CM = 1e-21 / 299792458.0

WAVENUMBER_TO_HARTREE = 1.0 / HARTREE_WAVENUMBER
FEMTOSECOND_TO_AU = 1e-15 / AU_TIME_SECONDS
DEBYE_TO_AU = DEBYE_CM / AU_DIPOLE_CM


class Unit(str, Enum):
    WAVENUMBER_CM = "wavenumber_cm"
    FEMTOSECOND = "femtosecond"
    DEBYE = "debye"
    ATOMIC_ENERGY = "atomic_energy"
    ATOMIC_TIME = "atomic_time"
    ATOMIC_DIPOLE = "atomic_dipole"
    DIMENSIONLESS = "dimensionless"


_FACTORS = {
    Unit.WAVENUMBER_CM: WAVENUMBER_TO_HARTREE,
    Unit.FEMTOSECOND: FEMTOSECOND_TO_AU,
    Unit.DEBYE: DEBYE_TO_AU,
    Unit.ATOMIC_ENERGY: 1.0,
    Unit.ATOMIC_TIME: 1.0,
    Unit.ATOMIC_DIPOLE: 1.0,
    Unit.DIMENSIONLESS: 1.0,
}


def _factor(unit) -> float:
    try:
        return _FACTORS[Unit(unit)]
    except ValueError:
        raise ConfigurationError(f"unknown unit tag {unit!r}") from None


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: Unit

    def __post_init__(self):
        _factor(self.unit)
        object.__setattr__(self, "unit", Unit(self.unit))


def to_atomic(q: Quantity) -> float:
    """Return the value of ``q`` in atomic units."""
    return float(q.value) * _factor(q.unit)


def from_atomic(value: float, unit) -> Quantity:
    """Express an atomic-unit value in ``unit``."""
    return Quantity(float(value) / _factor(unit), Unit(unit))


def wavenumber(value: float) -> float:
    return value * WAVENUMBER_TO_HARTREE


def femtoseconds(value: float) -> float:
    return value * FEMTOSECOND_TO_AU


def debye(value: float) -> float:
    return value * DEBYE_TO_AU


def au_to_fs(value):
    return value / FEMTOSECOND_TO_AU


def au_to_wavenumber(value):
    return value / WAVENUMBER_TO_HARTREE

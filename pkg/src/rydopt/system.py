"""Two-atom Dicke-basis ladder |g>, |s>, |e> and its Hamiltonian.

The antisymmetric state |a> does not couple to the laser and is dropped, so
states are complex 3-vectors ordered (c_g, c_s, c_e).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .units import ConfigurationError, debye, wavenumber

G, S, E = 0, 1, 2
LEVELS = ("g", "s", "e")

# coupling pattern of the dipole operator in the ladder basis
COUPLING = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


class PropagationError(ArithmeticError):
    """Raised when dynamics receive non-finite input."""


@dataclass(frozen=True)
class SystemParams:
    """Atomic and interaction constants, all in atomic units.

    Parameters
    ----------
    omega0 : float
        Single-atom transition frequency.
    mu : float
        Single-atom transition dipole.
    vdd : float
        Dipole-dipole interaction strength.
    """

    omega0: float
    mu: float
    vdd: float

    def __post_init__(self):
        if not (self.omega0 > 0 and self.mu > 0 and self.vdd >= 0):
            raise ConfigurationError("omega0 and mu must be positive, vdd non-negative")
        if not self.vdd < self.omega0:
            raise ConfigurationError("vdd must be smaller than omega0")

    @classmethod
    def from_lab_units(cls, omega0_cm: float, mu_debye: float, vdd_cm: float) -> "SystemParams":
        return cls(wavenumber(omega0_cm), debye(mu_debye), wavenumber(vdd_cm))

    @property
    def mu_d(self) -> float:
        return math.sqrt(2.0) * self.mu

    @property
    def omega_sg(self) -> float:
        return self.omega0 + self.vdd

    @property
    def omega_es(self) -> float:
        return self.omega0 - self.vdd

    @property
    def energies(self) -> np.ndarray:
        """Diagonal energies (E_g, E_s, E_e)."""
        return np.array([-self.omega0, self.vdd, self.omega0])

    @property
    def e_antisymmetric(self) -> float:
        # recorded for completeness; |a> never enters the dynamics
        return -self.vdd


# 87Rb 5S1/2 - 5P1/2 with the interaction at d = 100 a.u.
DEFAULT_PARAMS = SystemParams.from_lab_units(12578.95, 7.61, 12.35)


def derived_frequencies(p: SystemParams) -> tuple[float, float, float]:
    """Return ``(omega_sg, omega_es, mu_d)``."""
    return p.omega_sg, p.omega_es, p.mu_d


def build_hamiltonian(p: SystemParams, field_value: float) -> np.ndarray:
    """Lab-frame ladder Hamiltonian for an instantaneous field value."""
    if not math.isfinite(field_value):
        raise PropagationError(f"non-finite field value {field_value!r}")
    h = np.diag(p.energies)
    c = -p.mu_d * field_value
    h[0, 1] = h[1, 0] = c
    h[1, 2] = h[2, 1] = c
    return h


def basis_state(label: str) -> np.ndarray:
    psi = np.zeros(3, dtype=complex)
    psi[LEVELS.index(label)] = 1.0
    return psi


def bell_fidelity(psi) -> float:
    """Population of the symmetric Bell state |s>."""
    return float(abs(psi[S]) ** 2)

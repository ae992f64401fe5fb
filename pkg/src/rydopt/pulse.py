"""Time grids, sampled control fields, Gaussian baseline pulses and pulse functionals.

Every integral over the grid uses the trapezoid rule so that constraint
functionals, pulse areas and Gram matrices all agree on one quadrature.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal

from .system import SystemParams
from .units import ConfigurationError, au_to_fs, femtoseconds


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps`` points on ``[t0, tf]`` (atomic units)."""

    t0: float
    tf: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 2 or not self.tf > self.t0:
            raise ConfigurationError("time grid needs tf > t0 and at least two points")

    @property
    def dt(self) -> float:
        return (self.tf - self.t0) / (self.n_steps - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.tf, self.n_steps)

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n_steps, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


def symmetric_grid(tau: float, n_steps: int = 10_000, span: float = 4.0) -> TimeGrid:
    """Grid over ``[-span*tau, span*tau]``; the defaults give the standard 10^4-step grid."""
    return TimeGrid(-span * tau, span * tau, int(n_steps))


@dataclass(frozen=True, eq=False)
class SampledField:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_steps,):
            raise ConfigurationError(
                f"field has {v.size} samples, grid has {self.grid.n_steps}")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("field samples must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def with_values(self, values) -> "SampledField":
        return SampledField(self.grid, values)

    def to_csv(self, path) -> None:
        t_fs = au_to_fs(self.times)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_fs", "E_au"])
            for t, e in zip(t_fs, self.values):
                w.writerow([repr(float(t)), repr(float(e))])

    @classmethod
    def from_csv(cls, path) -> "SampledField":
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["t_fs", "E_au"]:
                raise ConfigurationError(f"{path}: expected header t_fs,E_au, got {header}")
            rows = np.array([[float(a), float(b)] for a, b in reader])
        t = femtoseconds(rows[:, 0])
        grid = TimeGrid(float(t[0]), float(t[-1]), len(t))
        if not np.allclose(t, grid.times, rtol=0, atol=1e-9 * abs(grid.dt) + 1e-12):
            raise ConfigurationError(f"{path}: time column is not a uniform grid")
        return cls(grid, rows[:, 1])


@dataclass(frozen=True)
class PulseAreas:
    theta_sg: complex
    theta_es: complex


def gaussian_amplitude(tau: float, p: SystemParams) -> float:
    """Peak field of the baseline pulse, chosen so that |theta_sg| = pi/2."""
    return math.sqrt(math.pi / 2) / (p.mu_d * tau)


def gaussian_envelope(t, tau: float, p: SystemParams):
    return gaussian_amplitude(tau, p) * np.exp(-np.asarray(t) ** 2 / (2 * tau**2))


def gaussian_pulse(grid: TimeGrid, tau: float, p: SystemParams, phase: float = 0.0) -> SampledField:
    """Baseline Gaussian pulse resonant with the g-s transition.

    Parameters
    ----------
    grid : TimeGrid
        Sampling grid; should cover at least ``[-4 tau, 4 tau]``.
    tau : float
        Gaussian width (atomic units).
    p : SystemParams
    phase : float, optional
        Carrier phase offset in radians.
    """
    if tau <= 0:
        raise ConfigurationError("tau must be positive")
    if grid.t0 > -4 * tau * (1 - 1e-12) or grid.tf < 4 * tau * (1 - 1e-12):
        warnings.warn("grid narrower than [-4 tau, 4 tau]; pulse area is truncated",
                      RuntimeWarning, stacklevel=2)
    t = grid.times
    return SampledField(grid, gaussian_envelope(t, tau, p) * np.cos(p.omega_sg * t + phase))


def _area(f: SampledField, omega: float, mu_d: float) -> complex:
    w = f.grid.weights()
    return complex(mu_d * np.sum(w * f.values * np.exp(1j * omega * f.times)))


def pulse_areas(f: SampledField, p: SystemParams) -> PulseAreas:
    """Final pulse areas theta_sg(t_f), theta_es(t_f)."""
    return PulseAreas(_area(f, p.omega_sg, p.mu_d), _area(f, p.omega_es, p.mu_d))


def cumulative_areas(f: SampledField, p: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Running areas theta_sg(t_j), theta_es(t_j) on every grid point (zero at t0)."""
    t = f.times
    dt = f.grid.dt
    out = []
    for omega in (p.omega_sg, p.omega_es):
        g = f.values * np.exp(1j * omega * t)
        acc = np.zeros(len(t), dtype=complex)
        acc[1:] = np.cumsum(0.5 * dt * (g[1:] + g[:-1]))
        out.append(p.mu_d * acc)
    return out[0], out[1]


def fluence(f: SampledField) -> float:
    return float(np.sum(f.grid.weights() * f.values**2))


def zero_area(f: SampledField) -> float:
    return float(np.sum(f.grid.weights() * f.values))


def spectral_area(f: SampledField, p: SystemParams) -> float:
    """Real, cosine-weighted g-s pulse area mu_d * int E cos(omega_sg t) dt."""
    return float(p.mu_d * np.sum(f.grid.weights() * f.values * np.cos(p.omega_sg * f.times)))


def spectrum(f: SampledField) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-FT approximation ``int E(t) exp(-i w t) dt`` on the DFT frequencies.

    Returns
    -------
    omega : ndarray
        Angular frequencies (a.u.), ascending.
    amp : ndarray
        Complex spectral amplitudes.
    """
    n = f.grid.n_steps
    dt = f.grid.dt
    omega = 2 * np.pi * np.fft.fftfreq(n, dt)
    amp = dt * np.fft.fft(f.values) * np.exp(-1j * omega * f.grid.t0)
    order = np.argsort(omega, kind="stable")
    return omega[order], amp[order]


def spectral_fwhm(f: SampledField) -> float:
    """Full width at half maximum of |amplitude| around the positive-frequency peak."""
    omega, amp = spectrum(f)
    mag = np.abs(amp)
    pos = omega > 0
    omega, mag = omega[pos], mag[pos]
    k = int(np.argmax(mag))
    half = 0.5 * mag[k]
    lo = k
    while lo > 0 and mag[lo - 1] >= half:
        lo -= 1
    hi = k
    while hi < len(mag) - 1 and mag[hi + 1] >= half:
        hi += 1

    def cross(i, j):
        # linear interpolation of the half-maximum crossing between bins i and j
        if mag[i] == mag[j]:
            return omega[i]
        return omega[i] + (half - mag[i]) * (omega[j] - omega[i]) / (mag[j] - mag[i])

    left = cross(lo - 1, lo) if lo > 0 else omega[lo]
    right = cross(hi, hi + 1) if hi < len(mag) - 1 else omega[hi]
    return float(right - left)


def bandwidth_ratio(tau: float, p: SystemParams) -> float:
    """Normalized bandwidth with the convention dw = 1/tau."""
    return 1.0 / (tau * p.vdd)


def envelope(f: SampledField) -> np.ndarray:
    """Magnitude of the analytic signal."""
    return np.abs(signal.hilbert(f.values))


def peak_rabi_frequency(f: SampledField, p: SystemParams) -> float:
    return float(p.mu_d * envelope(f).max())

"""Three descriptions of the ladder dynamics: numerical (3LN), first-order Magnus (3LA)
and the two-level area formula (2LA).

3LN steppers
------------
``"cf4"`` (default)
    Fourth-order commutator-free Magnus integrator with two Gauss nodes per
    substep and ``substeps`` substeps per grid interval. Field values at the
    nodes come from band-limited (FFT) interpolation of the samples.
``"midpoint"``
    ``exp(-i H(t_j + dt/2) dt)``, midpoint field from the same interpolation.
``"paper"``
    ``exp(-i H(t_j) dt)`` with the raw samples, the left-endpoint rule.

Every stepper is a product of exact 3x3 exponentials, so norm is conserved to
rounding for any field.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from . import _kernels
from ._series import propagator_series
from .pulse import SampledField, TimeGrid, cumulative_areas
from .system import PropagationError, SystemParams, basis_state
from .units import ConfigurationError, au_to_fs


class ModelKind(str, Enum):
    THREE_LEVEL_NUMERIC = "3ln"
    THREE_LEVEL_MAGNUS = "3la"
    TWO_LEVEL_ANALYTIC = "2la"


STEPPERS = ("cf4", "midpoint", "paper")


@dataclass(frozen=True, eq=False)
class PopulationHistory:
    grid: TimeGrid
    p_g: np.ndarray
    p_s: np.ndarray
    p_e: np.ndarray

    def to_csv(self, path) -> None:
        t_fs = au_to_fs(self.grid.times)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_fs", "p_g", "p_s", "p_e"])
            for row in zip(t_fs, self.p_g, self.p_s, self.p_e):
                w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class Scheme:
    """Per-interval factor layout of a stepper.

    ``offsets`` are node positions in units of dt; ``coef[k]`` mixes node values
    into the coupling of factor k; each factor has step ``h`` and diagonal
    scale ``diag_scale``.
    """

    offsets: tuple
    coef: np.ndarray
    h_frac: float
    diag_scale: float


@lru_cache(maxsize=None)
def scheme(stepper: str = "cf4", substeps: int = 2) -> Scheme:
    if stepper == "paper":
        return Scheme((0.0,), np.ones((1, 1)), 1.0, 1.0)
    if stepper == "midpoint":
        return Scheme((0.5,), np.ones((1, 1)), 1.0, 1.0)
    if stepper != "cf4":
        raise ConfigurationError(f"unknown stepper {stepper!r}; choose from {STEPPERS}")
    m = int(substeps)
    if m < 1:
        raise ConfigurationError("substeps must be >= 1")
    c1 = 0.5 - math.sqrt(3) / 6
    c2 = 0.5 + math.sqrt(3) / 6
    b_early = (3 + 2 * math.sqrt(3)) / 12
    b_late = (3 - 2 * math.sqrt(3)) / 12
    offsets = []
    coef = np.zeros((2 * m, 2 * m))
    for i in range(m):
        offsets += [(i + c1) / m, (i + c2) / m]
        # the first factor weights the earlier node more
        coef[2 * i, 2 * i], coef[2 * i, 2 * i + 1] = b_early, b_late
        coef[2 * i + 1, 2 * i], coef[2 * i + 1, 2 * i + 1] = b_late, b_early
    return Scheme(tuple(offsets), coef, 1.0 / m, 0.5)


def _phase_ramp(n_pad: int, shift: float) -> np.ndarray:
    # shift in units of the sample spacing
    k = np.arange(n_pad // 2 + 1)
    ramp = np.exp(2j * np.pi * k * shift / n_pad)
    if n_pad % 2 == 0:
        ramp[-1] = math.cos(math.pi * shift)
    return ramp


@lru_cache(maxsize=64)
def _ramp(n_pad: int, shift: float) -> np.ndarray:
    r = _phase_ramp(n_pad, shift)
    r.flags.writeable = False
    return r


def shift_samples(values: np.ndarray, shift: float) -> np.ndarray:
    """Band-limited interpolation of ``values`` at ``t_j + shift*dt`` for every j.

    The signal is zero-padded to at least twice its length before the FFT so
    the periodic wrap-around sits in the padding.
    """
    if shift == 0.0:
        return np.array(values, dtype=float)
    n = len(values)
    n_pad = sfft.next_fast_len(2 * n, real=True)
    spec = sfft.rfft(values, n_pad)
    return sfft.irfft(spec * _phase_ramp(n_pad, shift), n_pad)[:n]


def shift_samples_adjoint(g: np.ndarray, shift: float) -> np.ndarray:
    """Transpose of :func:`shift_samples` (as a linear map on R^n)."""
    if shift == 0.0:
        return np.array(g, dtype=float)
    n = len(g)
    n_pad = sfft.next_fast_len(2 * n, real=True)
    spec = sfft.rfft(g, n_pad)
    return sfft.irfft(spec * np.conj(_phase_ramp(n_pad, shift)), n_pad)[:n]


def node_values(values: np.ndarray, offsets) -> np.ndarray:
    """Band-limited field values at ``t_j + offset*dt`` for every interval j, shape (n-1, n_nodes)."""
    n = len(values)
    out = np.empty((n - 1, len(offsets)))
    if any(s != 0.0 for s in offsets):
        n_pad = sfft.next_fast_len(2 * n, real=True)
        spec = sfft.rfft(values, n_pad)
    for i, s in enumerate(offsets):
        if s == 0.0:
            out[:, i] = values[:-1]
        else:
            out[:, i] = sfft.irfft(spec * _ramp(n_pad, s), n_pad)[: n - 1]
    return out


def node_values_adjoint(g: np.ndarray, offsets) -> np.ndarray:
    """Transpose of :func:`node_values`: maps (n-1, n_nodes) cotangents to n samples."""
    n = g.shape[0] + 1
    out = np.zeros(n)
    n_pad = sfft.next_fast_len(2 * n, real=True)
    acc = np.zeros(n_pad // 2 + 1, dtype=complex)
    for i, s in enumerate(offsets):
        if s == 0.0:
            out[:-1] += g[:, i]
        else:
            acc += sfft.rfft(g[:, i], n_pad) * np.conj(_ramp(n_pad, s))
    if np.any(acc):
        out += sfft.irfft(acc, n_pad)[:n]
    return out


def coupling_table(values: np.ndarray, p: SystemParams, sch: Scheme) -> np.ndarray:
    """Coupling x = -mu_d * E for every factor of every interval, shape (n-1, K)."""
    nodes = node_values(values, sch.offsets)
    if sch.coef.shape == (1, 1):
        return -p.mu_d * nodes
    return nodes @ (-p.mu_d * sch.coef.T)


def _check_finite(values: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise PropagationError(f"non-finite field sample at step {int(bad[0])}")


@dataclass(frozen=True, eq=False)
class KernelSetup:
    """Everything the compiled propagator needs besides the coupling table."""

    coef: np.ndarray
    x_max: float
    diag: np.ndarray
    h: float

    @classmethod
    def build(cls, p: SystemParams, grid: TimeGrid, sch: Scheme) -> "KernelSetup":
        diag = p.energies * sch.diag_scale
        h = grid.dt * sch.h_frac
        coef, x_max = propagator_series(*map(float, diag), float(h))
        return cls(coef, x_max, diag, h)

    def args(self):
        return self.coef, self.x_max, self.diag, self.h


def _prepare(f: SampledField, p: SystemParams, stepper: str, substeps: int):
    _check_finite(f.values)
    sch = scheme(stepper, substeps)
    X = coupling_table(f.values, p, sch)
    return sch, X, KernelSetup.build(p, f.grid, sch)


def _initial(psi0) -> np.ndarray:
    if psi0 is None:
        return basis_state("g")
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (3,) or not math.isclose(np.vdot(psi0, psi0).real, 1.0, abs_tol=1e-10):
        raise ConfigurationError("initial state must be a normalized 3-vector")
    return psi0


def propagate_3ln(f: SampledField, p: SystemParams, psi0=None, *, history: bool = True,
                  stepper: str = "cf4", substeps: int = 2):
    """Numerically exact ladder dynamics.

    Returns
    -------
    psi : ndarray
        State at the last grid point.
    hist : PopulationHistory or None
        Populations at every grid point when ``history`` is true.
    """
    psi0 = _initial(psi0)
    _, X, setup = _prepare(f, p, stepper, substeps)
    pops = np.empty((f.grid.n_steps if history else 0, 3))
    psi = _kernels.propagate(*setup.args(), X, psi0, pops)
    hist = None
    if history:
        hist = PopulationHistory(f.grid, pops[:, 0], pops[:, 1], pops[:, 2])
    return psi, hist


def _magnus_generator(theta_sg, theta_es) -> np.ndarray:
    n = len(theta_sg)
    A = np.zeros((n, 3, 3), dtype=complex)
    A[:, 1, 0] = -theta_sg
    A[:, 0, 1] = -np.conj(theta_sg)
    A[:, 2, 1] = -theta_es
    A[:, 1, 2] = -np.conj(theta_es)
    return A


def propagate_3la(f: SampledField, p: SystemParams, psi0=None, *, history: bool = True):
    """First-order Magnus propagation from the running pulse areas (interaction picture)."""
    psi0 = _initial(psi0)
    _check_finite(f.values)
    th_sg, th_es = cumulative_areas(f, p)
    if not history:
        th_sg, th_es = th_sg[-1:], th_es[-1:]
    A = _magnus_generator(th_sg, th_es)
    w, v = np.linalg.eigh(A)
    coeff = np.einsum("nji,j->ni", v.conj(), psi0) * np.exp(-1j * w)
    states = np.einsum("nij,nj->ni", v, coeff)
    psi = states[-1]
    hist = None
    if history:
        pops = np.abs(states) ** 2
        hist = PopulationHistory(f.grid, pops[:, 0], pops[:, 1], pops[:, 2])
    return psi, hist


def propagate_2la(f: SampledField, p: SystemParams) -> PopulationHistory:
    """Two-level area formula P_s = sin^2 |theta_sg(t)|, no leakage to |e>."""
    _check_finite(f.values)
    th_sg, _ = cumulative_areas(f, p)
    ps = np.sin(np.abs(th_sg)) ** 2
    return PopulationHistory(f.grid, 1.0 - ps, ps, np.zeros_like(ps))


def final_fidelity(f: SampledField, p: SystemParams, model=ModelKind.THREE_LEVEL_NUMERIC,
                   stepper: str = "cf4", substeps: int = 2) -> float:
    """Bell-state population at the end of the grid, starting from |g>."""
    model = ModelKind(model)
    if model is ModelKind.THREE_LEVEL_NUMERIC:
        psi, _ = propagate_3ln(f, p, history=False, stepper=stepper, substeps=substeps)
        return float(abs(psi[1]) ** 2)
    if model is ModelKind.THREE_LEVEL_MAGNUS:
        psi, _ = propagate_3la(f, p, history=False)
        return float(abs(psi[1]) ** 2)
    return float(propagate_2la(f, p).p_s[-1])


def history(f: SampledField, p: SystemParams, model=ModelKind.THREE_LEVEL_NUMERIC,
            stepper: str = "cf4", substeps: int = 2) -> PopulationHistory:
    model = ModelKind(model)
    if model is ModelKind.THREE_LEVEL_NUMERIC:
        return propagate_3ln(f, p, stepper=stepper, substeps=substeps)[1]
    if model is ModelKind.THREE_LEVEL_MAGNUS:
        return propagate_3la(f, p)[1]
    return propagate_2la(f, p)

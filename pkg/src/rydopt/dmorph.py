"""D-MORPH gradient flow for the Bell-state population under equality constraints.

The control field follows ``dE/ds = S(t) sum_l y_l c_l(t)`` where ``c_0`` is
the functional gradient of the fidelity, ``c_1..c_M`` are the gradients of
the enabled constraint functionals, and ``y`` solves ``Lambda y = e_0`` with
the S-weighted Gram matrix ``Lambda``. The direction is S-orthogonal to every
constraint gradient, and a step ``ds`` raises the fidelity by ``ds`` to first
order.

Steps are explicit Euler in ``s``. A step is accepted only if the fidelity
does not decrease; otherwise ``ds`` is divided by ``ds_shrink`` and the step
is retried. Constraint drift of second order in ``ds`` is removed by a
periodic projection back onto the constraint surface.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal

from . import _kernels
from .propagate import KernelSetup, coupling_table, node_values_adjoint, scheme
from .pulse import (SampledField, fluence, pulse_areas, spectral_area, spectrum, zero_area)
from .system import COUPLING, PropagationError, SystemParams, basis_state
from .units import ConfigurationError, au_to_fs

TRACE_HEADER = ["iter", "F", "fluence", "theta_sg", "theta_es", "ds", "wall_ms"]
CONSTRAINT_NAMES = ("zero_area", "fluence", "spectral_area")


class GramError(ArithmeticError):
    """The regularized Gram matrix is too ill-conditioned to solve."""

    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class StagnationError(RuntimeError):
    """The step size underflowed without finding a non-decreasing step."""

    def __init__(self, message: str, trace: "OptimizationTrace", field: SampledField):
        super().__init__(message)
        self.trace = trace
        self.field = field


@dataclass(frozen=True)
class ConstraintSet:
    """Which equality constraints are enforced and their target values.

    ``targets`` holds (zero area, fluence, spectral area). A fluence target of
    ``None`` means "the fluence of the seed pulse".
    """

    zero_area: bool = True
    fluence: bool = True
    spectral_area: bool = True
    targets: tuple = (0.0, None, math.pi / 2)

    @property
    def enabled(self) -> tuple[bool, bool, bool]:
        return (self.zero_area, self.fluence, self.spectral_area)

    @property
    def count(self) -> int:
        return sum(self.enabled)

    def resolved(self, seed: SampledField) -> "ConstraintSet":
        h1, h2, h3 = self.targets
        return ConstraintSet(*self.enabled, targets=(float(h1), float(fluence(seed) if h2 is None else h2),
                                                     float(h3)))


@dataclass(frozen=True)
class DmorphConfig:
    """Step control and stopping rules.

    Parameters
    ----------
    ds_init : float
        Initial step in ``s``; equals the first-order fidelity gain per step.
    ds_shrink : float
        Factor by which ``ds`` is divided after a rejected step.
    max_iters : int
        Maximum number of accepted steps.
    target_fidelity : float
    envelope_shape : {"sin2_window", "gaussian_window"}
    gram_regularization : float
        Ridge added to the diagonal of the normalized Gram matrix, relative
        to its mean diagonal.
    reproject_every : int
        Project back onto the constraint surface every this many accepted
        steps (0 disables the schedule).
    drift_tolerance : float
        Also project any candidate whose constraints drifted by more than
        this (relative to ``max(|target|, 1)``, fluence relative to its
        target). 0 disables.
    step_growth : bool
        Multiply ``ds`` by 1.2 after 5 consecutive accepted steps.
    """

    ds_init: float = 0.01
    ds_shrink: float = 10.0
    max_iters: int = 1000
    target_fidelity: float = 0.9999
    envelope_shape: str = "sin2_window"
    gram_regularization: float = 1e-12
    reproject_every: int = 25
    drift_tolerance: float = 1e-5
    step_growth: bool = False
    max_condition: float = 1e13
    stepper: str = "cf4"
    substeps: int = 2

    def __post_init__(self):
        if not self.ds_init > 0:
            raise ConfigurationError("ds_init must be positive")
        if not self.ds_shrink > 1:
            raise ConfigurationError("ds_shrink must exceed 1")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be positive")
        if not 0 < self.target_fidelity <= 1:
            raise ConfigurationError("target_fidelity must lie in (0, 1]")
        if self.envelope_shape not in ("sin2_window", "gaussian_window"):
            raise ConfigurationError(f"unknown envelope shape {self.envelope_shape!r}")
        if self.gram_regularization < 0:
            raise ConfigurationError("gram_regularization must be non-negative")
        if self.reproject_every < 0:
            raise ConfigurationError("reproject_every must be non-negative")
        if self.drift_tolerance < 0:
            raise ConfigurationError("drift_tolerance must be non-negative")
        scheme(self.stepper, self.substeps)


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    F: float
    fluence: float
    theta_sg: float
    theta_es: float
    ds: float
    wall_ms: float
    zero_area: float
    spectral_area: float


@dataclass
class OptimizationTrace:
    records: list = field(default_factory=list)
    rejected: int = 0

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def fidelity(self) -> np.ndarray:
        return self.column("F")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for r in self.records:
                w.writerow([r.iter] + [repr(float(getattr(r, k))) for k in TRACE_HEADER[1:-1]]
                           + [f"{r.wall_ms:.3f}"])

    def to_list(self) -> list[dict]:
        return [asdict(r) for r in self.records]


def envelope_function(grid, shape: str = "sin2_window") -> np.ndarray:
    """Update envelope S(t) >= 0.

    ``"sin2_window"`` vanishes at both grid ends. ``"gaussian_window"`` is a
    Gaussian centred on the grid with standard deviation a quarter of the
    grid length.
    """
    t = grid.times
    length = grid.tf - grid.t0
    if shape == "sin2_window":
        return np.sin(np.pi * (t - grid.t0) / length) ** 2
    if shape == "gaussian_window":
        mid = 0.5 * (grid.t0 + grid.tf)
        return np.exp(-0.5 * ((t - mid) / (0.25 * length)) ** 2)
    raise ConfigurationError(f"unknown envelope shape {shape!r}")


def _fidelity_and_gradient(f: SampledField, p: SystemParams, initial, target,
                           stepper: str, substeps: int) -> tuple[float, np.ndarray]:
    sch = scheme(stepper, substeps)
    X = coupling_table(f.values, p, sch)
    setup = KernelSetup.build(p, f.grid, sch)
    F, gX = _kernels.fidelity_gradient(*setup.args(), X, initial, target)
    if not (np.isfinite(F) and np.all(np.isfinite(gX))):
        raise PropagationError("non-finite fidelity gradient")
    g_nodes = gX @ (-p.mu_d * sch.coef)
    return float(F), node_values_adjoint(g_nodes, sch.offsets)


def objective_gradient(f: SampledField, p: SystemParams, initial=None, target=None, *,
                       stepper: str = "cf4", substeps: int = 2) -> np.ndarray:
    """Functional derivative dF/dE(t_j) of ``F = |<target|U(T)|initial>|^2``.

    This is the exact derivative of the discrete propagator divided by the
    trapezoid weights, so ``sum_j w_j g_j dE_j`` is the first-order change of
    F for any perturbation ``dE``.
    """
    initial = basis_state("g") if initial is None else np.asarray(initial, dtype=complex)
    target = basis_state("s") if target is None else np.asarray(target, dtype=complex)
    _, g = _fidelity_and_gradient(f, p, initial, target, stepper, substeps)
    return g / f.grid.weights()


def fidelity_and_gradient(f: SampledField, p: SystemParams, initial=None, target=None, *,
                          stepper: str = "cf4", substeps: int = 2) -> tuple[float, np.ndarray]:
    """Return F and the functional gradient of :func:`objective_gradient` in one pass."""
    initial = basis_state("g") if initial is None else np.asarray(initial, dtype=complex)
    target = basis_state("s") if target is None else np.asarray(target, dtype=complex)
    F, g = _fidelity_and_gradient(f, p, initial, target, stepper, substeps)
    return F, g / f.grid.weights()


def commutator_gradient(f: SampledField, p: SystemParams, initial=None, target=None, *,
                        stepper: str = "cf4", substeps: int = 2) -> np.ndarray:
    """Continuum functional derivative from the Heisenberg-picture dipole.

    With ``mu(t) = U(t)^dagger mu U(t)`` and ``O = U(T)^dagger |f><f| U(T)``
    the derivative is ``-Im Tr([|i><i|, O] mu(t))``. It agrees with
    :func:`objective_gradient` up to the time discretization.
    """
    initial = basis_state("g") if initial is None else np.asarray(initial, dtype=complex)
    target = basis_state("s") if target is None else np.asarray(target, dtype=complex)
    sch = scheme(stepper, substeps)
    X = coupling_table(f.values, p, sch)
    setup = KernelSetup.build(p, f.grid, sch)
    cols = [_kernels.propagate_states(*setup.args(), X, basis_state(k)) for k in "gse"]
    U = np.stack(cols, axis=2)  # U[j] = U(t_j, t_0)
    UT = U[-1]
    O = UT.conj().T @ np.outer(target, target.conj()) @ UT
    P = np.outer(initial, initial.conj())
    comm = P @ O - O @ P
    mu = p.mu_d * COUPLING
    mu_t = np.einsum("nki,kl,nlj->nij", U.conj(), mu, U)
    return -np.einsum("ij,nji->n", comm, mu_t).imag


def constraint_gradients(f: SampledField, p: SystemParams, cs: ConstraintSet) -> list[np.ndarray]:
    """Gradients of the enabled constraints, in the order zero area, fluence, spectral area."""
    out = []
    if cs.zero_area:
        out.append(np.ones(f.grid.n_steps))
    if cs.fluence:
        out.append(2.0 * f.values)
    if cs.spectral_area:
        out.append(p.mu_d * np.cos(p.omega_sg * f.times))
    return out


def constraint_values(f: SampledField, p: SystemParams, cs: ConstraintSet) -> np.ndarray:
    vals = (zero_area(f), fluence(f), spectral_area(f, p))
    return np.array([v for v, on in zip(vals, cs.enabled) if on])


def _targets(cs: ConstraintSet) -> np.ndarray:
    return np.array([t for t, on in zip(cs.targets, cs.enabled) if on], dtype=float)


def gram_matrix(vectors, S: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Lambda_lm = int S c_l c_m dt by trapezoid quadrature."""
    C = np.asarray(vectors)
    lam = (C * (S * weights)) @ C.T
    return 0.5 * (lam + lam.T)


def projected_direction(gradient: np.ndarray, cgrads, S: np.ndarray, weights: np.ndarray,
                        regularization: float = 1e-12, max_condition: float = 1e13) -> np.ndarray:
    """``sum_l y_l c_l`` with ``Lambda y = e_0``.

    The Gram matrix is assembled for basis vectors scaled to unit S-norm, so
    the ridge acts evenly on constraints whose natural scales differ by many
    orders of magnitude.
    """
    C = np.vstack([gradient] + list(cgrads))
    lam = gram_matrix(C, S, weights)
    d = np.sqrt(np.diag(lam))
    if np.any(d == 0):
        raise GramError("a basis vector vanishes under the envelope", math.inf)
    lam_n = lam / np.outer(d, d)
    m = lam_n.shape[0]
    lam_n[np.diag_indices(m)] += regularization * np.trace(lam_n) / m
    cond = np.linalg.cond(lam_n)
    if not cond <= max_condition:
        raise GramError(f"Gram matrix condition number {cond:.3e} exceeds {max_condition:.1e}", cond)
    e0 = np.zeros(m)
    e0[0] = 1.0
    # with D = diag(d): (D^-1 Lambda D^-1) (D y) = D^-1 e_0
    y = np.linalg.solve(lam_n, e0 / d[0]) / d
    return y @ C


def dmorph_step(f: SampledField, gradient: np.ndarray, cgrads, S: np.ndarray, ds: float,
                regularization: float = 1e-12) -> SampledField:
    """One explicit Euler step ``E + ds S direction``."""
    w = f.grid.weights()
    direction = projected_direction(gradient, cgrads, S, w, regularization)
    return f.with_values(f.values + ds * S * direction)


def constraint_drift(f: SampledField, p: SystemParams, cs: ConstraintSet) -> np.ndarray:
    """Deviation of each enabled constraint from its target.

    Fluence is measured relative to its target, the two areas relative to
    ``max(|target|, 1)``.
    """
    names = [n for n, on in zip(CONSTRAINT_NAMES, cs.enabled) if on]
    targets = _targets(cs)
    scale = np.array([abs(t) if n == "fluence" else max(abs(t), 1.0) for n, t in zip(names, targets)])
    return np.abs(constraint_values(f, p, cs) - targets) / scale


def project(f: SampledField, p: SystemParams, cs: ConstraintSet, S: np.ndarray,
            tol: float = 1e-14, max_iter: int = 20) -> SampledField:
    """Move ``f`` onto the constraint surface along ``S`` times the constraint gradients.

    Newton iteration on ``h(E + S sum_m a_m c_m(E)) = targets``; the linear
    constraints are met after one iteration and the fluence converges
    quadratically.
    """
    if cs.count == 0:
        return f
    targets = _targets(cs)
    scale = np.maximum(np.abs(targets), 1.0)
    w = f.grid.weights()
    for _ in range(max_iter):
        resid = constraint_values(f, p, cs) - targets
        if np.all(np.abs(resid) <= tol * scale):
            break
        C = np.asarray(constraint_gradients(f, p, cs))
        J = gram_matrix(C, S, w)
        a = np.linalg.solve(J, -resid)
        f = f.with_values(f.values + S * (a @ C))
    return f


def _record(it, F, f, p, ds, t_start) -> TraceRecord:
    areas = pulse_areas(f, p)
    return TraceRecord(it, F, fluence(f), abs(areas.theta_sg), abs(areas.theta_es), ds,
                       1e3 * (time.perf_counter() - t_start), zero_area(f), spectral_area(f, p))


def optimize(seed_pulse: SampledField, p: SystemParams, cs: ConstraintSet | None = None,
             cfg: DmorphConfig | None = None, *, initial=None, target=None,
             callback=None) -> tuple[SampledField, OptimizationTrace]:
    """Maximize the Bell-state population starting from ``seed_pulse``.

    The seed is first projected onto the constraint surface; iteration 0 of
    the trace describes that projected seed.

    Raises
    ------
    StagnationError
        If ``ds`` falls below ``1e-15 * ds_init``; the exception carries the
        trace and the best field so far.
    """
    cs = (cs or ConstraintSet()).resolved(seed_pulse)
    cfg = cfg or DmorphConfig()
    initial = basis_state("g") if initial is None else np.asarray(initial, dtype=complex)
    target = basis_state("s") if target is None else np.asarray(target, dtype=complex)
    S = envelope_function(seed_pulse.grid, cfg.envelope_shape)
    w = seed_pulse.grid.weights()
    t_start = time.perf_counter()

    def evaluate(f):
        F, g = _fidelity_and_gradient(f, p, initial, target, cfg.stepper, cfg.substeps)
        return F, g / w

    f = project(seed_pulse, p, cs, S)
    F, grad = evaluate(f)
    trace = OptimizationTrace()
    ds = cfg.ds_init
    trace.append(_record(0, F, f, p, ds, t_start))
    streak = 0
    for it in range(1, cfg.max_iters + 1):
        if F >= cfg.target_fidelity:
            break
        direction = projected_direction(grad, constraint_gradients(f, p, cs), S, w,
                                        cfg.gram_regularization, cfg.max_condition)
        while True:
            cand = f.with_values(f.values + ds * S * direction)
            scheduled = cfg.reproject_every and it % cfg.reproject_every == 0
            if scheduled or (cfg.drift_tolerance and
                             np.any(constraint_drift(cand, p, cs) > cfg.drift_tolerance)):
                cand = project(cand, p, cs, S)
            F_new, g_new = evaluate(cand)
            if F_new >= F:
                break
            trace.rejected += 1
            streak = 0
            ds /= cfg.ds_shrink
            if ds < 1e-15 * cfg.ds_init:
                raise StagnationError(f"step size underflow at iteration {it}", trace, f)
        f, F, grad = cand, F_new, g_new
        trace.append(_record(it, F, f, p, ds, t_start))
        if callback is not None:
            callback(trace.records[-1])
        streak += 1
        if cfg.step_growth and streak >= 5:
            ds *= 1.2
            streak = 0
    return f, trace


def analyze_structure(f: SampledField, p: SystemParams | None = None,
                      threshold: float = 0.2) -> tuple[int, float]:
    """Count envelope maxima above ``threshold`` of the global peak.

    Returns the number of sub-pulses and the separation of the two strongest
    ones (0 for fewer than two).
    """
    env = np.abs(signal.hilbert(f.values))
    top = env.max()
    if top == 0.0:
        return 0, 0.0
    peaks, props = signal.find_peaks(env, height=threshold * top, prominence=0.05 * top)
    if len(peaks) < 2:
        return len(peaks), 0.0
    two = peaks[np.argsort(props["peak_heights"])[-2:]]
    return len(peaks), float(abs(f.times[two[1]] - f.times[two[0]]))


def save_result(f: SampledField, trace: OptimizationTrace, p: SystemParams, cs: ConstraintSet,
                cfg: DmorphConfig, prefix, seed_pulse: SampledField | None = None) -> dict:
    """Write ``<prefix>_pulse.csv``, ``<prefix>_trace.csv`` and ``<prefix>.json``."""
    prefix = str(prefix)
    f.to_csv(prefix + "_pulse.csv")
    trace.to_csv(prefix + "_trace.csv")
    n_sub, sep = analyze_structure(f, p)
    residuals = constraint_values(f, p, cs) - _targets(cs)
    doc = {
        "schema_version": 1,
        "config": asdict(cfg),
        "constraints": {"enabled": dict(zip(CONSTRAINT_NAMES, cs.enabled)),
                        "targets": list(cs.targets),
                        "residuals": [float(r) for r in residuals]},
        "final_fidelity": trace.records[-1].F,
        "rejected_steps": trace.rejected,
        "structure": {"n_subpulses": n_sub, "separation_fs": float(au_to_fs(sep)),
                      "separation_over_pi_vdd": sep * p.vdd / math.pi if p.vdd else None},
        "trace": trace.to_list(),
    }
    with open(prefix + ".json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    write_spectra(prefix + "_spectra.csv", f, seed_pulse)
    return doc


def write_spectra(path, f: SampledField, seed_pulse: SampledField | None = None) -> None:
    """Spectral magnitudes of the optimized (and optionally seed) pulse, positive frequencies."""
    omega, amp = spectrum(f)
    keep = omega >= 0
    cols = [omega[keep], np.abs(amp[keep])]
    header = ["omega_au", "abs_optimized"]
    if seed_pulse is not None:
        _, amp0 = spectrum(seed_pulse)
        cols.append(np.abs(amp0[keep]))
        header.append("abs_seed")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])

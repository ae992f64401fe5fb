"""Monte Carlo ensembles over noise realizations, parameter sweeps and fits.

Realization ``r`` of every sweep point draws from the same random stream
(common random numbers), so differences between points reflect the physics
rather than sampling noise. Work is split into chunks of realizations that
run on a thread pool; the compiled propagator releases the GIL, and results
are written into pre-allocated slots so the reduction order never depends on
scheduling.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .noise import Channel, NoiseKind, NoiseRealization, NoiseSpec, apply_noise, generate
from .propagate import KernelSetup, ModelKind, coupling_table, final_fidelity, scheme
from .pulse import SampledField, bandwidth_ratio, envelope, gaussian_pulse, symmetric_grid
from .system import PropagationError, SystemParams
from .units import ConfigurationError, au_to_fs

CSV_HEADER = ["tau_fs", "dw_over_vdd", "noise_kind", "channel", "alpha", "model",
              "mean_F", "std_F", "n", "seed", "wall_ms"]


class FitError(ArithmeticError):
    """Raised when a fit has a rank-deficient design."""


@dataclass(frozen=True)
class SweepConfig:
    """Grid of noise amplitudes and pulse widths to simulate.

    Parameters
    ----------
    taus : sequence of float
        Gaussian widths in atomic units. For a pulse read from file this is
        only used to label rows and to compute the bandwidth ratio.
    noise : NoiseSpec
        Template noise process; its ``epsilon`` is replaced by each alpha.
    alphas : sequence of float
        Non-negative, ascending noise amplitudes.
    n_realizations : int
    model : ModelKind
    pulse_source : {"gaussian", "from_file"}
    pulse : SampledField, optional
        Base pulse when ``pulse_source`` is ``"from_file"``.
    """

    taus: tuple
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    alphas: tuple = (0.0,)
    n_realizations: int = 100
    model: ModelKind = ModelKind.THREE_LEVEL_NUMERIC
    pulse_source: str = "gaussian"
    pulse: SampledField | None = None
    n_steps: int = 10_000
    span: float = 4.0
    max_phase_step: float | None = 0.8
    stepper: str = "cf4"
    substeps: int = 2

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        try:
            object.__setattr__(self, "model", ModelKind(self.model))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if not self.taus or any(t <= 0 for t in self.taus):
            raise ConfigurationError("taus must be a non-empty list of positive widths")
        if not self.alphas or any(a < 0 for a in self.alphas):
            raise ConfigurationError("alphas must be a non-empty list of non-negative values")
        if any(b < a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ConfigurationError("alphas must be ascending")
        if self.n_realizations < 2:
            raise ConfigurationError("n_realizations must be at least 2")
        if self.pulse_source not in ("gaussian", "from_file"):
            raise ConfigurationError(f"unknown pulse source {self.pulse_source!r}")
        if self.max_phase_step is not None and self.max_phase_step < 0:
            raise ConfigurationError("max_phase_step must be non-negative")
        if self.pulse_source == "from_file" and self.pulse is None:
            raise ConfigurationError("pulse_source 'from_file' needs a pulse")
        scheme(self.stepper, self.substeps)

    def base_pulse(self, tau: float, p: SystemParams) -> SampledField:
        if self.pulse_source == "from_file":
            return self.pulse
        n = resolved_steps(tau, p, self.n_steps, self.span, self.max_phase_step)
        return gaussian_pulse(symmetric_grid(tau, n, self.span), tau, p)


def resolved_steps(tau: float, p: SystemParams, n_steps: int, span: float = 4.0,
                   max_phase_step: float | None = 0.8) -> int:
    """Grid size of at least ``n_steps`` whose carrier phase advance per step is at most ``max_phase_step``.

    Long pulses on a fixed number of points under-sample the optical carrier;
    ``None`` or 0 keeps ``n_steps`` unchanged.
    """
    if not max_phase_step:
        return int(n_steps)
    needed = math.ceil(p.omega_sg * 2 * span * tau / max_phase_step) + 1
    return max(int(n_steps), needed)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    mean_fidelity: float
    std_fidelity: float
    fidelities: np.ndarray
    tau: float
    alpha: float
    kind: NoiseKind
    channel: Channel
    model: ModelKind
    seed: int
    dw_over_vdd: float
    wall_ms: float = 0.0

    @property
    def n(self) -> int:
        return len(self.fidelities)

    @property
    def standard_error(self) -> float:
        return self.std_fidelity / math.sqrt(self.n)

    def row(self) -> dict:
        return {
            "tau_fs": float(au_to_fs(self.tau)),
            "dw_over_vdd": self.dw_over_vdd,
            "noise_kind": self.kind.value,
            "channel": self.channel.value,
            "alpha": self.alpha,
            "model": self.model.value,
            "mean_F": self.mean_fidelity,
            "std_F": self.std_fidelity,
            "n": self.n,
            "seed": self.seed,
            "wall_ms": self.wall_ms,
        }


@dataclass(frozen=True)
class QuadraticFit:
    """``F(alpha) = f0 (1 - c_A alpha^2)`` with RMS misfit ``residual``."""

    f0: float
    c_A: float
    residual: float

    def __call__(self, alpha):
        return self.f0 * (1.0 - self.c_A * np.asarray(alpha) ** 2)


def _noisy(base: SampledField, r: NoiseRealization, spec: NoiseSpec, alpha: float,
           p: SystemParams, tau: float | None) -> SampledField:
    if spec.channel is Channel.AMPLITUDE:
        return apply_noise(base, r, None, alpha, 0.0)
    return apply_noise(base, None, r, 0.0, alpha, p, tau)


def _chunk_fidelities(base, spec, alpha, p, tau, cfg, indices) -> np.ndarray:
    out = np.empty(len(indices))
    sch = scheme(cfg.stepper, cfg.substeps)
    setup = KernelSetup.build(p, base.grid, sch)
    psi0 = np.array([1.0, 0.0, 0.0], dtype=complex)
    none = np.empty((0, 3))
    for k, r in enumerate(indices):
        try:
            noise = generate(spec, base.grid, r) if alpha != 0.0 else None
            f = base if noise is None else _noisy(base, noise, spec, alpha, p, tau)
            if cfg.model is ModelKind.THREE_LEVEL_NUMERIC:
                psi = _kernels.propagate(*setup.args(), coupling_table(f.values, p, sch), psi0, none)
                out[k] = psi[1].real ** 2 + psi[1].imag ** 2
            else:
                out[k] = final_fidelity(f, p, cfg.model)
        except (PropagationError, ConfigurationError) as exc:
            raise PropagationError(f"realization {r}: {exc}") from exc
        if not math.isfinite(out[k]):
            raise PropagationError(f"realization {r}: non-finite fidelity")
    return out


def _chunks(n: int, n_chunks: int) -> list[range]:
    edges = np.linspace(0, n, n_chunks + 1).astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _make_result(fid, tau, alpha, cfg, p, wall_ms) -> EnsembleResult:
    lo, hi = float(fid.min()), float(fid.max())
    if lo == hi:
        # summation rounding would otherwise leave a ~1e-18 spread
        mean, std = lo, 0.0
    else:
        mean = min(max(float(np.mean(fid)), lo), hi)
        std = float(np.std(fid, ddof=1))
    return EnsembleResult(
        mean_fidelity=mean,
        std_fidelity=std,
        fidelities=fid,
        tau=tau,
        alpha=alpha,
        kind=cfg.noise.kind,
        channel=cfg.noise.channel,
        model=cfg.model,
        seed=cfg.noise.seed,
        dw_over_vdd=bandwidth_ratio(tau, p),
        wall_ms=wall_ms,
    )


def sweep(cfg: SweepConfig, p: SystemParams, threads: int = 1,
          points: Sequence[tuple[float, float]] | None = None) -> list[EnsembleResult]:
    """Run every (tau, alpha) point of ``cfg``, tau-major.

    ``points`` restricts the run to a subset of (tau, alpha) pairs, in the
    given order.
    """
    if threads < 1:
        raise ConfigurationError("threads must be >= 1")
    if points is None:
        points = [(t, a) for t in cfg.taus for a in cfg.alphas]
    n = cfg.n_realizations
    n_chunks = max(1, min(n, 4 * threads))
    fids = [np.empty(n) for _ in points]
    wall = np.zeros(len(points))
    bases = {t: cfg.base_pulse(t, p) for t in dict.fromkeys(t for t, _ in points)}

    def task(i, idx):
        tau, alpha = points[i]
        spec = cfg.noise.with_epsilon(alpha)
        t_env = tau if cfg.pulse_source == "gaussian" else None
        start = time.perf_counter()
        fids[i][idx.start: idx.stop] = _chunk_fidelities(bases[tau], spec, alpha, p, t_env, cfg, idx)
        return i, time.perf_counter() - start

    jobs = [(i, idx) for i in range(len(points)) for idx in _chunks(n, n_chunks)]
    if threads == 1:
        done = [task(i, idx) for i, idx in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(lambda job: task(*job), jobs))
    for i, dt in done:
        wall[i] += dt
    return [_make_result(fids[i], t, a, cfg, p, 1e3 * wall[i]) for i, (t, a) in enumerate(points)]


def run_ensemble(tau: float, alpha: float, cfg: SweepConfig, p: SystemParams,
                 threads: int = 1) -> EnsembleResult:
    """Fidelity statistics of one noise configuration."""
    return sweep(cfg, p, threads, points=[(float(tau), float(alpha))])[0]


def write_csv(results: Sequence[EnsembleResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for res in results:
            row = res.row()
            w.writerow([f"{row['wall_ms']:.3f}" if k == "wall_ms" else
                        repr(row[k]) if isinstance(row[k], float) else row[k]
                        for k in CSV_HEADER])


def write_realizations(results: Sequence[EnsembleResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_fs", "alpha", "realization", "F"])
        for res in results:
            tau_fs = float(au_to_fs(res.tau))
            for r, F in enumerate(res.fidelities):
                w.writerow([repr(tau_fs), repr(res.alpha), r, repr(float(F))])


def results_json(results: Sequence[EnsembleResult], **extra) -> dict:
    return {"schema_version": 1, **extra, "results": [r.row() for r in results]}


def write_json(results: Sequence[EnsembleResult], path, **extra) -> None:
    with open(path, "w") as fh:
        json.dump(results_json(results, **extra), fh, indent=2)
        fh.write("\n")


def fit_quadratic(results: Sequence[EnsembleResult] | None = None, *, alphas=None,
                  means=None) -> QuadraticFit:
    """Least-squares fit of ``F0 (1 - c_A alpha^2)`` to mean fidelities.

    Pass either ensemble results at one tau or raw ``alphas`` and ``means``.
    The model is linear in ``(F0, F0 c_A)`` so the fit is a 2-column
    least-squares solve.
    """
    if results is not None:
        alphas = [r.alpha for r in results]
        means = [r.mean_fidelity for r in results]
    a = np.asarray(alphas, dtype=float)
    y = np.asarray(means, dtype=float)
    if a.shape != y.shape or a.size < 3:
        raise FitError("quadratic fit needs at least three (alpha, F) points")
    A = np.column_stack([np.ones_like(a), -(a**2)])
    if np.linalg.matrix_rank(A) < 2:
        raise FitError("degenerate design: all alphas give the same regressor")
    (f0, f0c), *_ = np.linalg.lstsq(A, y, rcond=None)
    if f0 == 0.0:
        raise FitError("fitted F0 is zero")
    resid = float(np.sqrt(np.mean((A @ np.array([f0, f0c]) - y) ** 2)))
    return QuadraticFit(float(f0), float(f0c / f0), resid)


DURATION_CONVENTIONS = ("tau", "fwhm", "window")


def pulse_duration(f: SampledField, convention: str = "tau") -> float:
    """Duration of a pulse from its envelope.

    ``"tau"`` is the Gaussian width that reproduces the second moment of the
    intensity envelope, ``"fwhm"`` the full width at half maximum of the
    field envelope and ``"window"`` the length of the time grid.
    """
    if convention == "window":
        return f.grid.tf - f.grid.t0
    env = envelope(f)
    if not np.any(env > 0):
        raise ConfigurationError("pulse duration is undefined for a zero field")
    t = f.times
    w = f.grid.weights()
    if convention == "tau":
        inten = env**2
        norm = np.sum(w * inten)
        mean = np.sum(w * inten * t) / norm
        var = np.sum(w * inten * (t - mean) ** 2) / norm
        # intensity of exp(-t^2 / 2 tau^2) has variance tau^2 / 2
        return float(math.sqrt(2.0 * var))
    if convention == "fwhm":
        above = np.flatnonzero(env >= 0.5 * env.max())
        return float(t[above[-1]] - t[above[0]])
    raise ConfigurationError(f"unknown duration convention {convention!r}; "
                             f"choose from {DURATION_CONVENTIONS}")


def predict_breakdown(f: SampledField, p: SystemParams, duration: float | None = None,
                      convention: str = "tau") -> float:
    """Critical amplitude-noise level ``1 / (Omega_peak T)``.

    ``Omega_peak`` is ``mu_d`` times the peak of the field envelope. ``T`` is
    ``duration`` when given, otherwise it is measured from the pulse with
    :func:`pulse_duration`.
    """
    omega_peak = p.mu_d * float(envelope(f).max())
    if omega_peak == 0.0:
        raise ConfigurationError("breakdown estimate is undefined for a zero field")
    T = pulse_duration(f, convention) if duration is None else float(duration)
    if not T > 0:
        raise ConfigurationError("pulse duration must be positive")
    return 1.0 / (omega_peak * T)


def with_noise(cfg: SweepConfig, **changes) -> SweepConfig:
    """Copy of ``cfg`` with fields of its noise template replaced."""
    return replace(cfg, noise=replace(cfg.noise, **changes))

"""Unit-variance white, pink (1/f) and Ornstein-Uhlenbeck noise, and noisy fields.

Realizations are reproducible: the random stream is derived from
``(seed, realization_index, channel)`` only, so any subset of realizations can
be generated in any order or in parallel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import fft as sfft
from scipy import signal

from .pulse import SampledField, TimeGrid, gaussian_envelope
from .system import SystemParams
from .units import ConfigurationError


class NoiseKind(str, Enum):
    WHITE = "white"
    PINK = "pink"
    OU = "ou"


class Channel(str, Enum):
    AMPLITUDE = "amplitude"
    PHASE = "phase"


_CHANNEL_TAG = {Channel.AMPLITUDE: 0x414D50, Channel.PHASE: 0x504853}


@dataclass(frozen=True)
class NoiseSpec:
    """Noise process and the channel it drives.

    ``epsilon`` is the dimensionless noise amplitude (alpha in sweeps),
    ``beta`` the pink exponent and ``tau_c`` the OU correlation time (a.u.).
    """

    kind: NoiseKind = NoiseKind.WHITE
    channel: Channel = Channel.AMPLITUDE
    epsilon: float = 0.0
    beta: float = 1.0
    tau_c: float | None = None
    sigma: float = 1.0
    seed: int = 0
    pink_method: str = "spectral"

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", NoiseKind(self.kind))
            object.__setattr__(self, "channel", Channel(self.channel))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if not self.epsilon >= 0:
            raise ConfigurationError("epsilon must be non-negative")
        if self.kind is NoiseKind.OU and not (self.tau_c is not None and self.tau_c > 0):
            raise ConfigurationError("OU noise needs tau_c > 0")
        if self.kind is NoiseKind.PINK and not 0.5 <= self.beta <= 1.5:
            raise ConfigurationError("pink exponent beta must lie in [0.5, 1.5]")
        if self.pink_method not in ("spectral", "voss"):
            raise ConfigurationError(f"unknown pink generator {self.pink_method!r}")

    def with_epsilon(self, epsilon: float) -> "NoiseSpec":
        return replace(self, epsilon=float(epsilon))


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    grid: TimeGrid
    samples: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @classmethod
    def constant(cls, grid: TimeGrid, value: float = 1.0) -> "NoiseRealization":
        return cls(grid, np.full(grid.n_steps, float(value)))


def stream(seed: int, realization_index: int, channel) -> np.random.Generator:
    """Independent generator keyed by (seed, realization, channel)."""
    tag = _CHANNEL_TAG[Channel(channel)]
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(realization_index), tag]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _normalize(x: np.ndarray) -> np.ndarray:
    # unit sample variance; the sample mean is left as drawn
    return x / x.std()


def _pink_spectral(w: np.ndarray, dt: float, beta: float) -> np.ndarray:
    n = len(w)
    wk = sfft.rfft(w)
    f = sfft.rfftfreq(n, dt)
    gain = np.zeros_like(f)
    gain[1:] = f[1:] ** (-beta / 2)
    return sfft.irfft(wk * gain, n)


def _pink_voss(rng: np.random.Generator, n: int) -> np.ndarray:
    # row k is redrawn every 2**(k+1) samples with offset 2**k (trailing-zero schedule)
    n_rows = max(1, math.ceil(math.log2(n)))
    x = rng.standard_normal(n)
    for k in range(n_rows):
        hold = 2 ** (k + 1)
        offset = 2**k
        n_draw = (n + offset) // hold + 2
        vals = np.repeat(rng.standard_normal(n_draw), hold)
        x += vals[hold - offset: hold - offset + n]
    return x


def _ou(rng: np.random.Generator, n: int, dt: float, tau_c: float, sigma: float) -> np.ndarray:
    a = math.exp(-dt / tau_c)
    b = sigma * math.sqrt(-math.expm1(-2 * dt / tau_c))
    x0 = sigma * rng.standard_normal()
    w = rng.standard_normal(n - 1)
    rest, _ = signal.lfilter([b], [1.0, -a], w, zi=[a * x0])
    return np.concatenate(([x0], rest))


def generate(spec: NoiseSpec, grid: TimeGrid, realization_index: int = 0) -> NoiseRealization:
    """Draw one unit-variance realization of ``spec`` on ``grid``.

    Every realization is scaled to unit sample variance on its own
    (per-shot normalization). Pink noise has its DC bin removed before the
    inverse transform, so its sample mean is zero.
    """
    n = grid.n_steps
    if n < 8:
        raise ConfigurationError("noise generation needs at least 8 grid points")
    rng = stream(spec.seed, realization_index, spec.channel)
    if spec.kind is NoiseKind.WHITE:
        x = rng.standard_normal(n)
    elif spec.kind is NoiseKind.PINK:
        if spec.pink_method == "voss":
            x = _pink_voss(rng, n)
        else:
            x = _pink_spectral(rng.standard_normal(n), grid.dt, spec.beta)
    else:
        x = _ou(rng, n, grid.dt, spec.tau_c, spec.sigma)
    return NoiseRealization(grid, _normalize(x))


def periodogram(x: NoiseRealization) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram with angular frequency axis (a.u.)."""
    f, pxx = signal.periodogram(x.samples, fs=1.0 / x.grid.dt, detrend=False)
    return 2 * np.pi * f, pxx


def psd_slope(freqs: np.ndarray, psd: np.ndarray, decades: float = 2.0) -> float:
    """Log-log slope of a PSD fitted over the central ``decades`` of positive frequency."""
    keep = (freqs > 0) & (psd > 0)
    lf = np.log10(freqs[keep])
    lp = np.log10(psd[keep])
    mid = 0.5 * (lf.min() + lf.max())
    sel = np.abs(lf - mid) <= decades / 2
    slope, _ = np.polyfit(lf[sel], lp[sel], 1)
    return float(slope)


def autocorrelation(x: np.ndarray, max_lag: int, center: bool = True) -> np.ndarray:
    """Normalized autocorrelation for lags 0..max_lag.

    ``center=False`` skips the mean subtraction, which removes its
    ``O(tau_c / T)`` downward bias when the process is known to be zero-mean.
    """
    x = np.asarray(x, dtype=float)
    if center:
        x = x - np.mean(x)
    n = len(x)
    spec = sfft.rfft(x, 2 * n)
    acf = sfft.irfft(spec * np.conj(spec), 2 * n)[: max_lag + 1]
    acf /= n - np.arange(max_lag + 1)
    return acf / acf[0]


def fit_correlation_time(x: np.ndarray, dt: float, max_lag: int, center: bool = False) -> float:
    """Least-squares fit of exp(-k dt / tau_c) to the empirical autocorrelation.

    A 2-D ``x`` is read as one realization per row; their autocorrelations
    are averaged before the fit. The process is taken to be zero-mean unless
    ``center`` is set.
    """
    from scipy.optimize import curve_fit

    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        acf = np.mean([autocorrelation(row, max_lag, center) for row in x], axis=0)
    else:
        acf = autocorrelation(x, max_lag, center)
    lags = np.arange(max_lag + 1) * dt
    (tau_c,), _ = curve_fit(lambda t, tc: np.exp(-t / tc), lags, acf, p0=[lags[-1] / 3])
    return float(tau_c)


def apply_noise(f: SampledField, amp: NoiseRealization | None, phase: NoiseRealization | None,
                eps_A: float, eps_phi: float, p: SystemParams | None = None,
                tau: float | None = None) -> SampledField:
    """Apply amplitude and carrier-phase noise to a real field.

    With ``tau`` given, the field is taken to be the Gaussian baseline pulse and
    phase noise re-synthesizes it from its analytic envelope. Otherwise the
    carrier phase is perturbed through the analytic signal of ``f``.
    """
    for r in (amp, phase):
        if r is not None and r.grid != f.grid:
            raise ValueError("noise realization grid does not match the field grid")
    values = f.values
    if phase is not None and eps_phi != 0.0:
        t = f.times
        dphi = eps_phi * phase.samples
        if tau is not None:
            if p is None:
                raise ValueError("analytic envelope needs SystemParams")
            values = gaussian_envelope(t, tau, p) * np.cos(p.omega_sg * t + dphi)
        else:
            values = np.real(signal.hilbert(values) * np.exp(1j * dphi))
    if amp is not None and eps_A != 0.0:
        values = values * (1.0 + eps_A * amp.samples)
    if values is f.values:
        return f
    return f.with_values(values)

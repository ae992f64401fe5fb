import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rydopt.pulse import (SampledField, TimeGrid, bandwidth_ratio, cumulative_areas, envelope,
                          fluence, gaussian_pulse, peak_rabi_frequency, pulse_areas, spectral_fwhm,
                          spectrum, symmetric_grid, zero_area)
from rydopt.system import DEFAULT_PARAMS as P
from rydopt.units import ConfigurationError, femtoseconds

from conftest import gaussian


def test_grid_invariants():
    g = symmetric_grid(10.0, 11)
    assert (g.t0, g.tf) == (-40.0, 40.0)
    assert g.dt == pytest.approx(8.0)
    np.testing.assert_allclose(np.diff(g.times), 8.0)
    with pytest.raises(ConfigurationError):
        TimeGrid(1.0, 0.0, 10)


def test_field_validation():
    g = symmetric_grid(1.0, 8)
    with pytest.raises(ConfigurationError):
        SampledField(g, np.zeros(7))
    with pytest.raises(ConfigurationError):
        SampledField(g, np.r_[np.zeros(7), np.inf])


def test_gaussian_peak_and_parity():
    f = gaussian(250, n_steps=10_001)
    tau = femtoseconds(250)
    assert f.values[5000] == pytest.approx(math.sqrt(math.pi / 2) / (P.mu_d * tau), rel=1e-15)
    np.testing.assert_allclose(f.values, f.values[::-1], rtol=0, atol=1e-12 * f.values.max())


def test_narrow_grid_warns():
    tau = femtoseconds(100)
    with pytest.warns(RuntimeWarning):
        gaussian_pulse(symmetric_grid(tau, 1000, span=3.0), tau, P)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gaussian_pulse(symmetric_grid(tau, 1000), tau, P)


@pytest.mark.parametrize("tau_fs", [100, 250, 400, 2000])
def test_theta_sg_is_quarter_cycle(tau_fs, oracle):
    n = 50_000 if tau_fs == 2000 else 10_000
    a = pulse_areas(gaussian(tau_fs, n), P)
    assert abs(a.theta_sg) == pytest.approx(math.pi / 2, rel=1e-3)
    ref = oracle["areas"][str(tau_fs)]
    assert abs(a.theta_sg) == pytest.approx(ref["abs_theta_sg"], rel=1e-6)
    # at 2 ps theta_es is a ~3e-5 truncation residue, compared in absolute terms
    assert abs(a.theta_es) == pytest.approx(ref["abs_theta_es"], rel=1e-5, abs=1e-7)


def test_zero_field_areas():
    g = symmetric_grid(1000.0, 64)
    a = pulse_areas(SampledField(g, np.zeros(64)), P)
    assert a.theta_sg == 0 and a.theta_es == 0


def test_narrow_band_theta_es_small():
    assert abs(pulse_areas(gaussian(2000, 50_000), P).theta_es) < 0.01


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_areas_linear(a, b):
    g = symmetric_grid(femtoseconds(100), 2000)
    rng = np.random.default_rng(0)
    f1 = SampledField(g, rng.standard_normal(2000) * 1e-3)
    f2 = SampledField(g, rng.standard_normal(2000) * 1e-3)
    lhs = pulse_areas(SampledField(g, a * f1.values + b * f2.values), P)
    A1, A2 = pulse_areas(f1, P), pulse_areas(f2, P)
    scale = abs(A1.theta_sg) + abs(A2.theta_sg)
    assert abs(lhs.theta_sg - (a * A1.theta_sg + b * A2.theta_sg)) < 1e-12 * scale * 10
    assert abs(lhs.theta_es - (a * A1.theta_es + b * A2.theta_es)) < 1e-12 * scale * 10


def test_real_field_conjugate_symmetry():
    f = gaussian(250, 4000)
    w = f.grid.weights()
    plus = np.sum(w * f.values * np.exp(1j * P.omega_sg * f.times))
    minus = np.sum(w * f.values * np.exp(-1j * P.omega_sg * f.times))
    assert minus == pytest.approx(np.conj(plus), rel=1e-14)


def test_cumulative_area_ends_at_total():
    f = gaussian(400)
    sg, es = cumulative_areas(f, P)
    a = pulse_areas(f, P)
    assert sg[0] == 0
    assert sg[-1] == pytest.approx(a.theta_sg, rel=1e-12)
    assert es[-1] == pytest.approx(a.theta_es, rel=1e-10)


@pytest.mark.parametrize("tau_fs", [100, 250, 400])
def test_fluence_closed_form(tau_fs, oracle):
    ref = oracle["fluence"][str(tau_fs)]
    assert fluence(gaussian(tau_fs)) == pytest.approx(ref["closed_form"], rel=1e-6)
    assert fluence(gaussian(tau_fs)) == pytest.approx(ref["mpmath"], rel=1e-6)


def test_fluence_quadratic_and_zero():
    f = gaussian(250, 2000)
    assert fluence(f.with_values(2 * f.values)) == pytest.approx(4 * fluence(f), rel=1e-14)
    assert fluence(f.with_values(np.zeros(2000))) == 0.0
    assert fluence(f) > 0


def test_zero_area_examples():
    g = symmetric_grid(femtoseconds(100), 1001)
    assert zero_area(SampledField(g, np.zeros(1001))) == 0.0
    odd = SampledField(g, g.times / g.tf)
    assert abs(zero_area(odd)) < 1e-12 * g.tf
    f = gaussian(250)
    tau = femtoseconds(250)
    # regression baseline: the carrier suppresses the dc component
    assert abs(zero_area(f)) < 1e-6 * fluence(f) * tau
    assert zero_area(f) == pytest.approx(4.8218258588988355e-08, rel=1e-6)


def test_spectrum_constant_and_cosine():
    g = symmetric_grid(1000.0, 1024)
    omega, amp = spectrum(SampledField(g, np.ones(1024)))
    assert omega[np.argmax(np.abs(amp))] == 0.0
    k = 37
    w0 = 2 * np.pi * k / (1024 * g.dt)
    omega, amp = spectrum(SampledField(g, np.cos(w0 * g.times)))
    peaks = omega[np.argsort(np.abs(amp))[-2:]]
    np.testing.assert_allclose(np.sort(peaks), [-w0, w0], rtol=1e-12)


@pytest.mark.parametrize("tau_fs,ratio", [(100, 4.0), (250, 1.7), (400, 1.0)])
def test_bandwidth_ratios(tau_fs, ratio):
    # dw = 1/tau gives 4.30, 1.72 and 1.07
    assert bandwidth_ratio(femtoseconds(tau_fs), P) == pytest.approx(ratio, rel=0.1)


def test_spectral_fwhm_of_gaussian():
    tau = femtoseconds(250)
    f = gaussian(250, 40_000)
    # |FT| of exp(-t^2 / 2 tau^2) has FWHM 2 sqrt(2 ln 2) / tau; resolution is one DFT bin
    bin_width = 2 * np.pi / (f.grid.tf - f.grid.t0)
    assert spectral_fwhm(f) == pytest.approx(2 * math.sqrt(2 * math.log(2)) / tau, abs=bin_width)


def test_envelope_and_rabi_frequency():
    f = gaussian(250)
    tau = femtoseconds(250)
    assert envelope(f).max() == pytest.approx(math.sqrt(math.pi / 2) / (P.mu_d * tau), rel=1e-3)
    assert peak_rabi_frequency(f, P) == pytest.approx(math.sqrt(math.pi / 2) / tau, rel=1e-3)


def test_csv_round_trip(tmp_path):
    f = gaussian(100, 500)
    f.to_csv(tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "t_fs,E_au"
    g = SampledField.from_csv(tmp_path / "p.csv")
    np.testing.assert_array_equal(g.values, f.values)
    assert g.grid.n_steps == f.grid.n_steps
    assert g.grid.dt == pytest.approx(f.grid.dt, rel=1e-12)

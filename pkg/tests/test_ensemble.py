import csv
import json
import math

import numpy as np
import pytest

from rydopt import ensemble
from rydopt.ensemble import (CSV_HEADER, FitError, SweepConfig, fit_quadratic, predict_breakdown,
                             pulse_duration, run_ensemble, sweep, with_noise, write_csv, write_json,
                             write_realizations)
from rydopt.noise import NoiseRealization, NoiseSpec
from rydopt.propagate import final_fidelity
from rydopt.system import DEFAULT_PARAMS as P, PropagationError
from rydopt.units import ConfigurationError, femtoseconds

from conftest import gaussian

TAU = femtoseconds(250)


def config(alphas=(0.0,), n=10, **kw):
    kw.setdefault("noise", NoiseSpec(seed=11))
    return SweepConfig(taus=(TAU,), alphas=alphas, n_realizations=n, **kw)


def test_zero_noise_reproduces_noise_free_run():
    res = run_ensemble(TAU, 0.0, config(), P)
    F0 = final_fidelity(gaussian(250), P)
    assert np.all(res.fidelities == res.fidelities[0])
    assert res.fidelities[0] == pytest.approx(F0, abs=1e-15)
    assert res.std_fidelity == 0.0
    assert res.mean_fidelity == res.fidelities[0]


def test_statistics_recomputable():
    res = run_ensemble(TAU, 0.5, config(n=20), P)
    assert res.mean_fidelity == pytest.approx(np.mean(res.fidelities), abs=1e-12)
    assert res.std_fidelity == pytest.approx(np.std(res.fidelities, ddof=1), abs=1e-12)
    assert res.fidelities.min() <= res.mean_fidelity <= res.fidelities.max()
    assert res.std_fidelity > 0
    assert res.standard_error == pytest.approx(res.std_fidelity / math.sqrt(20))


def test_single_point_sweep_equals_run_ensemble():
    cfg = config(alphas=(0.3,))
    (row,) = sweep(cfg, P)
    single = run_ensemble(TAU, 0.3, cfg, P)
    np.testing.assert_array_equal(row.fidelities, single.fidelities)


def test_thread_count_does_not_change_results():
    cfg = SweepConfig(taus=(TAU, femtoseconds(100)), alphas=(0.1, 0.4), n_realizations=12,
                      noise=NoiseSpec("pink", "phase", seed=3))
    a = sweep(cfg, P, threads=1)
    b = sweep(cfg, P, threads=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.fidelities, y.fidelities)
        assert x.mean_fidelity == y.mean_fidelity and x.std_fidelity == y.std_fidelity


def test_sweep_is_tau_major_with_bandwidth_column():
    cfg = SweepConfig(taus=(TAU, femtoseconds(400)), alphas=(0.0, 0.2), n_realizations=2)
    rows = sweep(cfg, P)
    assert [(round(r.tau), r.alpha) for r in rows] == [
        (round(TAU), 0.0), (round(TAU), 0.2), (round(femtoseconds(400)), 0.0),
        (round(femtoseconds(400)), 0.2)]
    assert rows[0].dw_over_vdd == pytest.approx(1 / (TAU * P.vdd))


def test_amplitude_noise_degrades_monotonically():
    # 1000-realization oracle: ordering must hold within 2 combined standard errors
    rows = sweep(config(alphas=(0.1, 0.5, 0.9), n=1000), P)
    for a, b in zip(rows, rows[1:]):
        se = math.hypot(a.standard_error, b.standard_error)
        assert b.mean_fidelity <= a.mean_fidelity + 2 * se


def test_phase_noise_hurts_more_than_amplitude_noise():
    # blockade-regime pulse; short pulses sit far from the optimum where noise can help
    tau = femtoseconds(2000)
    cfg = SweepConfig(taus=(tau,), alphas=(0.1,), n_realizations=50, noise=NoiseSpec(seed=11))
    amp = run_ensemble(tau, 0.1, cfg, P)
    phase = run_ensemble(tau, 0.1, with_noise(cfg, channel="phase"), P)
    assert phase.mean_fidelity < amp.mean_fidelity


def test_failed_realization_is_reported(monkeypatch):
    real = ensemble.generate

    def broken(spec, grid, r):
        out = real(spec, grid, r)
        if r == 3:
            return NoiseRealization(grid, np.full(grid.n_steps, np.inf))
        return out

    monkeypatch.setattr(ensemble, "generate", broken)
    with pytest.raises((PropagationError, ConfigurationError), match="realization 3"):
        run_ensemble(TAU, 0.2, config(n=5), P)


@pytest.mark.parametrize("kw", [dict(n_realizations=1), dict(alphas=(0.2, 0.1)),
                                dict(alphas=(-0.1,)), dict(taus=()), dict(pulse_source="file"),
                                dict(pulse_source="from_file"), dict(model="4ln"),
                                dict(stepper="euler")])
def test_config_validation(kw):
    base = dict(taus=(TAU,), alphas=(0.0,), n_realizations=10)
    base.update(kw)
    with pytest.raises(ConfigurationError):
        SweepConfig(**base)


def test_from_file_pulse_source():
    f = gaussian(250, 4000)
    cfg = SweepConfig(taus=(TAU,), alphas=(0.0,), n_realizations=2, pulse_source="from_file",
                      pulse=f)
    (row,) = sweep(cfg, P)
    assert row.mean_fidelity == pytest.approx(final_fidelity(f, P), abs=1e-15)


def test_fit_recovers_exact_quadratic():
    a = np.array([0.0, 0.1, 0.2, 0.3])
    fit = fit_quadratic(alphas=a, means=0.99 * (1 - 0.5 * a**2))
    assert fit.f0 == pytest.approx(0.99, abs=1e-9)
    assert fit.c_A == pytest.approx(0.5, abs=1e-9)
    assert fit.residual < 1e-12
    assert fit(0.2) == pytest.approx(0.99 * (1 - 0.5 * 0.04))


def test_fit_errors():
    with pytest.raises(FitError):
        fit_quadratic(alphas=[0.1, 0.1, 0.1], means=[0.9, 0.9, 0.9])
    with pytest.raises(FitError):
        fit_quadratic(alphas=[0.0, 0.1], means=[0.9, 0.8])


def test_fit_on_blockade_regime_ensemble():
    tau = femtoseconds(2000)
    cfg = SweepConfig(taus=(tau,), alphas=(0.0, 0.1, 0.2, 0.3), n_realizations=100,
                      noise=NoiseSpec(seed=5))
    rows = sweep(cfg, P)
    fit = fit_quadratic(rows)
    se = max(r.standard_error for r in rows[1:])
    assert fit.f0 == pytest.approx(rows[0].mean_fidelity, abs=2 * se)
    assert fit.residual < 0.1 * (1 - fit.f0)
    assert fit.residual >= 0


def test_output_formats(tmp_path):
    rows = sweep(config(alphas=(0.0, 0.3), n=3), P)
    write_csv(rows, tmp_path / "s.csv")
    with open(tmp_path / "s.csv") as fh:
        table = list(csv.reader(fh))
    assert table[0] == CSV_HEADER
    assert ",".join(table[0]) == "tau_fs,dw_over_vdd,noise_kind,channel,alpha,model,mean_F,std_F,n,seed,wall_ms"
    assert float(table[1][6]) == rows[0].mean_fidelity
    assert table[2][2:6] == ["white", "amplitude", "0.3", "3ln"]
    write_json(rows, tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["schema_version"] == 1
    assert set(doc["results"][0]) == set(CSV_HEADER)
    write_realizations(rows, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "tau_fs,alpha,realization,F" and len(lines) == 7


def test_breakdown_scaling():
    f = gaussian(250)
    e = predict_breakdown(f, P)
    assert predict_breakdown(f.with_values(2 * f.values), P) == pytest.approx(e / 2, rel=1e-12)
    T = pulse_duration(f)
    assert predict_breakdown(f, P, duration=2 * T) == pytest.approx(e / 2, rel=1e-12)
    with pytest.raises(ConfigurationError):
        predict_breakdown(f.with_values(np.zeros_like(f.values)), P)
    with pytest.raises(ConfigurationError):
        pulse_duration(f, "decay")


def test_duration_conventions():
    f = gaussian(250)
    assert pulse_duration(f, "tau") == pytest.approx(TAU, rel=1e-3)
    # field-envelope FWHM of exp(-t^2/2tau^2) is 2 sqrt(2 ln 2) tau
    assert pulse_duration(f, "fwhm") == pytest.approx(2 * math.sqrt(2 * math.log(2)) * TAU, rel=1e-3)
    assert pulse_duration(f, "window") == pytest.approx(8 * TAU)
    # 1 / (sqrt(pi/2) * T/tau) for T = tau, FWHM and the 8 tau window
    expected = {"tau": 0.798, "fwhm": 0.339, "window": 0.0997}
    for conv, value in expected.items():
        assert predict_breakdown(f, P, convention=conv) == pytest.approx(value, rel=3e-3)


def test_breakdown_estimate_is_order_one_percent():
    # the full grid window is the longest duration any convention offers
    est = predict_breakdown(gaussian(250), P, convention="window")
    assert 0.003 < est < 0.03

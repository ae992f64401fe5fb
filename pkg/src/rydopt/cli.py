"""Command-line front end: ``rydopt {noise-gen,simulate,sweep,optimize,reproduce}``.

Experiments are described by an INI file with the sections listed in
:data:`SCHEMA`. Values are given in laboratory units (fs, cm^-1, Debye) and
converted to atomic units once, when the configuration is normalized. Every
key can also be set on the command line, either through a dedicated flag or
with ``--set section.key=value``; the command line wins over the file, the
file over the defaults. ``RYDOPT_SEED`` overrides the file's master seed but
not ``--seed``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .dmorph import (ConstraintSet, DmorphConfig, StagnationError, optimize, save_result)
from .ensemble import (SweepConfig, fit_quadratic, resolved_steps, sweep, write_csv, write_json,
                       write_realizations)
from .noise import (NoiseKind, NoiseSpec, apply_noise, fit_correlation_time, generate, periodogram,
                    psd_slope)
from .propagate import ModelKind, history
from .pulse import SampledField, gaussian_pulse, symmetric_grid
from .system import PropagationError, SystemParams
from .units import ConfigurationError, au_to_fs, femtoseconds

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
SCHEMA_VERSION = 1
FIGURES = ("fig2", "fig3", "fig4", "appC-moderate", "appC-high")
_DMORPH_KEYS = ("ds_init", "ds_shrink", "max_iters", "target_fidelity", "envelope_shape",
                "gram_regularization", "reproject_every", "drift_tolerance", "step_growth",
                "max_condition")

SCHEMA: dict[str, dict[str, object]] = {
    "system": {"omega0_cm": 12578.95, "mu_debye": 7.61, "vdd_cm": 12.35},
    "grid": {"tau_fs": 250.0, "n_steps": 10000, "span": 4.0, "max_phase_step": 0.8},
    "noise": {"kind": "white", "channel": "amplitude", "epsilon": 0.0, "beta": 1.0,
              "tau_c_fs": 0.0, "pink_method": "spectral", "realizations": 100},
    "propagate": {"model": "3ln", "stepper": "cf4", "substeps": 2, "realization": 0},
    "sweep": {"taus_fs": (100.0, 250.0, 400.0), "alphas": (0.0,), "n_realizations": 100,
              "model": "3ln", "pulse_source": "gaussian", "pulse_file": ""},
    "dmorph": {**{f.name: f.default for f in fields(DmorphConfig) if f.name in _DMORPH_KEYS},
               "zero_area": True, "fluence": True, "spectral_area": True,
               "theta_sg_target": math.pi / 2, "seed_file": ""},
    "run": {"master_seed": 0, "output_dir": "rydopt-out", "threads": 1,
            "dump_realizations": False},
}


def _parse_value(section: str, key: str, text: str):
    default = SCHEMA[section][key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            states = configparser.ConfigParser.BOOLEAN_STATES
            if text.lower() not in states:
                raise ValueError(f"not a boolean: {text!r}")
            return states[text.lower()]
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {key}: {exc}") from None
    return text


def read_updates(text: str, source: str = "<config>") -> dict:
    """``{(section, key): text}`` for every key present in INI ``text``."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(str(exc)) from None
    return {(section, key): value for section in parser.sections()
            for key, value in parser.items(section)}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description in laboratory units.

    ``values[section][key]`` holds every key of :data:`SCHEMA`, typed like its
    default. The accessors build the atomic-unit objects used by the library.
    """

    values: dict = field(default_factory=lambda: {s: dict(k) for s, k in SCHEMA.items()})

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        return cls().updated(read_updates(text, source))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), str(path))

    def updated(self, updates: dict) -> "ExperimentConfig":
        """Copy with ``{(section, key): text}`` applied; unknown keys are rejected."""
        values = {s: dict(k) for s, k in self.values.items()}
        for (section, key), text in updates.items():
            if section not in SCHEMA:
                raise ConfigurationError(f"unknown section [{section}]")
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
            values[section][key] = _parse_value(section, key, str(text))
        cfg = ExperimentConfig(values)
        cfg.normalized()
        return cfg

    def to_text(self) -> str:
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            lines += [f"{k} = {_format_value(v)}" for k, v in keys.items()]
            lines.append("")
        return "\n".join(lines)

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def system(self) -> SystemParams:
        s = self["system"]
        return SystemParams.from_lab_units(s["omega0_cm"], s["mu_debye"], s["vdd_cm"])

    @property
    def tau(self) -> float:
        return femtoseconds(self["grid"]["tau_fs"])

    @property
    def master_seed(self) -> int:
        return self["run"]["master_seed"]

    @property
    def output_dir(self) -> Path:
        return Path(self["run"]["output_dir"])

    @property
    def threads(self) -> int:
        return self["run"]["threads"]

    def n_steps(self, tau: float) -> int:
        g = self["grid"]
        return resolved_steps(tau, self.system, g["n_steps"], g["span"], g["max_phase_step"])

    def grid(self, tau: float | None = None):
        tau = self.tau if tau is None else tau
        return symmetric_grid(tau, self.n_steps(tau), self["grid"]["span"])

    def noise_spec(self) -> NoiseSpec:
        n = self["noise"]
        tau_c = femtoseconds(n["tau_c_fs"]) if n["tau_c_fs"] > 0 else None
        return NoiseSpec(n["kind"], n["channel"], n["epsilon"], n["beta"], tau_c,
                         seed=self.master_seed, pink_method=n["pink_method"])

    def base_pulse(self, section: str = "sweep", tau: float | None = None) -> SampledField:
        """Gaussian pulse on the configured grid, or the pulse file of ``section``."""
        path = self["sweep"]["pulse_file"] if section == "sweep" else self["dmorph"]["seed_file"]
        if section == "sweep" and self["sweep"]["pulse_source"] == "from_file" or \
                section == "dmorph" and path:
            if not path:
                raise ConfigurationError("pulse_source 'from_file' needs [sweep] pulse_file")
            return SampledField.from_csv(path)
        tau = self.tau if tau is None else tau
        return gaussian_pulse(self.grid(tau), tau, self.system)

    def sweep_config(self, load_pulse: bool = True) -> SweepConfig:
        s, g, pr = self["sweep"], self["grid"], self["propagate"]
        pulse = None
        if s["pulse_source"] == "from_file" and load_pulse:
            pulse = self.base_pulse("sweep")
        return SweepConfig(
            taus=tuple(femtoseconds(t) for t in s["taus_fs"]), noise=self.noise_spec(),
            alphas=s["alphas"], n_realizations=s["n_realizations"], model=s["model"],
            pulse_source=s["pulse_source"], pulse=pulse, n_steps=g["n_steps"], span=g["span"],
            max_phase_step=g["max_phase_step"], stepper=pr["stepper"], substeps=pr["substeps"])

    def dmorph_config(self) -> DmorphConfig:
        d, pr = self["dmorph"], self["propagate"]
        return DmorphConfig(**{k: d[k] for k in _DMORPH_KEYS}, stepper=pr["stepper"],
                            substeps=pr["substeps"])

    def constraint_set(self) -> ConstraintSet:
        d = self["dmorph"]
        return ConstraintSet(d["zero_area"], d["fluence"], d["spectral_area"],
                             targets=(0.0, None, d["theta_sg_target"]))

    def normalized(self) -> dict:
        """Every setting in atomic units, validated by the owning modules."""
        g, pr, s = self["grid"], self["propagate"], self["sweep"]
        try:
            ModelKind(pr["model"])
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        if self["noise"]["realizations"] < 1 or pr["realization"] < 0:
            raise ConfigurationError("realization counts and indices must be non-negative")
        if g["tau_fs"] <= 0 or g["span"] <= 0:
            raise ConfigurationError("tau_fs and span must be positive")
        return {
            "system": self.system,
            "tau": self.tau,
            "n_steps": g["n_steps"],
            "span": g["span"],
            "noise": self.noise_spec(),
            "propagate": dict(pr),
            "sweep": self.sweep_config(load_pulse=False) if s["pulse_source"] == "gaussian"
            else {**s, "taus": tuple(femtoseconds(t) for t in s["taus_fs"])},
            "dmorph": (self.dmorph_config(), self.constraint_set()),
            "seeds": (self["dmorph"]["seed_file"], self.master_seed),
            "output_dir": self.output_dir,
            "threads": self.threads,
        }


# command line -> (section, key)
_FLAG_KEYS = {
    "seed": ("run", "master_seed"),
    "threads": ("run", "threads"),
    "output_dir": ("run", "output_dir"),
    "dump_realizations": ("run", "dump_realizations"),
    "tau_fs": ("grid", "tau_fs"),
    "n_steps": ("grid", "n_steps"),
    "kind": ("noise", "kind"),
    "channel": ("noise", "channel"),
    "alpha": ("noise", "epsilon"),
    "beta": ("noise", "beta"),
    "tau_c_fs": ("noise", "tau_c_fs"),
    "realizations": ("noise", "realizations"),
    "realization": ("propagate", "realization"),
    "model": ("propagate", "model"),
    "taus_fs": ("sweep", "taus_fs"),
    "alphas": ("sweep", "alphas"),
    "n_realizations": ("sweep", "n_realizations"),
    "pulse_file": ("sweep", "pulse_file"),
    "max_iters": ("dmorph", "max_iters"),
    "seed_file": ("dmorph", "seed_file"),
}


def load_config(args: argparse.Namespace, base_text: str | None = None) -> ExperimentConfig:
    """Defaults, then ``base_text``, then ``--config``, then ``RYDOPT_SEED``, then flags."""
    cfg = ExperimentConfig()
    if base_text is not None:
        cfg = ExperimentConfig.from_text(base_text)
    if getattr(args, "config", None):
        cfg = cfg.updated(read_updates(Path(args.config).read_text(), args.config))
    updates = {}
    env_seed = os.environ.get("RYDOPT_SEED")
    if env_seed:
        updates[("run", "master_seed")] = env_seed
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is None or value is False:
            continue
        updates[key] = _format_value(value)
    if getattr(args, "pulse_file", None):
        updates[("sweep", "pulse_source")] = "from_file"
    if getattr(args, "paper_stepper", False):
        updates[("propagate", "stepper")] = "paper"
    for item in getattr(args, "set", None) or []:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not (sep and dot):
            raise ConfigurationError(f"--set expects section.key=value, got {item!r}")
        updates[(section, key)] = value
    return cfg.updated(updates)


def _output_dir(cfg: ExperimentConfig, sub: str | None = None) -> Path:
    out = cfg.output_dir / sub if sub else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump({"schema_version": SCHEMA_VERSION, **doc}, fh, indent=2)
        fh.write("\n")


def _write_columns(path: Path, header: list[str], columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# ---------------------------------------------------------------- noise-gen

def run_noise_gen(cfg: ExperimentConfig) -> dict:
    out = _output_dir(cfg)
    spec = cfg.noise_spec()
    grid = cfg.grid()
    n_real = cfg["noise"]["realizations"]
    samples = np.empty((n_real, grid.n_steps))
    psd_sum = None
    slopes = np.empty(n_real)
    for r in range(n_real):
        x = generate(spec, grid, r)
        samples[r] = x.samples
        freqs, psd = periodogram(x)
        psd_sum = psd if psd_sum is None else psd_sum + psd
        slopes[r] = psd_slope(freqs, psd)
    psd_mean = psd_sum / n_real
    _write_columns(out / "noise_samples.csv", ["t_fs", "sample"], [au_to_fs(grid.times), samples[0]])
    _write_columns(out / "noise_psd.csv", ["freq_au", "psd"], [freqs, psd_mean])
    slope_sd = float(slopes.std(ddof=1)) if n_real > 1 else 0.0
    doc = {"kind": spec.kind.value, "channel": spec.channel.value, "realizations": n_real,
           "n_steps": grid.n_steps, "dt_fs": float(au_to_fs(grid.dt)),
           "psd_slope": float(slopes.mean()), "psd_slope_sd": slope_sd,
           "psd_slope_of_mean": psd_slope(freqs, psd_mean)}
    print(f"psd_slope={doc['psd_slope']:.2f}±{slope_sd:.2f}")
    if spec.kind is NoiseKind.OU:
        max_lag = min(grid.n_steps - 1, int(round(3 * spec.tau_c / grid.dt)))
        tau_fit = fit_correlation_time(samples, grid.dt, max_lag)
        doc["tau_c_fs"] = cfg["noise"]["tau_c_fs"]
        doc["tau_c_fit_fs"] = float(au_to_fs(tau_fit))
        print(f"tau_c_fit_fs={doc['tau_c_fit_fs']:.4g} (configured {doc['tau_c_fs']:.4g})")
    _write_json(out / "noise.json", doc)
    return doc


# ---------------------------------------------------------------- simulate

def run_simulate(cfg: ExperimentConfig) -> dict:
    out = _output_dir(cfg)
    p = cfg.system
    pr = cfg["propagate"]
    spec = cfg.noise_spec()
    from_file = cfg["sweep"]["pulse_source"] == "from_file"
    f = cfg.base_pulse("sweep")
    if spec.epsilon > 0:
        noise = generate(spec, f.grid, pr["realization"])
        if spec.channel.value == "amplitude":
            f = apply_noise(f, noise, None, spec.epsilon, 0.0)
        else:
            f = apply_noise(f, None, noise, 0.0, spec.epsilon, p, None if from_file else cfg.tau)
    hist = history(f, p, pr["model"], pr["stepper"], pr["substeps"])
    hist.to_csv(out / "populations.csv")
    F = float(hist.p_s[-1])
    doc = {"model": pr["model"], "final_fidelity": F, "stepper": pr["stepper"],
           "substeps": pr["substeps"], "n_steps": f.grid.n_steps,
           "tau_fs": None if from_file else cfg["grid"]["tau_fs"],
           "noise": {"kind": spec.kind.value, "channel": spec.channel.value,
                     "epsilon": spec.epsilon, "realization": pr["realization"],
                     "seed": cfg.master_seed},
           "final_populations": [float(hist.p_g[-1]), F, float(hist.p_e[-1])],
           "norm_error": float(abs(hist.p_g[-1] + hist.p_s[-1] + hist.p_e[-1] - 1.0))}
    _write_json(out / "simulate.json", doc)
    print(f"F={F:.10f}")
    return doc


# ---------------------------------------------------------------- sweep

def run_sweep(cfg: ExperimentConfig, out: Path | None = None) -> list:
    out = out or _output_dir(cfg)
    scfg = cfg.sweep_config()
    results = sweep(scfg, cfg.system, threads=cfg.threads)
    write_csv(results, out / "sweep.csv")
    write_json(results, out / "sweep.json", config=cfg.to_text())
    if cfg["run"]["dump_realizations"]:
        write_realizations(results, out / "realizations.csv")
    for r in results:
        print(f"tau_fs={au_to_fs(r.tau):.6g} alpha={r.alpha:.6g} "
              f"mean_F={r.mean_fidelity:.6f} std_F={r.std_fidelity:.6f}")
    return results


def _write_fits(results, path: Path) -> None:
    rows = []
    for tau in dict.fromkeys(r.tau for r in results):
        at_tau = [r for r in results if r.tau == tau]
        if len(at_tau) < 3:
            continue
        fit = fit_quadratic(at_tau)
        rows.append((float(au_to_fs(tau)), fit.f0, fit.c_A, fit.residual))
    _write_columns(path, ["tau_fs", "F0", "c_A", "residual"], list(zip(*rows)) if rows else [[]] * 4)


# ---------------------------------------------------------------- optimize

def _finished(path: Path, cfg: ExperimentConfig) -> bool:
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError):
        return False
    return bool(doc.get("complete")) and doc.get("config_ini") == cfg.to_text()


def run_optimize(cfg: ExperimentConfig, out: Path | None = None, resume: bool = False,
                 prefix: str = "optimize"):
    """Optimize and write ``<prefix>_pulse.csv``, ``_trace.csv``, ``_areas.csv``, ``_spectra.csv`` and ``.json``.

    Returns ``(field, trace)``, or ``None`` when ``resume`` finds a finished
    run with the same configuration.
    """
    out = out or _output_dir(cfg)
    base = out / prefix
    if resume and _finished(base.with_suffix(".json"), cfg):
        print(f"{base}.json is complete for this configuration; nothing to do")
        return None
    p = cfg.system
    seed = cfg.base_pulse("dmorph")
    cs = cfg.constraint_set()
    dcfg = cfg.dmorph_config()
    try:
        f, trace = optimize(seed, p, cs, dcfg)
        complete = True
    except StagnationError as exc:
        f, trace, complete = exc.field, exc.trace, False
        _save_optimization(f, trace, p, cs.resolved(seed), dcfg, base, seed, cfg, complete)
        raise
    _save_optimization(f, trace, p, cs.resolved(seed), dcfg, base, seed, cfg, complete)
    print(f"F={trace.records[-1].F:.10f} after {len(trace) - 1} iterations "
          f"({trace.rejected} rejected)")
    return f, trace


def _save_optimization(f, trace, p, cs, dcfg, base: Path, seed, cfg, complete: bool) -> None:
    doc = save_result(f, trace, p, cs, dcfg, base, seed)
    recs = trace.records
    _write_columns(Path(f"{base}_areas.csv"),
                   ["iter", "theta_sg", "theta_es", "zero_area", "spectral_area"],
                   [[r.iter for r in recs], [r.theta_sg for r in recs], [r.theta_es for r in recs],
                    [r.zero_area for r in recs], [r.spectral_area for r in recs]])
    doc.update(schema_version=SCHEMA_VERSION, complete=complete, config_ini=cfg.to_text())
    with open(f"{base}.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------- reproduce

def scenario_text(figure_id: str) -> str:
    if figure_id not in FIGURES:
        raise ConfigurationError(f"unknown figure id {figure_id!r}; choose from {', '.join(FIGURES)}")
    return resources.files("rydopt").joinpath("scenarios").joinpath(f"{figure_id}.ini").read_text()


def _reproduce_fig4(cfg: ExperimentConfig, out: Path, resume: bool) -> None:
    res = run_optimize(cfg, out, resume)
    if res is None:
        return
    _, trace = res
    recs = trace.records
    it = [r.iter for r in recs]
    flu0 = recs[0].fluence
    _write_columns(out / "fig4_fidelity.csv", ["iter", "F"], [it, [r.F for r in recs]])
    _write_columns(out / "fig4_fluence.csv", ["iter", "fluence", "relative_change"],
                   [it, [r.fluence for r in recs], [r.fluence / flu0 - 1.0 for r in recs]])
    _write_columns(out / "fig4_areas.csv", ["iter", "theta_sg", "theta_es"],
                   [it, [r.theta_sg for r in recs], [r.theta_es for r in recs]])


def _reproduce_appc(cfg: ExperimentConfig, out: Path, resume: bool) -> None:
    res = run_optimize(cfg, out, resume)
    if res is None:
        return
    f_opt, _ = res
    p = cfg.system
    spec = cfg.noise_spec()
    pr = cfg["propagate"]
    n = cfg["sweep"]["n_realizations"]
    models = [m.value for m in ModelKind]
    ps = {m: np.zeros(f_opt.grid.n_steps) for m in models}
    for r in range(n):
        noise = generate(spec, f_opt.grid, r)
        f = apply_noise(f_opt, noise, None, spec.epsilon, 0.0)
        for m in models:
            ps[m] += history(f, p, m, pr["stepper"], pr["substeps"]).p_s
    cols = [au_to_fs(f_opt.grid.times)] + [ps[m] / n for m in models]
    _write_columns(out / "appC_populations.csv", ["t_fs"] + [f"p_s_{m}" for m in models], cols)
    results = []
    for m in models:
        scfg = SweepConfig(taus=(cfg.tau,), noise=spec, alphas=(spec.epsilon,), n_realizations=n,
                           model=m, pulse_source="from_file", pulse=f_opt,
                           stepper=pr["stepper"], substeps=pr["substeps"])
        results += sweep(scfg, p, threads=cfg.threads)
    write_csv(results, out / "appC_ensemble.csv")
    write_json(results, out / "appC_ensemble.json", config=cfg.to_text())
    for r in results:
        print(f"model={r.model.value} mean_F={r.mean_fidelity:.6f} std_F={r.std_fidelity:.6f}")


def run_reproduce(figure_id: str, args: argparse.Namespace) -> Path:
    cfg = load_config(args, scenario_text(figure_id))
    out = _output_dir(cfg, figure_id)
    (out / "config.ini").write_text(cfg.to_text())
    if figure_id in ("fig2", "fig3"):
        results = run_sweep(cfg, out)
        _write_fits(results, out / "fit.csv")
    elif figure_id == "fig4":
        _reproduce_fig4(cfg, out, args.resume)
    else:
        _reproduce_appc(cfg, out, args.resume)
    return out


# ---------------------------------------------------------------- argparse

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", help="INI experiment configuration")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="master seed (overrides RYDOPT_SEED and the file)")
    p.add_argument("--threads", type=int, help="worker threads for ensembles")
    p.add_argument("--output-dir", "-o", help="directory for CSV/JSON outputs")
    p.add_argument("--paper-stepper", action="store_true",
                   help="left-endpoint exponential stepper instead of the 4th-order default")


def _noise_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=[k.value for k in NoiseKind])
    p.add_argument("--channel", choices=["amplitude", "phase"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydopt",
        description="Bell-state generation between blockaded Rydberg atoms under laser noise.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noise-gen", help="noise realizations and their periodogram")
    _common(p)
    _noise_flags(p)
    p.add_argument("--beta", type=float, help="pink exponent")
    p.add_argument("--tau-c-fs", type=float, help="OU correlation time")
    p.add_argument("--realizations", type=int, help="realizations to average")
    p.add_argument("--tau-fs", type=float, help="pulse width setting the time grid")
    p.add_argument("--n-steps", type=int)
    p.set_defaults(func=lambda a: run_noise_gen(load_config(a)))

    p = sub.add_parser("simulate", help="one (optionally noisy) trajectory")
    _common(p)
    _noise_flags(p)
    p.add_argument("--model", choices=[m.value for m in ModelKind])
    p.add_argument("--tau-fs", type=float)
    p.add_argument("--n-steps", type=int)
    p.add_argument("--alpha", type=float, help="noise amplitude")
    p.add_argument("--realization", type=int, help="noise realization index")
    p.add_argument("--pulse-file", help="pulse CSV (t_fs,E_au) instead of a Gaussian")
    p.set_defaults(func=lambda a: run_simulate(load_config(a)))

    p = sub.add_parser("sweep", help="Monte Carlo ensembles over (tau, alpha)")
    _common(p)
    _noise_flags(p)
    p.add_argument("--taus-fs", help="comma-separated pulse widths")
    p.add_argument("--alphas", help="comma-separated noise amplitudes")
    p.add_argument("--n-realizations", type=int)
    p.add_argument("--model", choices=[m.value for m in ModelKind])
    p.add_argument("--n-steps", type=int)
    p.add_argument("--pulse-file", help="pulse CSV (t_fs,E_au) instead of Gaussians")
    p.add_argument("--dump-realizations", action="store_true",
                   help="also write every realization's fidelity")
    p.set_defaults(func=lambda a: run_sweep(_sweep_config(a)))

    p = sub.add_parser("optimize", help="constrained pulse optimization")
    _common(p)
    p.add_argument("--tau-fs", type=float, help="width of the Gaussian seed")
    p.add_argument("--n-steps", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--seed-file", help="seed pulse CSV (t_fs,E_au) instead of a Gaussian")
    p.add_argument("--resume", action="store_true",
                   help="do nothing if a finished run with this configuration exists")
    p.set_defaults(func=lambda a: run_optimize(load_config(a), resume=a.resume))

    p = sub.add_parser("reproduce", help="run a bundled scenario")
    p.add_argument("figure_id", choices=FIGURES)
    _common(p)
    p.add_argument("--dump-realizations", action="store_true")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=lambda a: run_reproduce(a.figure_id, a))
    return parser


def _sweep_config(args: argparse.Namespace) -> ExperimentConfig:
    # --model on the sweep subcommand targets the sweep section
    model = args.model
    args.model = None
    cfg = load_config(args)
    return cfg.updated({("sweep", "model"): model}) if model else cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConfigurationError, ValueError) as exc:
        print(f"rydopt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PropagationError, ArithmeticError, StagnationError) as exc:
        print(f"rydopt: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"rydopt: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

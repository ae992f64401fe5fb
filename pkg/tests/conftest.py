import json
from pathlib import Path

import numpy as np
import pytest

from rydopt.pulse import gaussian_pulse, symmetric_grid
from rydopt.system import DEFAULT_PARAMS
from rydopt.units import femtoseconds

ORACLES = json.loads((Path(__file__).parent / "oracles" / "values.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return ORACLES


@pytest.fixture(scope="session")
def p():
    return DEFAULT_PARAMS


def gaussian(tau_fs: float, n_steps: int = 10_000, p=DEFAULT_PARAMS):
    tau = femtoseconds(tau_fs)
    return gaussian_pulse(symmetric_grid(tau, n_steps), tau, p)


def smooth_random_field(grid, seed: int, scale: float, n_modes: int = 12):
    """Band-limited random field near the optical carrier, vanishing at the grid ends."""
    rng = np.random.default_rng(seed)
    t = grid.times
    u = (t - grid.t0) / (grid.tf - grid.t0)
    window = np.sin(np.pi * u) ** 2
    w = DEFAULT_PARAMS.omega_sg * (1 + 0.01 * rng.standard_normal(n_modes))
    a = rng.standard_normal(n_modes)
    ph = rng.uniform(0, 2 * np.pi, n_modes)
    return scale * window * np.sum(a[:, None] * np.cos(w[:, None] * t + ph[:, None]), axis=0)


def _reproduce(figure_id: str, out: Path) -> float:
    import time

    from rydopt.cli import main

    t0 = time.perf_counter()
    code = main(["reproduce", figure_id, "--output-dir", str(out)])
    assert code == 0
    return time.perf_counter() - t0


@pytest.fixture(scope="session")
def fig2_run(tmp_path_factory):
    """Output directory and wall time of one ``reproduce fig2`` run."""
    out = tmp_path_factory.mktemp("fig2")
    seconds = _reproduce("fig2", out)
    return out / "fig2", seconds


@pytest.fixture(scope="session")
def fig3_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig3")
    _reproduce("fig3", out)
    return out / "fig3"


def read_rows(path) -> list[dict]:
    import csv

    with open(path) as fh:
        return list(csv.DictReader(fh))


ACCEPTANCE: dict[int, str] = {}


def record_verdict(number: int, title: str, ok: bool, detail: str) -> None:
    """Store and print one PASS/FAIL line for an acceptance criterion."""
    line = f"{'PASS' if ok else 'FAIL'} {number:2d} {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])

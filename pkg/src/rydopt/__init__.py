"""Ultrafast Bell-state generation between two blockaded Rydberg atoms.

Modules
-------
units
    Conversions between laboratory and atomic units.
system
    Ladder Hamiltonian and basis states.
pulse
    Time grids, sampled fields and pulse diagnostics.
noise
    White, pink and Ornstein-Uhlenbeck noise realizations.
propagate
    Numerical, Magnus and two-level-area dynamics.
ensemble
    Monte Carlo noise ensembles, sweeps and fits.
dmorph
    Constrained gradient-flow pulse optimization.
cli
    The ``rydopt`` command.
"""
from .dmorph import ConstraintSet, DmorphConfig, optimize
from .ensemble import SweepConfig, fit_quadratic, run_ensemble, sweep
from .noise import Channel, NoiseKind, NoiseSpec, apply_noise, generate
from .propagate import ModelKind, final_fidelity, history, propagate_2la, propagate_3la, propagate_3ln
from .pulse import SampledField, TimeGrid, gaussian_pulse, pulse_areas, symmetric_grid
from .system import DEFAULT_PARAMS, SystemParams, basis_state, build_hamiltonian
from .units import ConfigurationError

__version__ = "0.1.0"

__all__ = [
    "Channel", "ConfigurationError", "ConstraintSet", "DmorphConfig", "ModelKind", "NoiseKind",
    "NoiseSpec", "DEFAULT_PARAMS", "SampledField", "SweepConfig", "SystemParams", "TimeGrid",
    "apply_noise", "basis_state", "build_hamiltonian", "final_fidelity", "fit_quadratic",
    "gaussian_pulse", "generate", "history", "optimize", "propagate_2la", "propagate_3la",
    "propagate_3ln", "pulse_areas", "run_ensemble", "sweep", "symmetric_grid",
]

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rydopt.system import (DEFAULT_PARAMS, PropagationError, SystemParams, basis_state,
                           bell_fidelity, build_hamiltonian, derived_frequencies)
from rydopt.units import ConfigurationError, au_to_wavenumber, debye


def test_degenerate_ladder():
    p = SystemParams(1.0, 1.0, 0.0)
    w_sg, w_es, _ = derived_frequencies(p)
    assert w_sg == w_es == 1.0


def test_default_transition_frequencies(oracle):
    w_sg, w_es, mu_d = derived_frequencies(DEFAULT_PARAMS)
    assert au_to_wavenumber(w_sg) == pytest.approx(12591.30, abs=1e-8)
    assert au_to_wavenumber(w_es) == pytest.approx(12566.60, abs=1e-8)
    assert au_to_wavenumber(w_sg) == pytest.approx(oracle["omega_sg_cm"], rel=1e-12)
    assert mu_d / debye(1.0) == pytest.approx(10.762, abs=5e-4)
    assert mu_d / debye(1.0) == pytest.approx(oracle["mu_d_debye"], rel=1e-12)


def test_frequency_identities():
    p = DEFAULT_PARAMS
    assert p.omega_sg + p.omega_es == pytest.approx(2 * p.omega0, rel=1e-15)
    assert p.omega_sg - p.omega_es == pytest.approx(2 * p.vdd, rel=1e-12)
    assert p.e_antisymmetric == -p.vdd


@pytest.mark.parametrize("args", [(0.0, 1.0, 0.1), (1.0, -1.0, 0.1), (1.0, 1.0, -0.1), (1.0, 1.0, 2.0)])
def test_invalid_params(args):
    with pytest.raises(ConfigurationError):
        SystemParams(*args)


def test_field_free_hamiltonian():
    h = build_hamiltonian(DEFAULT_PARAMS, 0.0)
    np.testing.assert_array_equal(h, np.diag([-DEFAULT_PARAMS.omega0, DEFAULT_PARAMS.vdd, DEFAULT_PARAMS.omega0]))


@given(st.floats(min_value=-1e-2, max_value=1e-2, allow_nan=False))
def test_hamiltonian_structure(e):
    h = build_hamiltonian(DEFAULT_PARAMS, e)
    c = -math.sqrt(2) * DEFAULT_PARAMS.mu * e
    assert h[0, 1] == h[1, 0] == h[1, 2] == h[2, 1]
    assert h[0, 1] == pytest.approx(c, rel=1e-15, abs=0)
    assert h[0, 2] == h[2, 0] == 0.0
    np.testing.assert_array_equal(h, h.T)


def test_non_finite_field_rejected():
    with pytest.raises(PropagationError):
        build_hamiltonian(DEFAULT_PARAMS, float("nan"))


def test_bell_fidelity_examples():
    assert bell_fidelity(basis_state("s")) == 1.0
    assert bell_fidelity(basis_state("g")) == 0.0
    psi = (basis_state("g") + basis_state("s")) / math.sqrt(2)
    assert bell_fidelity(psi) == pytest.approx(0.5, abs=1e-15)


@given(st.floats(min_value=0, max_value=2 * math.pi))
def test_bell_fidelity_global_phase(phi):
    psi = np.array([0.6, 0.8j, 0.0])
    assert bell_fidelity(np.exp(1j * phi) * psi) == pytest.approx(bell_fidelity(psi), abs=1e-15)

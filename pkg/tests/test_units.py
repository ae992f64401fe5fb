import math

import pytest
from hypothesis import given, strategies as st

from rydopt import units
from rydopt.units import ConfigurationError, Quantity, Unit, from_atomic, to_atomic


def test_zero_wavenumber_is_zero_energy():
    assert to_atomic(Quantity(0.0, Unit.WAVENUMBER_CM)) == 0.0


def test_transition_frequency_in_hartree(oracle):
    value = to_atomic(Quantity(12578.95, "wavenumber_cm"))
    assert value == pytest.approx(0.0573, abs=5e-5)
    assert value == pytest.approx(oracle["omega0_cm_to_au_example"], rel=1e-12)


def test_100_fs_in_atomic_time(oracle):
    value = to_atomic(Quantity(100.0, "femtosecond"))
    assert value == pytest.approx(4134.14, abs=5e-3)
    assert value == pytest.approx(oracle["fs100_to_au"], rel=1e-12)


def test_debye_factor_matches_codata(oracle):
    assert units.debye(1.0) == pytest.approx(oracle["debye_to_au"], rel=1e-12)


def test_unknown_unit_tag_rejected():
    with pytest.raises(ConfigurationError):
        to_atomic(Quantity(1.0, "parsec"))
    with pytest.raises(ConfigurationError):
        from_atomic(1.0, "furlong")


@given(st.floats(min_value=-1e8, max_value=1e8, allow_nan=False),
       st.sampled_from(list(Unit)))
def test_round_trip(value, unit):
    q = Quantity(value, unit)
    a = to_atomic(q)
    back = to_atomic(from_atomic(a, unit))
    assert back == pytest.approx(a, rel=1e-12, abs=0.0)
    assert from_atomic(a, unit).value == pytest.approx(value, rel=1e-12, abs=1e-300)


def test_conversions_are_bit_reproducible():
    assert to_atomic(Quantity(12.35, "wavenumber_cm")) == to_atomic(Quantity(12.35, "wavenumber_cm"))
    assert math.isclose(units.au_to_fs(units.femtoseconds(250.0)), 250.0, rel_tol=1e-15)

"""Cumulative panel quadrature."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from susyfd.catalog import BranchSpec, free_particle_beta
from susyfd.errors import NonintegrableSingularity
from susyfd.quadrature import CumulativeIntegral, key_from_beta


def test_integral_of_cos_is_sin():
    I = CumulativeIntegral(np.cos, 0.0)
    x = np.linspace(-12, 12, 97)
    assert np.max(np.abs(I(x) - np.sin(x))) < 1e-13


@given(a=st.floats(-8, 8), b=st.floats(-8, 8), c=st.floats(-8, 8))
def test_additivity(a, b, c):
    w = lambda t: np.exp(-0.1 * t**2) * np.cos(3 * t)
    I_a, I_b = CumulativeIntegral(w, a), CumulativeIntegral(w, b)
    assert I_a(np.array([c]))[0] == pytest.approx(I_a(np.array([b]))[0] + I_b(np.array([c]))[0], abs=1e-12)


def test_crossing_a_listed_singularity_raises():
    I = CumulativeIntegral(lambda t: 1 / t, 1.0, singularities=[0.0])
    assert I(np.array([2.0]))[0] == pytest.approx(np.log(2.0), abs=1e-13)
    with pytest.raises(NonintegrableSingularity):
        I(np.array([-1.0]))


def test_key_from_beta_is_zero_mode():
    # regular branch: beta = -k tanh(k(x + a)), zero mode proportional to cosh(k(x + a))
    beta = free_particle_beta(BranchSpec("R", -1.0, 0.3))
    key = key_from_beta(beta, 0.0)
    x = np.linspace(-5, 5, 41)
    k = np.sqrt(2.0)
    expected = np.cosh(k * (x + 0.3)) / np.cosh(k * 0.3)
    assert np.max(np.abs(key(x) / expected - 1)) < 1e-12

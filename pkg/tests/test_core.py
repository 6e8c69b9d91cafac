"""Function jets, grids, exclusion windows, pole probes and reports."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from susyfd.core import (
    ChainStep,
    Grid,
    RealFunction,
    StepKind,
    VerificationReport,
    add_derivative,
    central_fd,
    classify_singularities,
    discover_poles,
    exclusion_windows,
    is_pole,
)


def tan_fn(order: int = 0) -> RealFunction:
    def jet(x, n):
        t = np.tan(x)
        out = [t, 1 + t**2, 2 * t * (1 + t**2)]
        return out[: n + 1]

    return RealFunction(jet, order=order, singularities=[-math.pi / 2, math.pi / 2])


def sinc_raw() -> RealFunction:
    """sin(x)/x written as a bare quotient: 0/0 at the origin."""
    with np.errstate(all="ignore"):
        return RealFunction(lambda x, n: [np.sin(x) / x], order=0, removable=[0.0])


def test_central_fd_matches_analytic_derivatives():
    x = np.linspace(-2, 2, 41)
    assert np.max(np.abs(central_fd(np.sin, x, 1) - np.cos(x))) < 1e-12
    assert np.max(np.abs(central_fd(np.sin, x, 2) + np.sin(x))) < 1e-10
    with pytest.raises(ValueError):
        central_fd(np.sin, x, 3)


def test_jet_fills_missing_orders_by_differences():
    f = RealFunction.from_callable(np.exp)
    x = np.linspace(-1, 1, 11)
    j = f.jet(x, 2)
    assert len(j) == 3
    for row in j:
        assert np.max(np.abs(row - np.exp(x))) < 1e-9


def test_jet_near_pole_stays_accurate():
    f = tan_fn(order=0)
    x = np.array([math.pi / 2 - 1e-3, math.pi / 2 + 2e-3])
    d = f.deriv(x)
    exact = 1 / np.cos(x) ** 2
    assert np.max(np.abs(d / exact - 1)) < 1e-7


def test_removable_point_is_repaired():
    f = sinc_raw()
    x = np.array([-1e-9, 0.0, 1e-7, 0.02])
    with np.errstate(all="ignore"):
        v = f(x)
    exact = np.sinc(x / np.pi)
    assert np.all(np.isfinite(v))
    assert np.max(np.abs(v - exact)) < 1e-10


def test_arithmetic_and_scaling():
    f = RealFunction(lambda x, n: [np.sin(x), np.cos(x), -np.sin(x)][: n + 1], order=2)
    g = RealFunction.constant(2.0)
    x = np.linspace(0, 1, 5)
    assert np.allclose((f + g)(x), np.sin(x) + 2)
    assert np.allclose((f - g)(x), np.sin(x) - 2)
    assert np.allclose((-f).deriv(x), -np.cos(x))
    assert np.allclose((3.0 * f).deriv(x, 2), -3 * np.sin(x))
    assert (f * 2.0).order == 2


def test_add_derivative_reclassifies_candidates():
    # tan' = 1 + tan^2 keeps the poles of tan
    V = add_derivative(RealFunction.constant(0.0), tan_fn(order=2))
    assert V.singularities == tan_fn().singularities
    x = np.linspace(-1, 1, 9)
    assert np.allclose(V(x), 1 / np.cos(x) ** 2)


@given(
    poles=st.lists(st.floats(-10, 10, allow_nan=False), min_size=0, max_size=6),
    delta=st.floats(1e-3, 2.0),
)
def test_exclusion_windows_cover_poles_and_are_disjoint(poles, delta):
    wins = exclusion_windows(poles, delta)
    for s in poles:
        assert any(lo <= s - delta + 1e-12 and s + delta - 1e-12 <= hi for lo, hi in wins)
    for (a0, a1), (b0, b1) in zip(wins, wins[1:]):
        assert a1 < b0
        assert a0 < a1


def test_exclusion_windows_reject_bad_delta():
    with pytest.raises(ValueError):
        exclusion_windows([0.0], 0.0)


def test_grid_validation_and_helpers():
    g = Grid.uniform()
    assert len(g) == 3001 and g.x_min == -15 and g.x_max == 15
    assert g.delta_sing == pytest.approx(0.03)
    keep = g.mask_outside([(-1.0, 1.0)])
    assert not np.any((g.points[~keep] < -1) | (g.points[~keep] > 1))
    assert g.restrict(-1, 1).x_min >= -1
    with pytest.raises(ValueError):
        Grid(np.linspace(0, 1, 5))
    with pytest.raises(ValueError):
        Grid(np.array([0, 1, 2, 3, 4, 5, 6, 7, 7, 8.0]))


def test_discover_poles_finds_tan_poles_not_zeros():
    x = np.linspace(-4, 4, 801)
    poles = discover_poles(np.tan, x)
    assert len(poles) == 2
    assert np.allclose(poles, [-math.pi / 2, math.pi / 2], atol=1e-10)


def test_is_pole_distinguishes_pole_from_removable():
    assert is_pole(lambda x: 1 / x, 0.0)
    assert is_pole(lambda x: 1 / x**2, 0.0)
    assert not is_pole(sinc_raw(), 0.0)
    poles, removable = classify_singularities(lambda x: np.sin(x) / x + 1 / (x - 1), [0.0, 1.0])
    assert poles == [1.0] and removable == [0.0]


def test_chain_step_normalization():
    s = ChainStep("confluent", -1, param=None)
    assert s.kind is StepKind.CONFLUENT and s.derivative_route
    assert not ChainStep("simple", 1).derivative_route
    with pytest.raises(ValueError):
        ChainStep("simple", math.inf)


def test_report_pass_fail_and_skip():
    r = VerificationReport()
    r.add("a", 1e-9, 1e-6)
    assert r.passed
    r.skip("b", 1e-6, "no oracle")
    assert r.passed and len(r) == 2
    r.add("c", 1.0, 1e-6)
    assert not r.passed
    assert not r["c"].passed
    assert "FAIL" in r.format()

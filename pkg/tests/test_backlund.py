"""Finite-difference steps, the Omega recursion, chain assembly and zero modes."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from susyfd import (
    BranchSpec,
    ChainStep,
    Grid,
    assemble_potential,
    backlund_step,
    build_chain,
    free_particle_beta,
    omega_step,
    zero_mode,
    zero_potential,
)
from susyfd.core import RealFunction, add_derivative
from susyfd.errors import ChainEmpty, EqualEnergies, NonintegrableSingularity, ParityMismatch, SamePrevSolution
from susyfd.verify import compare, riccati_sup

GRID = Grid.uniform(-8, 8, 1601)


def s_and_r():
    return free_particle_beta(BranchSpec("S", -2.0)), free_particle_beta(BranchSpec("R", -0.5))


def test_second_level_from_coth_and_tanh():
    b_s, b_r = s_and_r()
    b2 = backlund_step(b_s, b_r, -2.0, -0.5, GRID)
    x = np.linspace(0.2, 6, 30)
    c = 1 / np.tanh(2 * x)
    closed = 2 * c - 3 / (2 * c - np.tanh(x))
    assert np.max(np.abs(b2(x) - closed)) < 1e-12
    # independent closed-form value at x = 1
    c1 = 1 / math.tanh(2.0)
    assert b2(np.array([1.0]))[0] == pytest.approx(2 * c1 - 3 / (2 * c1 - math.tanh(1.0)), abs=1e-14)
    assert b2(np.array([1.0]))[0] == pytest.approx(-0.2101530264121985, abs=1e-13)  # 30-digit mpmath value
    V1 = add_derivative(zero_potential(), b_s)
    assert riccati_sup(b2, V1, -0.5, GRID)[0] < 1e-8


def test_input_residual_check():
    b_s, b_r = s_and_r()
    with pytest.raises(ValueError):
        backlund_step(b_s, b_r, -2.0, -0.5, GRID, potential=RealFunction.constant(1.0))
    backlund_step(b_s, b_r, -2.0, -0.5, GRID, potential=zero_potential())


def test_step_preconditions():
    b_s, b_r = s_and_r()
    with pytest.raises(EqualEnergies):
        backlund_step(b_s, b_r, -1.0, -1.0, GRID)
    with pytest.raises(SamePrevSolution):
        backlund_step(b_r, b_r, -2.0, -0.5, GRID)
    with pytest.raises(ChainEmpty):
        build_chain(zero_potential(), [])
    with pytest.raises(EqualEnergies):
        build_chain(zero_potential(), [ChainStep("simple", -1, seed="R"), ChainStep("simple", -1, seed="S")], grid=GRID)


def test_omega_recursion_tracks_beta():
    b_s, b_r = s_and_r()
    om2 = omega_step(b_s, b_r, -2.0, -0.5, GRID)
    b2 = backlund_step(b_s, b_r, -2.0, -0.5, GRID)
    assert compare(om2, b2 + b_s, GRID)[0] < 1e-12


def test_null_branch_gives_inverse_square_barrier():
    chain = build_chain(zero_potential(), [ChainStep("simple", 0.0, seed="N")], grid=GRID)
    x = GRID.points[np.abs(GRID.points) > 0.1]
    assert np.max(np.abs(chain.current_potential(x) - 1 / x**2)) < 1e-10
    assert chain.singularities == (0.0,)


def test_one_step_regular_branch_is_poschl_teller():
    b = 0.6
    chain = build_chain(zero_potential(), [ChainStep("simple", -1.0, seed="R", shift=b)], grid=GRID)
    k = math.sqrt(2.0)
    x = GRID.points
    assert np.max(np.abs(chain.current_potential(x) + k**2 / np.cosh(k * (x + b)) ** 2)) < 1e-12
    assert chain.report.passed


def test_parity_mismatch_is_reported():
    b_s, _ = s_and_r()
    chain = build_chain(zero_potential(), [ChainStep("simple", -2.0, seed="S")], grid=GRID, verify=False)
    assert assemble_potential(chain.v0, chain) is chain.current_potential
    chain.parity_potential = chain.current_potential + RealFunction.constant(1e-3)
    with pytest.raises(ParityMismatch):
        assemble_potential(chain.v0, chain)


def test_zero_mode_of_tanh_is_cosh():
    k = 1.3
    beta = free_particle_beta(BranchSpec("R", -k**2 / 2))
    u = zero_mode(beta)
    x = np.linspace(-6, 6, 25)
    assert np.max(np.abs(u(x) / np.cosh(k * x) - 1)) < 1e-12
    flat = zero_mode(RealFunction.constant(0.0))
    assert np.all(flat(x) == 1.0)


def test_zero_mode_across_a_pole():
    beta = free_particle_beta(BranchSpec("S", -0.5))
    u = zero_mode(beta)
    x = np.array([-2.0, -0.5, 0.5, 2.0])
    # |sinh x| up to a constant on each side of the pole
    ratio = u(x) / np.abs(np.sinh(x))
    assert ratio[0] == pytest.approx(ratio[1], rel=1e-12)
    assert ratio[2] == pytest.approx(ratio[3], rel=1e-12)
    with pytest.raises(NonintegrableSingularity):
        zero_mode(beta, interval=(-1.0, 1.0))


@given(a=st.floats(-2, 2), b=st.floats(-2, 2))
def test_potential_does_not_depend_on_step_order(a, b):
    s = ChainStep("simple", -4.0, seed="S", shift=a)
    r = ChainStep("simple", -1.0, seed="R", shift=b)
    one = build_chain(zero_potential(), [s, r], grid=GRID, verify=False)
    two = build_chain(zero_potential(), [r, s], grid=GRID, verify=False)
    d, _ = compare(one.current_potential, two.current_potential, GRID)
    assert d < 1e-8


def test_omega_product_form():
    steps = [ChainStep("simple", e, seed=br) for e, br in ((-4.0, "S"), (-1.0, "R"), (-0.25, "R"))]
    chain = build_chain(zero_potential(), steps, grid=GRID, verify=False)
    omega = chain.memo["omega"]
    x = GRID.points[np.abs(GRID.points) > 0.2]
    for k in (2, 3):
        lhs = omega(k, k)(x) * (omega(k - 1, k - 1)(x) - omega(k - 1, k)(x))
        rhs = -2 * (steps[k - 2].epsilon - steps[k - 1].epsilon)
        ok = np.isfinite(lhs)
        assert np.max(np.abs(lhs[ok] - rhs)) < 1e-8 * (1 + abs(rhs))

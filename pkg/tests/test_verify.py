"""Residual referees: intertwining, factorization, eigenfunction maps and the
Wronskian oracle."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from susyfd import (
    BranchSpec,
    ChainStep,
    Grid,
    OracleSeed,
    RealFunction,
    SusyChain,
    build_chain,
    crum_oracle,
    factorization_residual,
    free_particle_beta,
    intertwining_residual,
    map_eigenfunction,
    verify_chain,
    wronskian_jet,
    zero_potential,
)
from susyfd.errors import AnnihilatedInput
from susyfd.verify import chain_oracle_seeds, compare, eigen_residual, gaussian

GRID = Grid.uniform(-10, 10, 1001)


def fn(values, order=2, **kw):
    return RealFunction(lambda x, n: values(x)[: n + 1], order=order, **kw)


def test_intertwining_for_inverse_square_barrier():
    beta = free_particle_beta(BranchSpec("N", 0.0))
    V1 = fn(lambda x: [1 / x**2, -2 / x**3, 6 / x**4], singularities=[0.0])
    grid = Grid.uniform(1, 15, 1401)
    r = intertwining_residual(V1, zero_potential(), beta, 0.0, gaussian(3.0, 1.0), grid)
    assert r < 1e-6
    assert factorization_residual(V1, beta, 0.0, gaussian(3.0, 1.0), zero_potential(), grid) < 1e-6


def test_trivial_intertwiner_has_zero_residual():
    c = RealFunction.constant(0.7)
    assert intertwining_residual(c, c, RealFunction.constant(0.0), 0.0, gaussian(0.0, 1.0), GRID) == 0.0


def test_wrong_partner_potential_is_detected():
    beta = free_particle_beta(BranchSpec("R", -0.5))
    wrong = RealFunction.constant(0.0)
    assert intertwining_residual(wrong, zero_potential(), beta, -0.5, gaussian(0.0, 1.0), GRID) > 1e-2


def test_mapped_eigenfunction():
    # psi = e^x solves H0 psi = -psi/2; A = d/dx - tanh x maps it to sech x
    beta = free_particle_beta(BranchSpec("R", -0.5))
    psi = fn(lambda x: [np.exp(x)] * 4, order=3)
    mapped = map_eigenfunction(beta, psi, GRID)
    x = GRID.points
    # e^x (1 - tanh x) cancels: the error budget grows like e^x times rounding
    assert np.all(np.abs(mapped(x) - 1 / np.cosh(x)) <= 1e-15 * (1 + np.exp(x)))
    V1 = fn(lambda x: [-1 / np.cosh(x) ** 2, 2 * np.tanh(x) / np.cosh(x) ** 2, (2 - 4 * np.sinh(x) ** 2) / np.cosh(x) ** 4])
    assert eigen_residual(V1, mapped, -0.5, GRID) < 1e-10


def test_zero_mode_input_is_annihilated():
    beta = free_particle_beta(BranchSpec("R", -0.5))
    u = fn(lambda x: [np.cosh(x), np.sinh(x), np.cosh(x), np.sinh(x)], order=3)
    with pytest.raises(AnnihilatedInput):
        map_eigenfunction(beta, u, GRID)


def test_corrupted_superpotential_fails_report():
    chain = build_chain(zero_potential(), [ChainStep("simple", -1.0, seed="R")], grid=GRID)
    assert chain.report.passed
    beta, step = chain.steps[0]
    bad = beta + fn(lambda x: [1e-4 * np.sin(x), 1e-4 * np.cos(x), -1e-4 * np.sin(x)])
    broken = SusyChain(chain.v0, [(bad, step)], chain.potentials, chain.omegas, GRID, memo=chain.memo)
    rep = verify_chain(broken)
    assert not rep.passed
    assert not rep["riccati_1"].passed


def test_one_step_crum_oracle():
    chain = build_chain(zero_potential(), [ChainStep("simple", -2.0, seed="S", shift=0.4)], grid=GRID, verify=False)
    seeds = chain_oracle_seeds(chain)
    assert len(seeds) == 1
    oracle = crum_oracle(chain.v0, seeds, GRID)
    assert compare(chain.current_potential, oracle, GRID)[0] < 1e-8
    assert oracle.singularities == pytest.approx((0.4,), abs=1e-9)


def test_wronskian_of_exponentials():
    k1, k2 = 1.0, 2.0
    s1 = OracleSeed(fn(lambda x: [np.exp(k1 * x), k1 * np.exp(k1 * x)], order=1), -k1**2 / 2)
    s2 = OracleSeed(fn(lambda x: [np.exp(k2 * x), k2 * np.exp(k2 * x)], order=1), -k2**2 / 2)
    x = np.linspace(-1, 1, 5)
    W, W1, W2 = wronskian_jet(zero_potential(), [s1, s2], x)
    e = np.exp((k1 + k2) * x) * (k2 - k1)
    assert np.allclose(W, e) and np.allclose(W1, (k1 + k2) * e) and np.allclose(W2, (k1 + k2) ** 2 * e)


@given(c=st.floats(0.05, 50.0) | st.floats(-50.0, -0.05))
def test_seed_rescaling_leaves_oracle_unchanged(c):
    chain = build_chain(
        zero_potential(),
        [ChainStep("simple", -4.0, seed="S"), ChainStep("simple", -1.0, seed="R")],
        grid=GRID,
        verify=False,
    )
    seeds = chain_oracle_seeds(chain)
    ref = crum_oracle(chain.v0, seeds, GRID)
    scaled = [OracleSeed(seeds[0].u * c, seeds[0].epsilon), seeds[1]]
    assert compare(crum_oracle(chain.v0, scaled, GRID), ref, GRID)[0] < 1e-10


def test_oracle_skipped_for_confluent_chains():
    from susyfd.catalog import SQRT_PI_2
    from susyfd import oscillator_potential

    steps = [ChainStep("confluent", -0.5, SQRT_PI_2, seed="osc"), ChainStep("confluent", -0.5, 0.4)]
    chain = build_chain(oscillator_potential(), steps, grid=Grid.uniform(-6, 6, 601))
    assert chain_oracle_seeds(chain) is None
    assert chain.report["crum"].skipped
    assert chain.report.passed

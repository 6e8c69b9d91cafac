"""Chains of first-order intertwiners built by finite differences in the energy.

A level-``k`` superpotential at energy ``eps`` is obtained from two level-
``k-1`` solutions, one at the fixed energy ``eps_{k-1}`` and one at ``eps``::

    beta_k(eps) = -beta_{k-1}(eps_{k-1}) - 2 (eps_{k-1} - eps) / (beta_{k-1}(eps_{k-1}) - beta_{k-1}(eps))

The builder memoizes ``beta(level, step)`` lazily, since level ``k`` needs
level ``k-1`` at every energy requested further down the chain.  The
auxiliary ``Omega_k = beta_k + beta_{k-1}(eps_{k-1})`` obeys a recursion of its
own and gives a second, independent assembly of the final potential.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Sequence

import numpy as np

from .catalog import BRANCHES, BranchSpec, branch_family, free_particle_seed, oscillator_seed
from .confluent import confluent_step_derivative, confluent_step_integral, energy_derivative_fd, key_like
from .core import (
    ChainStep,
    Grid,
    RealFunction,
    StepKind,
    SusyChain,
    add_derivative,
    classify_singularities,
    discover_poles,
    exclusion_windows,
    refine_sign_changes,
)
from .errors import (
    ChainEmpty,
    DerivativeRouteUnavailable,
    EqualEnergies,
    NonintegrableSingularity,
    ParityMismatch,
    SamePrevSolution,
)
from .quadrature import CumulativeIntegral
from .riccati import beta_from_u, general_solution, riccati_residual, solve_schrodinger

Family = Callable[[ChainStep], RealFunction]

PARITY_TOL = 1e-8


def _check_distinct(eps_prev: float, eps: float) -> float:
    delta = float(eps_prev) - float(eps)
    if delta == 0.0:
        raise EqualEnergies(f"energies coincide (eps={eps}); use a confluent step")
    return delta


def _difference(fixed: RealFunction, var: RealFunction, grid: Grid):
    def jet(x, n):
        a, b = fixed.jet(x, n), var.jet(x, n)
        return [p - q for p, q in zip(a, b)]

    with np.errstate(all="ignore"):
        d = np.asarray(fixed(grid.points) - var(grid.points), dtype=float)
        scale = 1.0 + np.abs(np.asarray(fixed(grid.points), dtype=float))
    ok = np.isfinite(d)
    if ok.any() and np.all(np.abs(d[ok]) <= 1e-13 * scale[ok]):
        raise SamePrevSolution("the two previous-level solutions coincide")
    return jet


def _reciprocal_jet(D, delta: float):
    """Jets of ``-2 delta / D`` given the jets of ``D``."""

    def jet(x, n):
        d = D(x, n)
        with np.errstate(all="ignore"):
            out = [-2 * delta / d[0]]
            if n >= 1:
                out.append(2 * delta * d[1] / d[0] ** 2)
            if n >= 2:
                out.append(2 * delta * (d[2] / d[0] ** 2 - 2 * d[1] ** 2 / d[0] ** 3))
        return out

    return jet


def backlund_step(
    beta_prev_fixed: RealFunction,
    beta_prev_var: RealFunction,
    eps_prev: float,
    eps: float,
    grid: Grid | None = None,
    potential: RealFunction | None = None,
    tol: float = 1e-6,
) -> RealFunction:
    """Next-level superpotential at ``eps`` from two solutions of the same Riccati equation.

    If ``potential`` (the common ``V`` both inputs solve at their energies) is
    given, both inputs are residual-checked first.
    """
    delta = _check_distinct(eps_prev, eps)
    grid = grid or Grid.uniform()
    if potential is not None:
        for b, e in ((beta_prev_fixed, eps_prev), (beta_prev_var, eps)):
            r = riccati_residual(b, potential, e)
            keep = grid.mask_outside(exclusion_windows(r, grid.delta_sing))
            if np.nanmax(np.abs(r(grid.points[keep])), initial=0.0) > tol:
                raise ValueError("inputs do not solve the Riccati equation of the given potential")
    D = _difference(beta_prev_fixed, beta_prev_var, grid)
    frac = _reciprocal_jet(D, delta)

    def jet(x, n):
        bf = beta_prev_fixed.jet(x, n)
        fr = frac(x, n)
        return [-p + q for p, q in zip(bf, fr)]

    raw = RealFunction(jet, order=2)
    key = None
    if beta_prev_var.key is not None:
        kv = beta_prev_var.key
        key = key_like(raw, lambda x: D(x, 0)[0] * kv(x))
    zeros = refine_sign_changes(lambda x: D(x, 0)[0], grid.points)
    cands = set(zeros) | set(beta_prev_fixed.singularities) | set(discover_poles(raw, grid.points))
    poles, removable = classify_singularities(raw, cands)
    removable = sorted(set(removable) | set(beta_prev_var.singularities))
    return raw.replace(singularities=poles, removable=removable, key=key, name=f"beta(eps={eps:g})")


def omega_step(
    omega_prev_fixed: RealFunction,
    omega_prev_var: RealFunction,
    eps_prev: float,
    eps: float,
    grid: Grid | None = None,
) -> RealFunction:
    """``Omega_k = -2 (eps_{k-1} - eps) / (Omega_{k-1}(eps_{k-1}) - Omega_{k-1}(eps))``."""
    delta = _check_distinct(eps_prev, eps)
    grid = grid or Grid.uniform()
    D = _difference(omega_prev_fixed, omega_prev_var, grid)
    raw = RealFunction(_reciprocal_jet(D, delta), order=2)
    zeros = refine_sign_changes(lambda x: D(x, 0)[0], grid.points)
    poles, removable = classify_singularities(raw, set(zeros) | set(discover_poles(raw, grid.points)))
    removable = sorted(set(removable) | set(omega_prev_fixed.singularities) | set(omega_prev_var.singularities))
    return raw.replace(singularities=poles, removable=removable, name=f"Omega(eps={eps:g})")


# ---------------------------------------------------------------- first-step families


def default_family(v0: RealFunction, grid: Grid | None = None) -> Family:
    """First-step solutions: closed forms for tagged seeds, ODE integration otherwise.

    A finite ``param`` selects the one-parameter enlargement of the particular
    solution (for a leading confluent step the parameter plays the same role).
    """
    grid = grid or Grid.uniform()

    def family(step: ChainStep) -> RealFunction:
        lam = step.param
        anti = None
        seed = (step.seed or "").strip()
        if seed.upper() in BRANCHES:
            s = free_particle_seed(BranchSpec(seed, step.epsilon, step.shift), (grid.x_min, grid.x_max))
            beta, anti = s.beta, s.antiderivative
        elif seed.lower() == "osc":
            s = oscillator_seed(step.epsilon)
            beta, anti = s.beta, s.antiderivative
        else:
            sol = solve_schrodinger(v0, step.epsilon, (grid.x_min, grid.x_max), step.ic or (1.0, 0.0))
            beta = beta_from_u(sol)
        if lam is None or math.isinf(lam):
            return beta
        return general_solution(beta, step.epsilon, lam, antiderivative=anti, grid=grid)

    return family


def _symbolic_first_level(steps: Sequence[ChainStep]):
    """Energy series of the first step's closed-form branch, long enough for the
    run of derivative-route steps that follows it."""
    step = steps[0]
    seed = (step.seed or "").upper()
    if seed not in ("S", "R", "P") or not (step.param is None or math.isinf(step.param)):
        return None
    run = 0
    for s in steps[1:]:
        if not s.derivative_route:
            break
        run += 1
    return branch_family(seed, float(step.shift), terms=run + 1)


# ---------------------------------------------------------------- chain


class _LevelMemo:
    """``(level, step) -> function`` with lazy construction and exclusive insertion."""

    def __init__(self, build):
        self._build = build
        self._store: dict[tuple[int, int], RealFunction] = {}
        self._lock = threading.RLock()

    def __call__(self, level: int, m: int) -> RealFunction:
        key = (level, m)
        if key in self._store:
            return self._store[key]
        with self._lock:
            if key not in self._store:
                self._store[key] = self._build(level, m)
            return self._store[key]

    def items(self):
        return dict(self._store)


def _levels_for(steps: Sequence[ChainStep], family: Family, grid: Grid):
    """The memo of ``beta(level, m)`` and ``Omega(level, m)`` for a step list."""
    eps = [s.epsilon for s in steps]
    symbolic: dict[int, object] = {}

    def sym(level: int):
        if level in symbolic:
            return symbolic[level]
        if level == 1:
            fam = _symbolic_first_level(steps)
        else:
            prev = sym(level - 1)
            fam = prev.confluent() if (prev is not None and steps[level - 1].derivative_route) else None
        symbolic[level] = fam
        return fam

    def build_beta(level: int, m: int) -> RealFunction:
        step = steps[m - 1]
        if level == 1:
            return family(step)
        if m > level or step.kind is StepKind.SIMPLE:
            return backlund_step(beta(level - 1, level - 1), beta(level - 1, m), eps[level - 2], eps[m - 1], grid)
        # confluent step: eps_m equals eps_{m-1}
        if step.epsilon != eps[level - 2]:
            raise EqualEnergies("a confluent step must repeat the previous energy")
        if step.derivative_route:
            fam = sym(level - 1)
            if fam is not None:
                return confluent_step_derivative(fam.at(step.epsilon, grid), fam.deps(step.epsilon), grid)
            if level == 2:
                first = steps[0]
                fam1 = lambda e: family(ChainStep(first.kind, e, first.param, first.seed, first.shift, first.ic))
                return confluent_step_derivative(beta(1, 1), energy_derivative_fd(fam1, step.epsilon), grid)
            raise DerivativeRouteUnavailable(f"no energy family at level {level - 1}")
        return confluent_step_integral(beta(level - 1, level - 1), step.param, grid=grid)

    def build_omega(level: int, m: int) -> RealFunction:
        if level == 1:
            return beta(1, m)
        step = steps[m - 1]
        if m > level or step.kind is StepKind.SIMPLE:
            return omega_step(omega(level - 1, level - 1), omega(level - 1, m), eps[level - 2], eps[m - 1], grid)
        return beta(level, level) + beta(level - 1, level - 1)

    beta = _LevelMemo(build_beta)
    omega = _LevelMemo(build_omega)
    return beta, omega


def build_chain(
    v0: RealFunction,
    steps: Sequence[ChainStep],
    family: Family | None = None,
    grid: Grid | None = None,
    verify: bool = True,
    tolerances: dict | None = None,
) -> SusyChain:
    """Run the steps on ``v0`` and return the chain with all levels and potentials.

    ``family(step)`` supplies the first-level solution at a step's energy; it
    defaults to :func:`default_family`.  With ``verify`` the residual suite
    runs immediately and its report is attached.
    """
    steps = list(steps)
    if not steps:
        raise ChainEmpty("no steps given")
    grid = grid or Grid.uniform()
    family = family or default_family(v0, grid)
    for k in range(1, len(steps)):
        if steps[k].kind is StepKind.SIMPLE:
            _check_distinct(steps[k - 1].epsilon, steps[k].epsilon)
    beta, omega = _levels_for(steps, family, grid)

    betas, omegas, potentials = [], [], [v0]
    for k in range(1, len(steps) + 1):
        b = beta(k, k)
        betas.append((b, steps[k - 1]))
        omegas.append(omega(k, k))
        potentials.append(add_derivative(potentials[-1], b))

    chain = SusyChain(v0, betas, potentials, omegas, grid, memo={"beta": beta, "omega": omega})
    chain.parity_potential = parity_potential(v0, omegas)
    if verify:
        from .verify import verify_chain

        chain.report = verify_chain(chain, tolerances)
    return chain


def parity_potential(v0: RealFunction, omegas: Sequence[RealFunction]) -> RealFunction:
    """``V_0 + sum of Omega_k'`` over the ``k`` with the same parity as ``n``."""
    n = len(omegas)
    terms = [om for k, om in enumerate(omegas, start=1) if (k + n) % 2 == 0]

    def jet(x, m):
        out = [np.array(v, dtype=float) for v in v0.jet(x, m)]
        for om in terms:
            d = om.jet(x, m + 1)
            for i in range(m + 1):
                out[i] = out[i] + d[i + 1]
        return out

    sing = set(v0.singularities)
    rem = set(v0.removable)
    for om in terms:
        sing |= set(om.singularities)
        rem |= set(om.removable)
    return RealFunction(jet, order=1, singularities=sorted(sing), removable=sorted(rem), name=f"V{n}(parity)")


def parity_residual(chain: SusyChain) -> tuple[float, list[tuple[float, float]]]:
    """Scaled sup difference ``|V_tele - V_par| / (1 + |V_tele|)`` off both pole sets."""
    grid = chain.grid
    if chain.parity_potential is None:
        chain.parity_potential = parity_potential(chain.v0, chain.omegas)
    tele, par = chain.current_potential, chain.parity_potential
    windows = exclusion_windows(sorted(set(tele.singularities) | set(par.singularities)), 2 * grid.delta_sing)
    keep = grid.mask_outside(windows)
    x = grid.points[keep]
    a, b = tele(x), par(x)
    with np.errstate(all="ignore"):
        err = np.abs(a - b) / (1 + np.abs(a))
    return (float(np.max(err)) if err.size else 0.0), windows


def assemble_potential(v0: RealFunction, chain: SusyChain, tol: float = PARITY_TOL) -> RealFunction:
    """``V_n`` by telescoping; raises :class:`ParityMismatch` if the parity route disagrees."""
    err, _ = parity_residual(chain)
    if not err <= tol:
        raise ParityMismatch(f"telescoped and parity assemblies differ by {err:.3e}")
    return chain.current_potential


# ---------------------------------------------------------------- zero modes


def _smooth_intervals(poles: Sequence[float]) -> list[tuple[float, float]]:
    edges = [-math.inf, *sorted(poles), math.inf]
    return list(zip(edges[:-1], edges[1:]))


def zero_mode(beta: RealFunction, x_ref: float = 0.0, interval: tuple[float, float] | None = None) -> RealFunction:
    """``exp(-int beta)`` by quadrature on each smooth interval.

    The reference point is ``x_ref`` on the interval containing it and the
    interval's midpoint (or a point one unit inside a half-line) elsewhere.
    With ``interval`` given, a pole strictly inside it is an error.
    """
    poles = list(beta.singularities)
    if interval is not None:
        lo, hi = interval
        inside = [s for s in poles if lo < s < hi]
        if inside:
            raise NonintegrableSingularity(f"beta has poles inside {interval}: {inside}")
    pieces = []
    for lo, hi in _smooth_intervals(poles):
        if lo < x_ref < hi:
            ref = x_ref
        elif math.isinf(lo) and math.isinf(hi):
            ref = x_ref
        elif math.isinf(lo):
            ref = hi - 1.0
        elif math.isinf(hi):
            ref = lo + 1.0
        else:
            ref = 0.5 * (lo + hi)
        pieces.append((lo, hi, CumulativeIntegral(beta, ref)))

    def value(x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.nan)
        for lo, hi, integ in pieces:
            sel = (x > lo) & (x < hi)
            if sel.any():
                out[sel] = np.exp(-integ(x[sel]))
        return out

    return key_like(beta, value, name="zero_mode")

"""Independent numerical referees for constructed chains.

Operators are applied to smooth test functions through explicit derivative
jets: ``H = -1/2 d^2 + V`` and ``A = d/dx + beta``.  The Wronskian (Crum)
formula rebuilds ``V_n`` from the first-level zero modes alone and so checks
the recursive construction from outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import CheckResult, ChainStep, Grid, RealFunction, StepKind, SusyChain, VerificationReport, central_fd, exclusion_windows, fd_step, refine_sign_changes
from .errors import AnnihilatedInput

DEFAULT_TOLERANCES = {
    "riccati": 1e-8,
    "riccati_ode": 1e-6,
    "closure": 1e-8,
    "intertwining": 1e-6,
    "factorization": 1e-6,
    "zero_mode": 1e-6,
    "parity": 1e-8,
    "crum": 1e-6,
    "derivative": 1e-6,
}
GUARD = 2.0


# ---------------------------------------------------------------- test functions


def gaussian(c: float, w: float) -> RealFunction:
    """``exp(-(x-c)^2 / 2w^2)`` with exact derivatives through third order."""

    def jet(x, n):
        t = (x - c) / w
        g = np.exp(-0.5 * t**2)
        out = [g, -t * g / w, (t**2 - 1) * g / w**2, (3 * t - t**3) * g / w**3]
        return out[: n + 1]

    return RealFunction(jet, order=3, name=f"gauss({c:g},{w:g})")


@dataclass(frozen=True)
class TestFunctionSet:
    """Gaussian probes; the default spreads five of them over the working window."""

    centres: tuple[float, ...] = (-6.0, -2.5, 0.0, 2.5, 6.0)
    widths: tuple[float, ...] = (1.5, 1.0, 1.2, 1.0, 1.5)

    __test__ = False  # not a pytest class

    def __iter__(self):
        return (gaussian(c, w) for c, w in zip(self.centres, self.widths))

    def __len__(self) -> int:
        return len(self.centres)


# ---------------------------------------------------------------- helpers


def _off_poles(grid: Grid, functions: Iterable[RealFunction], guard: float = GUARD) -> tuple[np.ndarray, list]:
    poles: set[float] = set()
    for f in functions:
        poles |= set(f.singularities)
    windows = exclusion_windows(sorted(poles), guard * grid.delta_sing)
    return grid.points[grid.mask_outside(windows)], windows


def _sup(values: np.ndarray) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if v.size == 0:
        return 0.0
    if not np.all(np.isfinite(v)):
        return math.inf
    return float(v.max())


def _apply_H(V: RealFunction, f: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    return -0.5 * f[2] + V(x) * f[0]


# ---------------------------------------------------------------- residuals


def intertwining_residual(
    Vk: RealFunction,
    Vk_1: RealFunction,
    beta_k: RealFunction,
    eps_k: float,
    f: RealFunction,
    grid: Grid | None = None,
) -> float:
    """``sup |(H_k A - A H_{k-1}) f| / (1 + sup |f|)`` off the poles of both potentials."""
    grid = grid or Grid.uniform()
    x, _ = _off_poles(grid, (Vk, Vk_1, beta_k))
    fj = f.jet(x, 3)
    b = beta_k.jet(x, 2)
    v1 = Vk_1.jet(x, 1)
    # g = A f and its derivatives
    g0 = fj[1] + b[0] * fj[0]
    g2 = fj[3] + b[2] * fj[0] + 2 * b[1] * fj[1] + b[0] * fj[2]
    left = -0.5 * g2 + Vk(x) * g0
    # h = H_{k-1} f, then A h
    h0 = -0.5 * fj[2] + v1[0] * fj[0]
    h1 = -0.5 * fj[3] + v1[1] * fj[0] + v1[0] * fj[1]
    right = h1 + b[0] * h0
    return _sup(left - right) / (1.0 + _sup(fj[0]))


def factorization_residual(
    Vk: RealFunction,
    beta_k: RealFunction,
    eps_k: float,
    f: RealFunction,
    Vk_1: RealFunction | None = None,
    grid: Grid | None = None,
) -> float:
    """``sup |(H_k - A A^+/2 - eps) f|``, and the ``A^+ A`` form against ``H_{k-1}`` when given."""
    grid = grid or Grid.uniform()
    funcs = (Vk, beta_k) if Vk_1 is None else (Vk, Vk_1, beta_k)
    x, _ = _off_poles(grid, funcs)
    fj = f.jet(x, 2)
    b = beta_k.jet(x, 1)
    # A^+ f = -f' + beta f, then A applied to it
    g0 = -fj[1] + b[0] * fj[0]
    g1 = -fj[2] + b[1] * fj[0] + b[0] * fj[1]
    AAd = g1 + b[0] * g0
    res = _apply_H(Vk, fj, x) - 0.5 * AAd - eps_k * fj[0]
    out = _sup(res)
    if Vk_1 is not None:
        h0 = fj[1] + b[0] * fj[0]
        h1 = fj[2] + b[1] * fj[0] + b[0] * fj[1]
        AdA = -h1 + b[0] * h0
        res2 = _apply_H(Vk_1, fj, x) - 0.5 * AdA - eps_k * fj[0]
        out = max(out, _sup(res2))
    return out


def map_eigenfunction(beta_k: RealFunction, psi_prev: RealFunction, grid: Grid | None = None, tol: float = 1e-10) -> RealFunction:
    """``psi_k = psi' + beta_k psi``; raises :class:`AnnihilatedInput` if that vanishes."""
    grid = grid or Grid.uniform()

    def jet(x, n):
        p = psi_prev.jet(x, n + 1)
        b = beta_k.jet(x, n)
        out = [p[1] + b[0] * p[0]]
        if n >= 1:
            out.append(p[2] + b[1] * p[0] + b[0] * p[1])
        if n >= 2:
            out.append(p[3] + b[2] * p[0] + 2 * b[1] * p[1] + b[0] * p[2])
        return out

    mapped = RealFunction(
        jet,
        order=min(2, max(psi_prev.order - 1, 0)) if psi_prev.order >= 1 else 0,
        singularities=sorted(set(beta_k.singularities) | set(psi_prev.singularities)),
        name="A psi",
    )
    x, _ = _off_poles(grid, (mapped,))
    scale = _sup(psi_prev(x)) + _sup(psi_prev.deriv(x))
    if _sup(mapped(x)) <= tol * max(scale, 1e-300):
        raise AnnihilatedInput("the input is the zero mode of the intertwiner")
    return mapped


def eigen_residual(V: RealFunction, psi: RealFunction, eps: float, grid: Grid | None = None) -> float:
    """``sup |H psi - eps psi| / sup |psi|`` off the poles of ``V`` and ``psi``."""
    grid = grid or Grid.uniform()
    x, _ = _off_poles(grid, (V, psi))
    p = psi.jet(x, 2)
    return _sup(_apply_H(V, p, x) - eps * p[0]) / max(_sup(p[0]), 1e-300)


def riccati_sup(beta: RealFunction, V: RealFunction, eps: float, grid: Grid) -> tuple[float, list]:
    x, windows = _off_poles(grid, (beta, V))
    b = beta.jet(x, 1)
    return _sup(-b[1] + b[0] ** 2 - 2 * (V(x) - eps)), windows


def derivative_consistency(f: RealFunction, grid: Grid) -> float:
    """``max |f' - FD(f)| / (1 + |f'|)`` with the 8th-order stencil."""
    x, _ = _off_poles(grid, (f,))
    d = f.deriv(x, 1)
    fd = central_fd(f, x, 1, fd_step(x, f.singularities))
    with np.errstate(all="ignore"):
        return _sup((d - fd) / (1 + np.abs(d)))


def singularity_soundness(f: RealFunction, grid: Grid) -> float:
    """Fraction of off-pole grid values that are not finite (0 when sound)."""
    x, _ = _off_poles(grid, (f,), guard=1.0)
    v = np.asarray(f(x), dtype=float)
    return float(np.count_nonzero(~np.isfinite(v))) / max(v.size, 1)


def zero_mode_residual(beta: RealFunction, V_prev: RealFunction, eps: float, grid: Grid, x_ref: float = 0.0) -> float:
    """Quadrature zero mode checked against ``u'' = 2(V - eps) u`` and ``A u = 0`` by finite differences.

    Pointwise relative form ``|u''/u - 2(V - eps)| / (1 + |2(V - eps)|)`` since
    ``u`` spans many decades on the window.
    """
    from .backlund import zero_mode

    u = zero_mode(beta, x_ref)
    x, _ = _off_poles(grid, (beta, V_prev))
    h = fd_step(x, beta.singularities)
    with np.errstate(all="ignore"):
        u0 = u(x)
        d2 = central_fd(u, x, 2, h) / u0
        d1 = central_fd(u, x, 1, h) / u0
        q = 2 * (V_prev(x) - eps)
        eig = np.abs(d2 - q) / (1 + np.abs(q))
        ann = np.abs(d1 + beta(x)) / (1 + np.abs(beta(x)))
    return max(_sup(eig), _sup(ann))


# ---------------------------------------------------------------- Crum oracle


@dataclass(frozen=True, eq=False)
class OracleSeed:
    """A solution ``u`` of ``H_0 u = eps u`` with at least its first derivative analytic."""

    u: RealFunction
    epsilon: float


def _seed_rows(v0: RealFunction, seed, x: np.ndarray, count: int) -> list[np.ndarray]:
    u = seed.u.jet(x, 1)
    rows = [u[0], u[1]]
    need = max(count - 2, 0)
    V = v0.jet(x, max(need - 1, 0)) if need else []
    for m in range(need):
        acc = -2 * seed.epsilon * rows[m]
        for l in range(m + 1):
            acc = acc + 2 * math.comb(m, l) * V[l] * rows[m - l]
        rows.append(acc)
    return rows[:count]


def wronskian_jet(v0: RealFunction, seeds: Sequence, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``W``, ``W'`` and ``W''`` of the seeds at ``x``."""
    n = len(seeds)
    rows = np.stack([np.stack(_seed_rows(v0, s, x, n + 2)) for s in seeds], axis=-1)  # (order, x, seed)
    rows = np.moveaxis(rows, 1, 0)  # (x, order, seed)

    def det(orders):
        return np.linalg.det(rows[:, list(orders), :])

    base = list(range(n))
    W = det(base)
    W1 = det(base[:-1] + [n])
    W2 = det(base[:-1] + [n + 1])
    if n >= 2:
        W2 = W2 + det(base[:-2] + [n - 1, n])
    return W, W1, W2


def crum_oracle(v0: RealFunction, seeds: Sequence, grid: Grid | None = None) -> RealFunction:
    """``V_n = V_0 - (ln W)''`` from the Wronskian of the seeds.

    Zeros of ``W`` are genuine poles of ``V_n``; they are recorded as
    singularities (and so excluded by comparisons) rather than raised.
    """
    grid = grid or Grid.uniform()
    seeds = list(seeds)

    def jet(x, n):
        with np.errstate(all="ignore"):
            W, W1, W2 = wronskian_jet(v0, seeds, x)
            return [v0(x) - (W2 / W - (W1 / W) ** 2)]

    zeros = refine_sign_changes(lambda x: wronskian_jet(v0, seeds, np.atleast_1d(x))[0], grid.points)
    sing = sorted(set(zeros) | set(v0.singularities) | set().union(*[set(s.u.singularities) for s in seeds]))
    return RealFunction(jet, order=0, singularities=sing, name="V(crum)")


def chain_oracle_seeds(chain: SusyChain) -> list[OracleSeed] | None:
    """First-level zero modes of every step, or ``None`` when the oracle does not apply."""
    steps = [s for _, s in chain.steps]
    if any(s.kind is not StepKind.SIMPLE for s in steps):
        return None
    if len({s.epsilon for s in steps}) != len(steps):
        return None
    seeds = []
    for m in range(1, chain.n + 1):
        b = chain.memo["beta"](1, m)
        if b.key is None or b.key.order < 1:
            return None
        seeds.append(OracleSeed(b.key, steps[m - 1].epsilon))
    return seeds


def compare(a: RealFunction, b: RealFunction, grid: Grid, x: np.ndarray | None = None) -> tuple[float, list]:
    """Sup difference off the union of both pole sets (guard factor 2)."""
    pts, windows = _off_poles(grid, (a, b))
    if x is not None:
        keep = np.ones(x.shape, bool)
        for lo, hi in windows:
            keep &= ~((x >= lo) & (x <= hi))
        pts = x[keep]
    return _sup(a(pts) - b(pts)), windows


# ---------------------------------------------------------------- chain report


def verify_chain(chain: SusyChain, tolerances: dict | None = None, tests: TestFunctionSet | None = None) -> VerificationReport:
    """Run every residual check on a chain and collect them in a report."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    tests = tests or TestFunctionSet()
    grid = chain.grid
    rep = VerificationReport()
    built = chain.memo["beta"].items() if chain.memo else {}
    numeric_seed = any(f.order == 0 for (level, _), f in built.items() if level == 1)
    t_ric = tol["riccati_ode"] if numeric_seed else tol["riccati"]
    for k, (beta, step) in enumerate(chain.steps, start=1):
        Vp, Vk = chain.potentials[k - 1], chain.potentials[k]
        r, w = riccati_sup(beta, Vp, step.epsilon, grid)
        rep.add(f"riccati_{k}", r, t_ric, w)
        if k >= 2:
            bp, sp = chain.steps[k - 2]
            x, w = _off_poles(grid, (beta, bp))
            b, c = beta.jet(x, 1), bp.jet(x, 1)
            closure = -b[1] + b[0] ** 2 - (c[1] + c[0] ** 2 + 2 * (sp.epsilon - step.epsilon))
            rep.add(f"closure_{k}", _sup(closure), tol["closure"] if not numeric_seed else t_ric, w)
        rep.add(
            f"intertwining_{k}",
            max(intertwining_residual(Vk, Vp, beta, step.epsilon, f, grid) for f in tests),
            tol["intertwining"],
        )
        rep.add(
            f"factorization_{k}",
            max(factorization_residual(Vk, beta, step.epsilon, f, Vp, grid) for f in tests),
            tol["factorization"],
        )
        rep.add(f"zero_mode_{k}", zero_mode_residual(beta, Vp, step.epsilon, grid), tol["zero_mode"])
        rep.add(f"derivative_beta_{k}", derivative_consistency(beta, grid), tol["derivative"])
        rep.add(f"derivative_V_{k}", derivative_consistency(Vk, grid), tol["derivative"])
        rep.add(f"soundness_{k}", singularity_soundness(Vk, grid) + singularity_soundness(beta, grid), 0.0)

    from .backlund import parity_residual

    p, w = parity_residual(chain)
    rep.add("parity", p, tol["parity"], w)
    seeds = chain_oracle_seeds(chain)
    if seeds is None:
        rep.skip("crum", tol["crum"], "needs distinct-energy simple steps with closed-form seeds")
    else:
        oracle = crum_oracle(chain.v0, seeds, grid)
        d, w = compare(chain.current_potential, oracle, grid)
        rep.add("crum", d, tol["crum"], w)
    return rep

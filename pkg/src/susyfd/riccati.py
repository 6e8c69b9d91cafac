"""Solutions of the Riccati equation ``-beta' + beta^2 = 2(V - eps)``.

Two routes: integrate the linear Schrodinger equation ``u'' = 2(V - eps) u``
and take ``beta = -u'/u``, or enlarge a known particular solution into its
one-parameter family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.integrate import solve_ivp

from .core import DEFAULT_WINDOW, Grid, RealFunction, _bisect, discover_poles, refine_sign_changes
from .errors import BracketVanishesEverywhere, IntegrationDivergence, TrivialInitialCondition
from .quadrature import CumulativeIntegral, key_from_beta

RTOL = 1e-12
ATOL = 1e-14
CHECKPOINT = 1.0


@dataclass(eq=False)
class _Piece:
    a: float
    b: float
    sol: object
    log_scale: float

    def state(self, x):
        return self.sol.sol(x)


@dataclass(eq=False)
class SchrodingerSolution:
    """A solution ``u`` of ``H u = eps u`` sampled through renormalized ODE pieces."""

    u: RealFunction
    epsilon: float
    nodes: list[float]
    pieces: list[_Piece] = field(repr=False, default_factory=list)

    def state(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Scaled ``(u, u')`` and the log of the scale at each ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        starts = np.array([p.a for p in self.pieces])
        idx = np.clip(np.searchsorted(starts, x, side="right") - 1, 0, len(self.pieces) - 1)
        y0 = np.empty(x.shape)
        y1 = np.empty(x.shape)
        ls = np.empty(x.shape)
        for i in np.unique(idx):
            sel = idx == i
            p = self.pieces[i]
            y = p.state(x[sel])
            y0[sel], y1[sel], ls[sel] = y[0], y[1], p.log_scale
        return y0, y1, ls


def _integrate(rhs, x0, x1, state, log_scale, step):
    pieces = []
    direction = 1.0 if x1 > x0 else -1.0
    edges = np.arange(x0, x1, direction * step).tolist() + [x1]
    s = np.asarray(state, dtype=float)
    for a, b in zip(edges[:-1], edges[1:]):
        norm = math.hypot(s[0], s[1])
        s = s / norm
        log_scale += math.log(norm)
        sol = solve_ivp(rhs, (a, b), s, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=True)
        if not sol.success or not np.all(np.isfinite(sol.y)):
            raise IntegrationDivergence(f"integrator failed on [{a}, {b}]: {sol.message}")
        lo, hi = (a, b) if a < b else (b, a)
        pieces.append(_Piece(lo, hi, sol, log_scale))
        s = sol.y[:, -1]
    return pieces


def solve_schrodinger(
    V: RealFunction,
    eps: float,
    window: tuple[float, float] = DEFAULT_WINDOW[:2],
    ic: tuple[float, float] = (1.0, 0.0),
    pad: float = 0.5,
) -> SchrodingerSolution:
    """Integrate ``u'' = 2(V - eps) u`` from ``window[0]`` with ``(u, u') = ic`` there.

    The state is renormalized every unit of ``x`` (the overall scale is kept
    as a log), so exponentially growing solutions never overflow.
    """
    x_min, x_max = map(float, window)
    u0, du0 = map(float, ic)
    if u0 == 0.0 and du0 == 0.0:
        raise TrivialInitialCondition("(u, u') = (0, 0) gives the zero solution")
    inside = [s for s in V.singularities if x_min - pad < s < x_max + pad]
    if inside:
        raise IntegrationDivergence(f"potential has poles inside the window: {inside}")

    def rhs(t, y):
        v = float(V(np.array([t]))[0])
        return [y[1], 2.0 * (v - eps) * y[0]]

    forward = _integrate(rhs, x_min, x_max + pad, (u0, du0), 0.0, CHECKPOINT)
    backward = _integrate(rhs, x_min, x_min - pad, (u0, du0), 0.0, CHECKPOINT)
    pieces = sorted(backward + forward, key=lambda p: p.a)
    sol = SchrodingerSolution(None, float(eps), [], pieces)

    def jet(x, n):
        y0, y1, ls = sol.state(x)
        scale = np.exp(ls)
        out = [scale * y0]
        if n >= 1:
            out.append(scale * y1)
        return out

    nodes = []
    for p in pieces:
        xs = np.linspace(p.a, p.b, 65)
        y = p.state(xs)[0]
        i = np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]
        if i.size:
            roots = _bisect(lambda z, p=p: p.state(z)[0], xs[i], xs[i + 1])
            nodes.extend(float(r) for r in roots)
        nodes.extend(float(z) for z in xs[y == 0])
    sol.nodes = sorted(set(n for n in nodes if x_min - pad <= n <= x_max + pad))
    sol.u = RealFunction(jet, order=1, name=f"u(eps={eps:g})")
    return sol


def beta_from_u(sol: SchrodingerSolution) -> RealFunction:
    """``beta = -u'/u``; poles at the nodes of ``u``, derivatives by finite differences."""

    def jet(x, n):
        y0, y1, _ = sol.state(x)
        with np.errstate(all="ignore"):
            return [-y1 / y0]

    return RealFunction(jet, order=0, singularities=sol.nodes, key=sol.u, name="beta(ode)")


class Antiderivative(Protocol):
    """Closed-form data for enlarging a particular solution.

    ``integrand(x)`` is ``exp(2 int beta_p)`` in the same normalization as the
    particular solution's zero mode (``1/u_p^2``); ``bracket(x, lam)`` returns
    ``lam - J(x)`` with ``J' = integrand`` and ``J(x_ref) = 0`` when finite,
    evaluated without cancellation.
    """

    def integrand(self, x: np.ndarray) -> np.ndarray: ...

    def bracket(self, x: np.ndarray, lam: float) -> np.ndarray: ...


class NumericAntiderivative:
    """Quadrature fallback for :class:`Antiderivative` from a nonvanishing zero mode."""

    def __init__(self, key: RealFunction, x_ref: float = 0.0):
        self.key = key
        zeros = refine_sign_changes(key, np.linspace(*DEFAULT_WINDOW))
        self.integral = CumulativeIntegral(self.integrand, x_ref, singularities=zeros)

    def integrand(self, x):
        with np.errstate(all="ignore"):
            return 1.0 / np.asarray(self.key(x)) ** 2

    def bracket(self, x, lam):
        return lam - self.integral(x)


def general_solution(
    beta_p: RealFunction,
    eps: float,
    lam: float,
    x_ref: float = 0.0,
    antiderivative: Antiderivative | None = None,
    grid: Grid | None = None,
) -> RealFunction:
    """One-parameter family ``beta_p - d/dx ln[lam - int exp(2 int beta_p)]``.

    ``lam = inf`` returns ``beta_p``.  Written as ``beta_p + q`` with
    ``q = exp(2 int beta_p) / bracket`` so that ``q' = 2 beta_p q + q^2``
    gives analytic derivatives without differentiating the quadrature.
    """
    if lam is None or math.isinf(lam):
        return beta_p
    grid = grid or Grid.uniform()
    key_p = beta_p.key if beta_p.key is not None else key_from_beta(beta_p, x_ref)
    anti = antiderivative or NumericAntiderivative(key_p, x_ref)

    def parts(x, n):
        bp = beta_p.jet(x, n)
        with np.errstate(all="ignore"):
            w = np.asarray(anti.integrand(x), dtype=float)
            br = np.asarray(anti.bracket(x, lam), dtype=float)
            q = w / br
        return bp, w, br, q

    def jet(x, n):
        bp, _, _, q = parts(x, n)
        with np.errstate(all="ignore"):
            out = [bp[0] + q]
            if n >= 1:
                q1 = 2 * bp[0] * q + q**2
                out.append(bp[1] + q1)
            if n >= 2:
                q2 = 2 * bp[1] * q + 2 * bp[0] * q1 + 2 * q * q1
                out.append(bp[2] + q2)
        return out

    def key_jet(x, n):
        kp = key_p.jet(x, n)
        with np.errstate(all="ignore"):
            br = np.asarray(anti.bracket(x, lam), dtype=float)
            out = [kp[0] * br]
            if n >= 1:
                out.append(kp[1] * br - 1.0 / kp[0])
            if n >= 2:
                out.append(kp[2] * br)
        return out

    with np.errstate(all="ignore"):
        br = np.asarray(anti.bracket(grid.points, lam), dtype=float)
    if np.all(np.abs(br[np.isfinite(br)]) == 0):
        raise BracketVanishesEverywhere(f"lambda={lam} annihilates the bracket")

    key = RealFunction(key_jet, order=2, name="key")
    raw = RealFunction(jet, order=2, removable=beta_p.singularities)
    poles = discover_poles(raw, grid.points)
    return raw.replace(
        singularities=poles,
        removable=[s for s in beta_p.singularities if s not in poles],
        key=key,
        name=f"beta(eps={eps:g}, lam={lam:g})",
    )


def riccati_residual(beta: RealFunction, V: RealFunction, eps: float) -> RealFunction:
    """``x -> -beta'(x) + beta(x)^2 - 2(V(x) - eps)``."""

    def jet(x, n):
        b = beta.jet(x, 1)
        v = V(x)
        with np.errstate(all="ignore"):
            return [-b[1] + b[0] ** 2 - 2.0 * (v - eps)]

    return RealFunction(
        jet,
        order=0,
        singularities=sorted(set(beta.singularities) | set(V.singularities)),
        name="riccati_residual",
    )

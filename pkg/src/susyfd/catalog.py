"""Closed-form superpotentials and partner potentials.

Free-particle branches (singular, regular, periodic, null), oscillator seeds,
the two-soliton double wells, the second-order confluent oscillator family and
the periodic confluent potentials.  Derivatives come from symbolic
differentiation (sympy) compiled to numpy; nothing here differentiates
numerically.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
import sympy as sp
from scipy import integrate, special

from .core import (
    DEFAULT_WINDOW,
    Grid,
    RealFunction,
    classify_singularities,
    discover_poles,
    refine_sign_changes,
)
from .errors import BranchEnergyMismatch, DerivativeRouteUnavailable

X, EPS = sp.symbols("x epsilon", real=True)
_K, _A = sp.symbols("k a", real=True)
_K1, _K2, _B = sp.symbols("k1 k2 b", real=True)

SQRT_PI_2 = math.sqrt(math.pi) / 2
BRANCHES = ("S", "R", "P", "N")


def _compile(expr, args, order, centre: int | None = None, radius: float = 0.5):
    """Compiled jet of ``expr`` in ``x``; with ``centre`` (index into the parameters),
    points within ``radius`` of that parameter are evaluated in 60-digit arithmetic."""
    ders = [sp.diff(expr, X, k) for k in range(order + 1)]
    fns = [sp.lambdify(args, d, modules="numpy", cse=True) for d in ders]
    slow = [sp.lambdify(args, d, modules="mpmath", cse=True) for d in ders] if centre is not None else None

    def jet(x, n, *params):
        with np.errstate(all="ignore"):
            out = [np.broadcast_to(np.asarray(fns[k](x, *params), dtype=float), x.shape).copy() for k in range(n + 1)]
        if slow is not None:
            sel = np.abs(x - params[centre]) < radius
            if sel.any():
                with mpmath.workdps(60):
                    mp = [mpmath.mpf(float(p)) for p in params]
                    for k in range(n + 1):
                        vals = []
                        for xi in x[sel].tolist():
                            try:
                                vals.append(float(slow[k](mpmath.mpf(xi), *mp)))
                            except ZeroDivisionError:
                                vals.append(math.inf)
                        out[k][sel] = vals
        return out

    return jet


def _window_bounds(window):
    lo, hi = (window[0], window[1]) if window is not None else DEFAULT_WINDOW[:2]
    return float(lo) - 1.0, float(hi) + 1.0


# ---------------------------------------------------------------- free particle

_ARG = {"S": _K * (X - _A), "R": _K * (X + _A), "P": _K * (X - _A)}
_BRANCH_EXPR = {
    # (beta, zero mode u = exp(-int beta), J with J' = 1/u^2)
    "S": (-_K * sp.cosh(_ARG["S"]) / sp.sinh(_ARG["S"]), sp.sinh(_ARG["S"]), -sp.cosh(_ARG["S"]) / sp.sinh(_ARG["S"]) / _K),
    "R": (-_K * sp.sinh(_ARG["R"]) / sp.cosh(_ARG["R"]), sp.cosh(_ARG["R"]), sp.sinh(_ARG["R"]) / sp.cosh(_ARG["R"]) / _K),
    "P": (-_K * sp.cos(_ARG["P"]) / sp.sin(_ARG["P"]), sp.sin(_ARG["P"]), -sp.cos(_ARG["P"]) / sp.sin(_ARG["P"]) / _K),
    "N": (-1 / (X - _A), X - _A, -1 / (X - _A)),
}


@lru_cache(maxsize=None)
def _branch_jets(branch: str):
    beta, u, J = _BRANCH_EXPR[branch]
    args = (X, _K, _A)
    return _compile(beta, args, 3), _compile(u, args, 3), sp.lambdify(args, J, modules="numpy")


@dataclass(frozen=True)
class BranchSpec:
    """Free-particle branch: S/R need eps < 0, P needs eps > 0, N needs eps = 0."""

    branch: str
    epsilon: float
    shift: float = 0.0

    def __post_init__(self):
        b = str(self.branch).upper()
        object.__setattr__(self, "branch", b)
        if b not in BRANCHES:
            raise BranchEnergyMismatch(f"unknown branch {self.branch!r}")
        e = float(self.epsilon)
        ok = {"S": e < 0, "R": e < 0, "P": e > 0, "N": e == 0}[b]
        if not ok:
            raise BranchEnergyMismatch(f"branch {b} is incompatible with eps={e}")

    @property
    def kappa(self) -> float:
        """``sqrt(2|eps|)``: kappa for S/R, k for P, 0 for N."""
        return math.sqrt(2 * abs(self.epsilon))


class ClosedAntiderivative:
    """``1/u^2`` and ``lam - J`` for closed-form zero modes."""

    def __init__(self, integrand, J, bracket=None):
        self._integrand = integrand
        self._J = J
        self._bracket = bracket

    def integrand(self, x):
        with np.errstate(all="ignore"):
            return np.asarray(self._integrand(np.asarray(x, dtype=float)), dtype=float)

    def bracket(self, x, lam):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            if self._bracket is not None:
                return self._bracket(x, lam)
            return lam - np.broadcast_to(self._J(x), x.shape)


@dataclass(frozen=True, eq=False)
class Seed:
    """A particular first-step solution with its zero mode and antiderivative data."""

    beta: RealFunction
    epsilon: float
    antiderivative: ClosedAntiderivative
    label: str


def _periodic_poles(k: float, a: float, window) -> list[float]:
    lo, hi = _window_bounds(window)
    period = math.pi / k
    n0, n1 = math.ceil((lo - a) / period), math.floor((hi - a) / period)
    return [a + n * period for n in range(n0, n1 + 1)]


def free_particle_seed(spec: BranchSpec, window=None) -> Seed:
    beta_jet, u_jet, J = _branch_jets(spec.branch)
    k, a = spec.kappa, float(spec.shift)
    if spec.branch in ("S", "N"):
        poles = [a]
    elif spec.branch == "P":
        poles = _periodic_poles(k, a, window)
    else:
        poles = []
    u = RealFunction(lambda x, n: u_jet(x, n, k, a), order=3, name=f"u_{spec.branch}")
    beta = RealFunction(
        lambda x, n: beta_jet(x, n, k, a),
        order=3,
        singularities=poles,
        key=u,
        name=f"beta_{spec.branch}(eps={spec.epsilon:g}, shift={a:g})",
    )
    anti = ClosedAntiderivative(lambda x: 1.0 / u(x) ** 2, lambda x: J(x, k, a))
    return Seed(beta, spec.epsilon, anti, spec.branch)


def free_particle_beta(spec: BranchSpec, window=None) -> RealFunction:
    """The free-particle superpotential of the given branch, with exact pole list."""
    return free_particle_seed(spec, window).beta


# ---------------------------------------------------------------- oscillator


def _erf_bracket(x, lam):
    # lam - (sqrt(pi)/2) erf(x), using erfc on the right to avoid cancellation
    pos = x > 0
    out = np.empty(x.shape)
    out[pos] = (lam - SQRT_PI_2) + SQRT_PI_2 * special.erfc(x[pos])
    out[~pos] = lam - SQRT_PI_2 * special.erf(x[~pos])
    return out


def oscillator_potential() -> RealFunction:
    def jet(x, n):
        out = [0.5 * x**2, x, np.ones(x.shape)]
        out += [np.zeros(x.shape)] * max(0, n - 2)
        return out[: n + 1]

    return RealFunction(jet, order=16, name="x^2/2")


def zero_potential() -> RealFunction:
    return RealFunction.constant(0.0, name="0")


def oscillator_seed(eps: float) -> Seed:
    """Gaussian-type particular solutions of the oscillator at ``eps = -1/2`` or ``+1/2``."""
    if eps == -0.5:
        sign = 1.0
        anti = ClosedAntiderivative(lambda x: np.exp(-(x**2)), lambda x: SQRT_PI_2 * special.erf(x), _erf_bracket)
    elif eps == 0.5:
        sign = -1.0
        anti = ClosedAntiderivative(lambda x: np.exp(x**2), lambda x: SQRT_PI_2 * special.erfi(x))
    else:
        raise BranchEnergyMismatch("closed-form oscillator seeds exist only at eps = -1/2 and +1/2")

    def u_jet(x, n):
        g = np.exp(sign * x**2 / 2)
        out = [g, sign * x * g, (1 + x**2) * g if sign > 0 else (x**2 - 1) * g]
        if n >= 3:
            out.append(sign * (3 * x + x**3) * g if sign > 0 else (3 * x - x**3) * g)
        return out[: n + 1]

    def beta_jet(x, n):
        out = [-sign * x, np.full(x.shape, -sign), np.zeros(x.shape), np.zeros(x.shape)]
        return out[: n + 1]

    u = RealFunction(u_jet, order=3, name="u_osc")
    beta = RealFunction(beta_jet, order=3, key=u, name=f"beta_osc(eps={eps:g})")
    return Seed(beta, eps, anti, "osc")


# ---------------------------------------------------------------- double wells

_BARGMANN = -(_K1**2 - _K2**2) * (
    _K1**2 / sp.sinh(_K1 * (X + _B)) ** 2 + _K2**2 / sp.cosh(_K2 * (X - _A)) ** 2
) / (-_K1 * sp.cosh(_K1 * (X + _B)) / sp.sinh(_K1 * (X + _B)) + _K2 * sp.tanh(_K2 * (X - _A))) ** 2


@lru_cache(maxsize=None)
def _bargmann_jet():
    return _compile(_BARGMANN, (X, _K1, _K2, _A, _B), 3)


def bargmann_double_well(kappa1: float, kappa2: float, a: float, b: float, window=None) -> RealFunction:
    """Two-soliton (quadratic Bargmann) well built from a coth seed at ``-b`` and a tanh seed at ``a``.

    For ``kappa1 > kappa2`` the apparent pole at ``x = -b`` cancels and the
    well is bounded on the whole line.
    """
    if not (kappa1 > 0 and kappa2 > 0):
        raise ValueError("kappa1 and kappa2 must be positive")
    jet = _bargmann_jet()
    params = (float(kappa1), float(kappa2), float(a), float(b))
    raw = RealFunction(lambda x, n: jet(x, n, *params), order=3)
    lo, hi = _window_bounds(window)
    pts = np.linspace(lo, hi, 4001)
    denom = lambda x: -kappa1 * np.cosh(kappa1 * (x + b)) + kappa2 * np.tanh(kappa2 * (x - a)) * np.sinh(kappa1 * (x + b))
    candidates = [-float(b)] + list(refine_sign_changes(denom, pts))
    poles, removable = classify_singularities(raw, candidates)
    return raw.replace(singularities=poles, removable=removable, name=f"bargmann({kappa1:g},{kappa2:g},{a:g},{b:g})")


# ---------------------------------------------------------------- confluent oscillator


class _AMBracket:
    """``Gamma2 - int_0^x e^{y^2} (Gamma1 - sqrt(pi)/2 erf y)^2 dy`` via adaptive quadrature."""

    NODE = 0.25

    def __init__(self, g1: float, g2: float):
        self.g1, self.g2 = float(g1), float(g2)
        self._table = {0: 0.0}
        self._cache: dict[float, float] = {}
        self._lock = threading.Lock()

    def h(self, x):
        """``Gamma1 - sqrt(pi)/2 erf x`` in a cancellation-free form on each side of 0."""
        x = np.asarray(x, dtype=float)
        c, d = self.g1 - SQRT_PI_2, self.g1 + SQRT_PI_2
        return np.where(x > 0, c + SQRT_PI_2 * special.erfc(x), d - SQRT_PI_2 * special.erfc(-x))

    def integrand(self, x):
        """``e^{x^2} h(x)^2`` expanded with erfcx so no huge factor multiplies a tiny one."""
        x = np.asarray(x, dtype=float)
        c, d = self.g1 - SQRT_PI_2, self.g1 + SQRT_PI_2
        ax = np.abs(x)
        with np.errstate(all="ignore"):
            ex, ec = special.erfcx(ax), special.erfc(ax)
            # same formula on both sides with (c, +) on the right and (d, -) on the left
            lead = np.where(x > 0, c, d)
            sign = np.where(x > 0, 1.0, -1.0)
            grow = np.where(lead == 0, 0.0, lead**2 * np.exp(x**2))
            return grow + 2 * sign * lead * SQRT_PI_2 * ex + (math.pi / 4) * ex * ec

    def _quad(self, a, b):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda t: float(self.integrand(t)), a, b, epsabs=1e-16, epsrel=1e-13, limit=200)
        return val

    def _node(self, j: int) -> float:
        with self._lock:
            if j in self._table:
                return self._table[j]
            step = 1 if j > 0 else -1
            i = 0
            while i + step in self._table:
                i += step
            acc = self._table[i]
            while i != j:
                a, b = i * self.NODE, (i + step) * self.NODE
                acc += self._quad(a, b)
                i += step
                self._table[i] = acc
            return acc

    def integral(self, x: float) -> float:
        if x in self._cache:
            return self._cache[x]
        j = int(math.trunc(x / self.NODE))
        val = self._node(j) + self._quad(j * self.NODE, x)
        self._cache[x] = val
        return val

    def jet(self, x: np.ndarray, n: int) -> list[np.ndarray]:
        """Bracket and its first ``n`` derivatives (``n <= 4``)."""
        x = np.asarray(x, dtype=float)
        b0 = self.g2 - np.array([self.integral(float(t)) for t in x.ravel()]).reshape(x.shape)
        g = self.integrand(x)
        hx = self.h(x)
        with np.errstate(all="ignore"):
            e = np.exp(-(x**2))
            g1 = 2 * x * g - 2 * hx
            g2 = 2 * g + 2 * x * g1 + 2 * e
            g3 = 4 * g1 + 2 * x * g2 - 4 * x * e
        return [b0, -g, -g1, -g2, -g3][: n + 1]


def abraham_moses2(gamma1: float, gamma2: float, window=None) -> RealFunction:
    """Second-order confluent partner of ``x^2/2`` at ``eps = -1/2``.

    ``V = x^2/2 - (ln b)''`` with ``b`` the bracket above; the logarithmic
    derivatives use the bracket's analytic derivatives only.
    """
    br = _AMBracket(gamma1, gamma2)

    def jet(x, n):
        b = br.jet(x, n + 2)
        with np.errstate(all="ignore"):
            r1, r2 = b[1] / b[0], b[2] / b[0]
            out = [0.5 * x**2 - (r2 - r1**2)]
            if n >= 1:
                r3 = b[3] / b[0]
                out.append(x - (r3 - 3 * r2 * r1 + 2 * r1**3))
            if n >= 2:
                r4 = b[4] / b[0]
                out.append(1.0 - (r4 - 4 * r3 * r1 - 3 * r2**2 + 12 * r2 * r1**2 - 6 * r1**4))
        return out[: n + 1]

    lo, hi = _window_bounds(window)
    pts = np.linspace(lo, hi, 1201)
    zeros = refine_sign_changes(lambda x: br.jet(np.atleast_1d(x), 0)[0], pts)
    fn = RealFunction(jet, order=2, singularities=zeros, name=f"am2({gamma1:g},{gamma2:g})")
    fn.bracket = br
    return fn


# ---------------------------------------------------------------- periodic confluent

_PERIODIC = {
    1: _K**2 / sp.sin(_K * (X - _A)) ** 2,
    2: 8 * _K**2 * (1 - sp.cos(2 * _K * (X - _A)) - _K * (X - _A) * sp.sin(2 * _K * (X - _A)))
    / (sp.sin(2 * _K * (X - _A)) - 2 * _K * (X - _A)) ** 2,
}


@lru_cache(maxsize=None)
def _periodic_jet(order: int):
    return _compile(_PERIODIC[order], (X, _K, _A), 3, centre=1 if order == 2 else None)


def periodic_confluent(order: int, eps: float, a: float, window=None) -> RealFunction:
    """First (poles at ``a + n pi/k``) or second (single pole at ``a``) confluent P-branch partner."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if not eps > 0:
        raise BranchEnergyMismatch("periodic branch needs eps > 0")
    k = math.sqrt(2 * eps)
    jet = _periodic_jet(order)
    poles = _periodic_poles(k, float(a), window) if order == 1 else [float(a)]
    return RealFunction(lambda x, n: jet(x, n, k, float(a)), order=3, singularities=poles, name=f"V{order}conf")


# ---------------------------------------------------------------- energy families

_XORDER = 2  # x-derivatives carried through the series arithmetic


def _xmul(a, b):
    return [sum(a[i] * b[j - i] for i in range(j + 1)) for j in range(len(a))]


def _xinv(a):
    inv0 = 1 / a[0]
    out = [inv0]
    for j in range(1, len(a)):
        out.append(-inv0 * sum(a[i] * out[j - i] for i in range(1, j + 1)))
    return out


def _inverse(A):
    """Inverse of a series in ``delta`` whose coefficients are Taylor series in ``x``."""
    inv0 = _xinv(A[0])
    Q = [inv0]
    for m in range(1, len(A)):
        s = [0 * c for c in inv0]
        for i in range(1, m + 1):
            s = [p + q for p, q in zip(s, _xmul(A[i], Q[m - i]))]
        Q.append([-c for c in _xmul(inv0, s)])
    return Q


def _confluent_map(A, literal: bool):
    """One confluent step on the energy series ``A``.

    The consistent map inverts the difference quotient ``(A(delta) - A(0)) / delta``
    (lower levels held at the base energy); the literal map inverts the full
    energy derivative ``dA/d delta``, letting every level move with the energy.
    """
    if literal:
        D = [[(m + 1) * c for c in A[m + 1]] for m in range(len(A) - 1)]
    else:
        D = A[1:]
    Q = _inverse(D)
    head = [-a - 2 * q for a, q in zip(A[0], Q[0])]
    if literal:
        rest = [[-a - 2 * q for a, q in zip(A[m], Q[m])] for m in range(1, len(Q))]
    else:
        rest = [[-2 * q for q in Q[m]] for m in range(1, len(Q))]
    return [head] + rest


class _Base:
    """Compiled ``d^j/dx^j d^m/deps^m beta / (j! m!)`` of a first-level branch solution."""

    def __init__(self, expr, terms: int):
        self.terms = terms
        fast, slow = [], []
        for m in range(terms):
            em = sp.diff(expr, EPS, m) / math.factorial(m)
            row_f, row_s = [], []
            for j in range(_XORDER + 1):
                e = sp.diff(em, X, j) / math.factorial(j)
                row_f.append(sp.lambdify((X, EPS), e, modules="numpy", cse=True))
                row_s.append(sp.lambdify((X, EPS), e, modules="mpmath", cse=True))
            fast.append(row_f)
            slow.append(row_s)
        self.fast, self.slow = fast, slow
        self._cache: dict[tuple, list] = {}

    def values(self, x: np.ndarray, eps: float, order: int = _XORDER):
        with np.errstate(all="ignore"):
            return [
                [np.broadcast_to(np.asarray(f(x, eps), dtype=float), x.shape).copy() for f in row[: order + 1]]
                for row in self.fast
            ]

    def precise(self, x: float, eps: float):
        """Multiprecision values at the current working precision, shared by every level."""
        key = (x, eps, mpmath.mp.dps)
        hit = self._cache.get(key)
        if hit is None:
            e, xm = mpmath.mpf(eps), mpmath.mpf(x)
            hit = self._cache[key] = [[f(xm, e) for f in row] for row in self.slow]
        return hit


class EnergyFamily:
    """A superpotential family as a truncated series in the energy offset.

    Level one is a closed-form branch solution expanded in ``delta`` about the
    base energy.  Each confluent step maps the series ``[a0, a1, ...]`` to the
    next level and uses up one term; its leading term is
    ``-a0 - 2 / (d beta / d eps)``.  In the consistent form the derivative is
    taken with lower levels held at the base energy, which keeps every level a
    superpartner of the one below.  The literal form differentiates through all
    levels at once.

    Values near the first-level poles (the branch shift, and its lattice on the
    periodic branch) cancel catastrophically beyond the first level, so points
    within ``PRECISE_RADIUS`` of one are evaluated in multiprecision.
    """

    PRECISE_RADIUS = 0.5
    PRECISE_DPS = 60

    def __init__(self, base: _Base, label: str, level: int = 1, exact_poles=None, shift=None, maps: tuple = ()):
        self.base = base
        self.label = label
        self.level = level
        self.shift = shift
        self.maps = maps
        self._exact_poles = exact_poles
        self._cache: dict[tuple, tuple] = {}
        self._children: dict[bool, EnergyFamily] = {}
        self._lock = threading.Lock()

    @property
    def terms(self) -> int:
        return self.base.terms - len(self.maps)

    def _series(self, A):
        for literal in self.maps:
            A = _confluent_map(A, literal)
        return A

    def _precise_point(self, which: int, x: float, eps: float) -> tuple:
        key = (which, x, eps)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        with mpmath.workdps(self.PRECISE_DPS):
            try:
                c = self._series(self.base.precise(x, eps))[which]
                out = tuple(float(c[j] * math.factorial(j)) for j in range(_XORDER + 1))
            except ZeroDivisionError:
                out = (math.inf,) * (_XORDER + 1)
        with self._lock:
            self._cache[key] = out
        return out

    def _disk_fit(self, which: int, eps: float, c: float):
        """Laurent form ``f(c + y) = sum_i g_i y^(i - p) + h(y)`` on ``|y| <= PRECISE_RADIUS``, or None.

        Superpotentials have simple poles (``p = 1``); their energy derivatives
        can have double ones where a pole moves with the energy (``p = 2``).
        ``h`` is a Chebyshev interpolant accepted once its trailing
        coefficients are negligible.
        """
        key = ("fit", which, eps, c)
        if key in self._cache:
            return self._cache[key]
        r, p = self.PRECISE_RADIUS, 1 + which
        fit = None
        for n in (32, 64, 128):
            y = r * np.cos(np.pi * (np.arange(n) + 0.5) / n)
            g = np.array([yi**p * self._precise_point(which, c + yi, eps)[0] for yi in y.tolist()])
            if not np.all(np.isfinite(g)):
                break
            cheb = np.polynomial.Chebyshev.fit(y, g, n - 1, domain=[-r, r])
            coef = np.abs(cheb.coef)
            if coef[-6:].max() <= 1e-13 * max(coef.max(), 1.0):
                scale = max(coef.max(), 1.0)
                lead = [float(cheb.deriv(i)(0.0)) / math.factorial(i) if i else float(cheb(0.0)) for i in range(p)]
                lead = [0.0 if abs(v) <= 1e-9 * scale else v for v in lead]
                rest = (g - sum(v * y**i for i, v in enumerate(lead))) / y**p
                h = np.polynomial.Chebyshev.fit(y, rest, n - 1, domain=[-r, r])
                fit = (lead, h, h.deriv(1), h.deriv(2))
                break
        with self._lock:
            self._cache[key] = fit
        return fit

    def _centres(self, eps: float) -> np.ndarray:
        if self.shift is None:
            return np.empty(0)
        if self._exact_poles is None:
            return np.array([self.shift])
        return np.asarray(self._exact_poles(eps, None), dtype=float)

    def _function(self, which: int, eps: float, name: str) -> RealFunction:
        if self.terms <= which:
            raise DerivativeRouteUnavailable(f"{self.label} family at level {self.level} has no energy derivative left")
        eps = float(eps)
        centres = self._centres(eps) if (self.level > 1 or which > 0) else np.empty(0)

        def jet(x, n):
            with np.errstate(all="ignore"):
                c = self._series(self.base.values(x, eps, n))[which]
                out = [c[j] * math.factorial(j) for j in range(n + 1)]
            if not centres.size:
                return out
            dist = np.abs(x[:, None] - centres[None, :])
            nearest = np.argmin(dist, axis=1)
            inside = dist[np.arange(x.size), nearest] < self.PRECISE_RADIUS
            for ci in np.unique(nearest[inside]):
                idx = np.nonzero(inside & (nearest == ci))[0]
                fit = self._disk_fit(which, eps, float(centres[ci]))
                if fit is None:
                    for i in idx:
                        p = self._precise_point(which, float(x[i]), eps)
                        for j in range(n + 1):
                            out[j][i] = p[j]
                    continue
                y = x[idx] - centres[ci]
                lead, h = fit[0], fit[1:]
                p = len(lead)
                with np.errstate(all="ignore"):
                    vals = [h[j](y) for j in range(3)]
                    for i, v in enumerate(lead):
                        e = i - p  # term v * y**e
                        vals[0] = vals[0] + v * y**e
                        vals[1] = vals[1] + v * e * y ** (e - 1)
                        vals[2] = vals[2] + v * e * (e - 1) * y ** (e - 2)
                for j in range(n + 1):
                    out[j][idx] = vals[j]
            return out

        return RealFunction(jet, order=_XORDER, name=name)

    def at(self, eps: float, grid: Grid | None = None) -> RealFunction:
        raw = self._function(0, eps, "")
        if self._exact_poles is not None and self.level == 1:
            poles = self._exact_poles(eps, grid)
        else:
            poles = discover_poles(raw, (grid or Grid.uniform()).points)
        return raw.replace(singularities=poles, name=f"{self.label}[{self.level}](eps={eps:g})")

    def deps(self, eps: float) -> RealFunction:
        """Energy derivative of the family (at fixed lower levels in the consistent form)."""
        return self._function(1, eps, f"d{self.label}/deps")

    def confluent(self, literal: bool = False) -> "EnergyFamily":
        """The next level after a confluent step at the base energy."""
        if self.terms < 2:
            raise DerivativeRouteUnavailable("no energy-series terms left for another confluent step")
        with self._lock:
            if literal not in self._children:
                self._children[literal] = EnergyFamily(
                    self.base, self.label, self.level + 1, self._exact_poles, self.shift, self.maps + (literal,)
                )
            return self._children[literal]


@lru_cache(maxsize=None)
def branch_family(branch: str, shift: float = 0.0, terms: int = 2) -> EnergyFamily:
    """The S, R or P branch as a family in ``eps``, expanded to ``terms`` series terms."""
    branch = branch.upper()
    a = sp.Float(shift) if shift else sp.Integer(0)
    if branch == "P":
        k = sp.sqrt(2 * EPS)
        expr = -k * sp.cos(k * (X - a)) / sp.sin(k * (X - a))

        def poles(eps, grid):
            window = (grid.x_min, grid.x_max) if grid is not None else None
            return _periodic_poles(math.sqrt(2 * eps), float(shift), window)

        exact, sh = poles, float(shift)
    elif branch == "S":
        k = sp.sqrt(-2 * EPS)
        expr = -k * sp.cosh(k * (X - a)) / sp.sinh(k * (X - a))
        exact, sh = (lambda eps, grid: [float(shift)]), float(shift)
    elif branch == "R":
        k = sp.sqrt(-2 * EPS)
        expr = -k * sp.tanh(k * (X + a))
        exact, sh = (lambda eps, grid: []), None
    else:
        raise BranchEnergyMismatch(f"branch {branch} has no energy family")
    return EnergyFamily(_Base(expr, max(1, terms)), branch, exact_poles=exact, shift=sh)

"""Shared domain types: evaluable functions with pole bookkeeping, sampling
grids, chain step descriptors and verification reports.

A :class:`RealFunction` is a vectorized callable that can return its value and
derivatives (a "jet") at an array of abscissas.  Closed forms supply analytic
derivatives up to ``order``; anything higher is produced by 8th-order central
differences of the highest analytic derivative, with the step shrunk near
listed poles so stencils never straddle one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "RealFunction",
    "Grid",
    "StepKind",
    "ChainStep",
    "SusyChain",
    "CheckResult",
    "VerificationReport",
    "exclusion_windows",
    "central_fd",
    "discover_poles",
    "is_pole",
    "classify_singularities",
    "refine_sign_changes",
    "add_derivative",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = (-15.0, 15.0, 3001)

FD_STEP = 1e-2
# removable (cancelled) singular points: values inside REPAIR_RADIUS come from a
# polynomial fit on the ring REPAIR_RADIUS < |x - s| < REPAIR_OUTER * REPAIR_RADIUS
REPAIR_RADIUS = 0.03
REPAIR_OUTER = 3.0
REPAIR_DEGREE = 12
_RING = 1 + (REPAIR_OUTER - 1) * (np.cos(np.linspace(0, np.pi, 32)) + 1) / 2

_OFFSETS = np.arange(-4, 5)
_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])

# points closer than this are the same point found by different routes
MERGE_TOL = 1e-9

JetFn = Callable[[np.ndarray, int], Sequence[np.ndarray]]


def _nearest_distance(x: np.ndarray, points: Sequence[float]) -> np.ndarray:
    if len(points) == 0:
        return np.full(x.shape, np.inf)
    s = np.asarray(points, dtype=float)
    idx = np.clip(np.searchsorted(s, x), 1, len(s) - 1) if len(s) > 1 else np.zeros(x.shape, int)
    d = np.abs(x - s[idx])
    if len(s) > 1:
        d = np.minimum(d, np.abs(x - s[idx - 1]))
    return d


def _dedupe(points: Iterable[float]) -> tuple[float, ...]:
    out: list[float] = []
    for s in sorted(float(p) for p in points):
        if not out or s - out[-1] > MERGE_TOL:
            out.append(s)
    return tuple(out)


def fd_step(x: np.ndarray, singularities: Sequence[float], h0: float = FD_STEP) -> np.ndarray:
    """Per-point stencil spacing: ``h0`` away from poles, 5% of the pole distance near them."""
    d = _nearest_distance(x, singularities)
    return np.minimum(h0, np.maximum(0.05 * d, 1e-7))


def central_fd(f: Callable[[np.ndarray], np.ndarray], x, order: int = 1, h=None) -> np.ndarray:
    """8th-order central difference (first or second derivative) of a vectorized callable."""
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(FD_STEP if h is None else h, x.shape).astype(float)
    pts = x[..., None] + _OFFSETS * h[..., None]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    if order == 1:
        return vals @ _D1 / h
    if order == 2:
        return vals @ _D2 / h**2
    raise ValueError("central_fd supports order 1 or 2")


class RealFunction:
    """Real function of one variable with derivative access and pole bookkeeping.

    ``jet(x, n)`` must return at least ``n + 1`` arrays ``[f, f', ..., f^(n)]``
    for ``n <= order``.  ``singularities`` lists known poles; ``removable``
    lists points where the formula is numerically 0/0 but the function is
    analytic (values near them come from a polynomial fit on a surrounding ring).  ``key``
    optionally holds the zero mode ``exp(-int f)`` in its natural
    normalization when ``f`` is a superpotential.
    """

    def __init__(
        self,
        jet: JetFn,
        order: int = 0,
        singularities: Iterable[float] = (),
        removable: Iterable[float] = (),
        key: "RealFunction | None" = None,
        name: str = "",
    ):
        self._jet = jet
        self.order = int(order)
        self.singularities = _dedupe(singularities)
        self.removable = tuple(s for s in _dedupe(removable) if _nearest_distance(np.array([s]), self.singularities)[0] > MERGE_TOL)
        self.key = key
        self.name = name

    @classmethod
    def from_callable(cls, f: Callable[[np.ndarray], np.ndarray], **kwargs) -> "RealFunction":
        """Wrap a plain vectorized callable; all derivatives come from finite differences."""
        return cls(lambda x, n: [np.asarray(f(x), dtype=float)], order=0, **kwargs)

    @classmethod
    def constant(cls, c: float, name: str = "") -> "RealFunction":
        def jet(x, n):
            out = [np.full(x.shape, float(c))]
            out += [np.zeros(x.shape) for _ in range(n)]
            return out

        return cls(jet, order=8, name=name)

    def replace(self, **changes) -> "RealFunction":
        kw = dict(
            jet=self._jet,
            order=self.order,
            singularities=self.singularities,
            removable=self.removable,
            key=self.key,
            name=self.name,
        )
        kw.update(changes)
        return RealFunction(**kw)

    def _raw(self, x: np.ndarray, n: int) -> list[np.ndarray]:
        m = min(n, self.order)
        with np.errstate(all="ignore"):
            vals = self._jet(x, m)
            out = [np.broadcast_to(np.asarray(vals[k], dtype=float), x.shape).copy() for k in range(m + 1)]
        if n > m:
            h = fd_step(x, self.singularities)

            def top(y, m=m):
                return self.jet(y, m)[m]

            with np.errstate(all="ignore"):
                for k in range(m + 1, n + 1):
                    extra = k - m
                    if extra == 1:
                        out.append(central_fd(top, x, 1, h))
                    elif extra == 2:
                        out.append(central_fd(top, x, 2, h))
                    else:
                        def lower(y, extra=extra, m=m):
                            hy = fd_step(y, self.singularities)
                            return central_fd(lambda z: self.jet(z, m + extra - 2)[m + extra - 2], y, 2, hy)

                        out.append(lower(x))
        return out

    def jet(self, x, n: int = 0) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xa = np.atleast_1d(x)
        shape = xa.shape
        xa = xa.ravel()
        out = self._raw(xa, n)
        if self.removable:
            self._repair(xa, n, out)
        if scalar:
            return [float(v[0]) for v in out]
        return [v.reshape(shape) for v in out]

    def _repair(self, x: np.ndarray, n: int, out: list[np.ndarray]) -> None:
        """Replace values near removable points by a Chebyshev least-squares fit on a ring of
        points where the formula is still accurate (cancellation grows like a power of the
        distance, so the ring stays a few radii away)."""
        others = sorted(set(self.singularities) | set(self.removable))
        for s in self.removable:
            gap = min((abs(s - o) for o in others if o != s), default=math.inf)
            R = min(REPAIR_RADIUS, gap / (2 * REPAIR_OUTER + 2))
            idx = np.nonzero(np.abs(x - s) < R)[0]
            if not idx.size:
                continue
            nodes = s + R * np.concatenate([-_RING, _RING])
            vals = self._raw(nodes, n)
            dom = [s - REPAIR_OUTER * R, s + REPAIR_OUTER * R]
            for k in range(n + 1):
                ok = np.isfinite(vals[k])
                fit = np.polynomial.Chebyshev.fit(nodes[ok], vals[k][ok], REPAIR_DEGREE, domain=dom)
                out[k][idx] = fit(x[idx])

    def __call__(self, x):
        return self.jet(x, 0)[0]

    def deriv(self, x, n: int = 1):
        return self.jet(x, n)[n]

    # simple algebra; poles and removable points are pooled
    def _combine(self, other: "RealFunction", sign: float) -> "RealFunction":
        a, b = self, other

        def jet(x, n):
            ja, jb = a.jet(x, n), b.jet(x, n)
            return [p + sign * q for p, q in zip(ja, jb)]

        return RealFunction(
            jet,
            order=max(a.order, b.order),
            singularities=sorted(set(a.singularities) | set(b.singularities)),
            removable=sorted(set(a.removable) | set(b.removable)),
        )

    def __add__(self, other: "RealFunction") -> "RealFunction":
        return self._combine(other, 1.0)

    def __sub__(self, other: "RealFunction") -> "RealFunction":
        return self._combine(other, -1.0)

    def __mul__(self, c: float) -> "RealFunction":
        f, c = self, float(c)
        return RealFunction(
            lambda x, n: [c * v for v in f.jet(x, n)],
            order=f.order,
            singularities=f.singularities,
            removable=f.removable,
        )

    __rmul__ = __mul__

    def __neg__(self) -> "RealFunction":
        f = self
        return RealFunction(
            lambda x, n: [-v for v in f.jet(x, n)],
            order=f.order,
            singularities=f.singularities,
            removable=f.removable,
        )

    def __repr__(self) -> str:
        label = self.name or "RealFunction"
        return f"<{label} order={self.order} poles={len(self.singularities)}>"


def exclusion_windows(f, delta: float) -> list[tuple[float, float]]:
    """Closed windows ``[s - delta, s + delta]`` around every listed pole, merged when overlapping."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    pts = f.singularities if isinstance(f, RealFunction) else sorted(float(s) for s in f)
    windows: list[tuple[float, float]] = []
    for s in pts:
        lo, hi = s - delta, s + delta
        if windows and lo <= windows[-1][1]:
            windows[-1] = (windows[-1][0], max(hi, windows[-1][1]))
        else:
            windows.append((lo, hi))
    return windows


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing sample abscissas (at least 9, for 8th-order stencils)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 9:
            raise ValueError("a grid needs at least 9 points")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, x_min: float = DEFAULT_WINDOW[0], x_max: float = DEFAULT_WINDOW[1], n: int = DEFAULT_WINDOW[2]) -> "Grid":
        return cls(np.linspace(x_min, x_max, int(n)))

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def x_min(self) -> float:
        return float(self.points[0])

    @property
    def x_max(self) -> float:
        return float(self.points[-1])

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def delta_sing(self) -> float:
        return 1e-3 * self.width

    def __len__(self) -> int:
        return self.points.size

    def mask_outside(self, windows: Iterable[tuple[float, float]]) -> np.ndarray:
        keep = np.ones(self.points.shape, dtype=bool)
        for lo, hi in windows:
            keep &= ~((self.points >= lo) & (self.points <= hi))
        return keep

    def restrict(self, lo: float, hi: float) -> "Grid":
        return Grid(self.points[(self.points >= lo) & (self.points <= hi)])


class StepKind(str, enum.Enum):
    SIMPLE = "simple"
    CONFLUENT = "confluent"


@dataclass(frozen=True)
class ChainStep:
    """One SUSY step.

    ``param`` is the integration constant: lambda of the one-parameter Riccati
    family for the first step, Gamma for a confluent step.  ``math.inf``
    selects the particular solution.  For a confluent step ``param=None``
    selects the energy-derivative route instead of the quadrature route.
    ``seed``/``shift`` name the closed-form first-step branch (S, R, P, N, or
    "osc" for the oscillator); ``ic`` gives initial data when the first-step
    solution must be integrated numerically.
    """

    kind: StepKind
    epsilon: float
    param: float | None = math.inf
    seed: str | None = None
    shift: float = 0.0
    ic: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", StepKind(self.kind))
        if not math.isfinite(float(self.epsilon)):
            raise ValueError("factorization energy must be finite")
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def derivative_route(self) -> bool:
        return self.kind is StepKind.CONFLUENT and self.param is None


@dataclass(eq=False)
class SusyChain:
    """State after ``n`` steps: superpotentials, potentials ``V_0..V_n`` and Omega functions."""

    v0: RealFunction
    steps: list[tuple[RealFunction, ChainStep]]
    potentials: list[RealFunction]
    omegas: list[RealFunction]
    grid: Grid
    report: "VerificationReport | None" = None
    parity_potential: RealFunction | None = None
    memo: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.steps)

    @property
    def betas(self) -> list[RealFunction]:
        return [b for b, _ in self.steps]

    @property
    def energies(self) -> list[float]:
        return [s.epsilon for _, s in self.steps]

    @property
    def current_potential(self) -> RealFunction:
        return self.potentials[-1]

    @property
    def singularities(self) -> tuple[float, ...]:
        return self.current_potential.singularities


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    excluded_intervals: list[tuple[float, float]] = field(default_factory=list)
    skipped: bool = False
    note: str = ""

    def line(self) -> str:
        if self.skipped:
            return f"{self.name} nan {self.tolerance:.1e} SKIPPED {self.note}".rstrip()
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name} {self.residual:.6e} {self.tolerance:.1e} {status}"


class VerificationReport:
    """Named residual norms with tolerances; ``passed`` iff every non-skipped check passed."""

    def __init__(self):
        self.entries: list[CheckResult] = []

    def add(self, name: str, residual: float, tolerance: float, excluded=()) -> CheckResult:
        residual = float(residual)
        ok = bool(residual <= tolerance)  # nan fails
        entry = CheckResult(name, residual, float(tolerance), ok, list(excluded))
        self.entries.append(entry)
        return entry

    def skip(self, name: str, tolerance: float, note: str = "") -> CheckResult:
        entry = CheckResult(name, math.nan, float(tolerance), True, skipped=True, note=note)
        self.entries.append(entry)
        return entry

    def extend(self, other: "VerificationReport") -> None:
        self.entries.extend(other.entries)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries if not e.skipped)

    def __getitem__(self, name: str) -> CheckResult:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def format(self) -> str:
        return "\n".join(e.line() for e in self.entries) + "\n"


def _bisect(g: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    with np.errstate(all="ignore"):
        glo = g(lo)
        for _ in range(200):
            if np.all(hi - lo <= tol):
                break
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            right = np.sign(gm) == np.sign(glo)
            lo = np.where(right, mid, lo)
            glo = np.where(right, gm, glo)
            hi = np.where(right, hi, mid)
    return 0.5 * (lo + hi)


def refine_sign_changes(g: Callable[[np.ndarray], np.ndarray], points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Zeros of ``g`` bracketed by sign changes between adjacent points, bisected to ``tol``."""
    x = np.asarray(points, dtype=float)
    with np.errstate(all="ignore"):
        y = g(x)
    exact = x[y == 0]
    ok = np.isfinite(y)
    sc = ok[:-1] & ok[1:] & (np.sign(y[:-1]) * np.sign(y[1:]) < 0)
    i = np.nonzero(sc)[0]
    roots = _bisect(g, x[i], x[i + 1], tol) if i.size else np.empty(0)
    return np.sort(np.concatenate([exact, roots]))


def discover_poles(f: RealFunction | Callable, points, accept: float = 1e-6) -> list[float]:
    """Locate poles of ``f`` on a sample: sign changes of ``1/f`` refined by bisection to 1e-12.

    Candidates where ``1/f`` jumps (zeros of ``f``) are rejected because
    ``|1/f|`` stays large at the bisection limit.
    """
    x = np.asarray(points, dtype=float)

    def recip(z):
        with np.errstate(all="ignore"):
            return 1.0 / np.asarray(f(z), dtype=float)

    with np.errstate(all="ignore"):
        y = np.asarray(f(x), dtype=float)
        r = 1.0 / y
    poles: list[float] = []
    for xi in x[~np.isfinite(y) | (r == 0)]:
        eps = 1e-6 * (1 + abs(xi))
        with np.errstate(all="ignore"):
            side = np.abs(np.asarray(f(np.array([xi - eps, xi + eps])), dtype=float))
        if np.all(~np.isfinite(side) | (side > 1e4)):
            poles.append(float(xi))
    ok = np.isfinite(r) & (r != 0)
    sc = ok[:-1] & ok[1:] & (np.sign(r[:-1]) * np.sign(r[1:]) < 0)
    i = np.nonzero(sc)[0]
    if i.size:
        roots = _bisect(recip, x[i], x[i + 1])
        with np.errstate(all="ignore"):
            resid = np.abs(recip(roots))
        poles.extend(float(s) for s in roots[resid < accept])
    return sorted(poles)


def is_pole(f: RealFunction | Callable, s: float, delta: float = 1e-4) -> bool:
    """Local boundedness probe at offsets ``delta * {1, 2, 4, 8}`` on both sides of ``s``."""
    offs = delta * np.array([1.0, 2.0, 4.0, 8.0])
    if isinstance(f, RealFunction):
        # probe the bare formula: the removable-point repair would mask a pole
        f = f.replace(removable=())
    for side in (1.0, -1.0):
        with np.errstate(all="ignore"):
            v = np.abs(np.asarray(f(s + side * offs), dtype=float))
        if not np.isfinite(v[0]):
            continue
        grows = v[0] > v[1] > v[2] > v[3] and v[0] > 4 * v[3]  # 1/x gives 8, bounded ~1
        if not grows:
            return False
    return True


def classify_singularities(f, candidates: Iterable[float], delta: float = 1e-4) -> tuple[list[float], list[float]]:
    """Split candidate points into genuine poles of ``f`` and removable points."""
    poles, removable = [], []
    for s in sorted(set(float(c) for c in candidates)):
        (poles if is_pole(f, s, delta) else removable).append(s)
    return poles, removable


def add_derivative(V: RealFunction, beta: RealFunction) -> RealFunction:
    """``V + beta'`` with the candidate singular points of both classified again."""

    def jet(x, n):
        v = V.jet(x, n)
        b = beta.jet(x, n + 1)
        return [p + q for p, q in zip(v, b[1:])]

    raw = RealFunction(jet, order=max(0, min(V.order, beta.order - 1)))
    cands = set(V.singularities) | set(beta.singularities) | set(V.removable) | set(beta.removable)
    poles, removable = classify_singularities(raw, cands)
    return raw.replace(singularities=poles, removable=removable, name=f"{V.name}+beta'")

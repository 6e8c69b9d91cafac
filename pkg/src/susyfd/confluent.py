"""The degenerate-energy (confluent) step in three forms.

* integral form: ``beta_k = -beta_{k-1} - d/dx ln[Gamma - int_0^x B_{k-1}^2]``
* derivative form: ``beta_k = -beta - 2 / (d beta / d eps)``
* key-function recurrence: ``B_k = (C - int B_{k-1}^2) / B_{k-1}``

Key functions ``B = exp(-int beta)`` are kept in their natural normalization
(the one the closed-form seeds come with), so ``Gamma`` has the same meaning
as in the closed-form confluent potentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .catalog import SQRT_PI_2, _AMBracket, branch_family, zero_potential
from .core import Grid, RealFunction, add_derivative, classify_singularities, discover_poles, is_pole, refine_sign_changes
from .errors import DerivativeVanishes
from .quadrature import CumulativeIntegral, key_from_beta

EPS_FD_REL = 1e-5
AM2_THRESHOLD = SQRT_PI_2 / 2 * math.log(2)


def key_like(beta: RealFunction, value: Callable[[np.ndarray], np.ndarray], name: str = "key") -> RealFunction:
    """Zero mode of ``beta`` whose value is ``value(x)``; derivatives follow from ``B' = -beta B``."""

    def jet(x, n):
        b = beta.jet(x, max(n - 1, 0))
        with np.errstate(all="ignore"):
            K = np.asarray(value(x), dtype=float)
            out = [K]
            if n >= 1:
                out.append(-b[0] * K)
            if n >= 2:
                out.append((b[0] ** 2 - b[1]) * K)
        return out

    return RealFunction(jet, order=2, name=name)


SNAP = 1e-4  # a multiple bracket zero is only located to about eps**(1/3)


def _snap(zeros, known) -> list[float]:
    known = np.asarray(sorted(known), dtype=float)
    if not known.size:
        return list(zeros)
    return [float(z) for z in zeros if np.min(np.abs(known - z)) > SNAP]


def _finish(raw: RealFunction, candidates, grid: Grid, key: RealFunction | None, name: str) -> RealFunction:
    cands = set(candidates) | set(discover_poles(raw, grid.points))
    poles, removable = classify_singularities(raw, cands)
    return raw.replace(singularities=poles, removable=removable, key=key, name=name)


def _prev_key(beta_prev: RealFunction, x_ref: float) -> RealFunction:
    return beta_prev.key if beta_prev.key is not None else key_from_beta(beta_prev, x_ref)


def confluent_step_integral(
    beta_prev: RealFunction,
    gamma: float,
    x_ref: float = 0.0,
    grid: Grid | None = None,
) -> RealFunction:
    """Confluent step with integration constant ``gamma`` (``inf`` gives ``-beta_prev``).

    Written as ``-beta_prev + q`` with ``q = B^2 / (gamma - I)``, ``I = int_{x_ref}^x B^2``,
    so ``q' = -2 beta_prev q + q^2`` supplies the derivatives.
    """
    grid = grid or Grid.uniform()
    key_p = _prev_key(beta_prev, x_ref)
    if gamma is None or math.isinf(gamma):
        neg = -beta_prev
        key = key_like(neg, lambda x: 1.0 / key_p(x))
        return neg.replace(key=key, name="-beta_prev")

    blowups = [s for s in beta_prev.singularities if is_pole(key_p, s)]
    weight = lambda x: np.asarray(key_p(x), dtype=float) ** 2
    integral = CumulativeIntegral(weight, x_ref, singularities=blowups)
    gamma = float(gamma)

    def jet(x, n):
        bp = beta_prev.jet(x, n)
        with np.errstate(all="ignore"):
            q = weight(x) / (gamma - integral(x))
            out = [-bp[0] + q]
            if n >= 1:
                q1 = -2 * bp[0] * q + q**2
                out.append(-bp[1] + q1)
            if n >= 2:
                q2 = -2 * bp[1] * q - 2 * bp[0] * q1 + 2 * q * q1
                out.append(-bp[2] + q2)
        return out

    raw = RealFunction(jet, order=2, removable=beta_prev.singularities)
    bracket = lambda x: gamma - integral(x)
    key = key_like(raw, lambda x: bracket(x) / key_p(x))
    zeros = _snap(refine_sign_changes(bracket, grid.points), beta_prev.singularities)
    return _finish(raw, zeros + list(beta_prev.singularities), grid, key, f"beta_conf(Gamma={gamma:g})")


def confluent_step_derivative(
    beta_at_eps: RealFunction,
    dbeta_deps: RealFunction,
    grid: Grid | None = None,
) -> RealFunction:
    """``-beta - 2 / (d beta / d eps)`` with derivatives from the jets of both inputs."""
    grid = grid or Grid.uniform()
    with np.errstate(all="ignore"):
        d = np.asarray(dbeta_deps(grid.points), dtype=float)
    finite = d[np.isfinite(d)]
    if finite.size == 0 or np.max(np.abs(finite)) < 1e-12:
        raise DerivativeVanishes("d beta / d eps vanishes on the whole window")

    def jet(x, n):
        b = beta_at_eps.jet(x, n)
        dd = dbeta_deps.jet(x, n)
        with np.errstate(all="ignore"):
            out = [-b[0] - 2 / dd[0]]
            if n >= 1:
                out.append(-b[1] + 2 * dd[1] / dd[0] ** 2)
            if n >= 2:
                out.append(-b[2] + 2 * (dd[2] / dd[0] ** 2 - 2 * dd[1] ** 2 / dd[0] ** 3))
        return out

    raw = RealFunction(jet, order=2, removable=beta_at_eps.singularities)
    zeros = _snap(refine_sign_changes(lambda x: dbeta_deps(x), grid.points), beta_at_eps.singularities)
    return _finish(raw, zeros + list(beta_at_eps.singularities), grid, None, "beta_conf(d/deps)")


def energy_derivative_fd(family: Callable[[float], RealFunction], eps: float, rel: float = EPS_FD_REL) -> RealFunction:
    """Central difference in the energy with step ``rel * max(1, |eps|)``."""
    h = rel * max(1.0, abs(eps))
    lo, hi = family(eps - h), family(eps + h)
    centre = family(eps)

    def jet(x, n):
        a, b = hi.jet(x, n), lo.jet(x, n)
        return [(p - q) / (2 * h) for p, q in zip(a, b)]

    return RealFunction(jet, order=min(lo.order, hi.order), singularities=centre.singularities, name="dbeta/deps(fd)")


@dataclass(frozen=True, eq=False)
class ConfluentIteration:
    """Superpotentials ``beta_1..beta_n`` and potentials ``V_0..V_n`` of an iterated confluent formula."""

    betas: tuple
    potentials: tuple

    @property
    def potential(self) -> RealFunction:
        return self.potentials[-1]


def iterated_confluent(
    branch: str,
    eps: float,
    shift: float,
    order: int,
    grid: Grid | None = None,
    literal: bool = True,
) -> ConfluentIteration:
    """Free-particle branch solution pushed through the derivative formula ``order - 1`` times.

    With ``literal`` every energy derivative is total: all levels move with
    the energy together, so from the third level on the result is no longer a
    superpartner of the level below (the Riccati equation fails there).  The
    consistent form holds lower levels fixed and matches ``build_chain`` with
    derivative-route confluent steps.  ``V_k = V_{k-1} + beta_k'`` in both.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    grid = grid or Grid.uniform()
    fam = branch_family(branch, float(shift), terms=order)
    betas = [fam.at(eps, grid)]
    for _ in range(order - 1):
        fam = fam.confluent(literal=literal)
        betas.append(fam.at(eps, grid))
    potentials = [zero_potential()]
    for b in betas:
        potentials.append(add_derivative(potentials[-1], b))
    return ConfluentIteration(tuple(betas), tuple(potentials))


# ---------------------------------------------------------------- key functions


@dataclass(frozen=True, eq=False)
class KeyFunction:
    """``B_n = exp(-int beta_n)`` at level ``n`` with the recorded (inessential) constant."""

    B: RealFunction
    level: int
    constant: float

    @property
    def beta(self) -> RealFunction:
        """``-B'/B``."""
        B = self.B

        def jet(x, n):
            k = B.jet(x, n + 1)
            with np.errstate(all="ignore"):
                out = [-k[1] / k[0]]
                if n >= 1:
                    out.append(-k[2] / k[0] + (k[1] / k[0]) ** 2)
            return out

        return RealFunction(jet, order=1, singularities=B.singularities, name=f"beta_{self.level}(key)")


def key_function(beta: RealFunction, level: int = 1, x_ref: float = 0.0) -> KeyFunction:
    return KeyFunction(_prev_key(beta, x_ref), level, math.nan)


def key_function_recurrence(prev: KeyFunction, constant: float, x_ref: float = 0.0) -> KeyFunction:
    """``B_n = (C - int_{x_ref}^x B_{n-1}^2) / B_{n-1}``, so that ``(B_n B_{n-1})' = -B_{n-1}^2``."""
    Bp = prev.B
    integral = CumulativeIntegral(lambda x: np.asarray(Bp(x), dtype=float) ** 2, x_ref)
    C = float(constant)

    def jet(x, n):
        k = Bp.jet(x, min(n, 1))
        with np.errstate(all="ignore"):
            br = C - integral(x)
            out = [br / k[0]]
            if n >= 1:
                out.append(-k[0] - br * k[1] / k[0] ** 2)
        return out

    B = RealFunction(jet, order=1, singularities=refine_sign_changes(Bp, Grid.uniform().points), name=f"B_{prev.level + 1}")
    return KeyFunction(B, prev.level + 1, C)


# ---------------------------------------------------------------- oscillator confluent family


def nonsingularity_domain_am2(gamma1: float, gamma2: float) -> bool:
    """Closed-form test for a pole-free second-order confluent oscillator partner."""
    if abs(gamma1 - SQRT_PI_2) <= 1e-12:
        return gamma2 >= AM2_THRESHOLD
    if abs(gamma1 + SQRT_PI_2) <= 1e-12:
        return gamma2 <= -AM2_THRESHOLD
    return False


def am2_bracket_zeros(gamma1: float, gamma2: float, window=(-15.0, 15.0), n: int = 1201) -> np.ndarray:
    """Zeros of ``Gamma2 - int_0^x e^{y^2}(Gamma1 - sqrt(pi)/2 erf y)^2 dy`` found by scanning."""
    br = _AMBracket(gamma1, gamma2)
    pts = np.linspace(window[0], window[1], n)
    return refine_sign_changes(lambda x: br.jet(np.atleast_1d(x), 0)[0], pts)


def am2_threshold(gamma1: float = SQRT_PI_2, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-6, window=(-15.0, 15.0)) -> float:
    """Smallest ``|Gamma2|`` with a pole-free bracket on the window, by bisection on the zero scan."""
    sign = 1.0 if gamma1 > 0 else -1.0
    singular = lambda g: am2_bracket_zeros(gamma1, sign * g, window).size > 0
    if not (singular(lo) and not singular(hi)):
        raise ValueError("threshold is not bracketed by [lo, hi]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if singular(mid) else (lo, mid)
    return sign * 0.5 * (lo + hi)

"""Cumulative quadrature on a lazily extended Gauss-Legendre panel table."""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

from .core import RealFunction
from .errors import NonintegrableSingularity, QuadratureOverflow

PANEL = 0.02
GL_ORDER = 20
_CHUNK = 64


class CumulativeIntegral:
    """``x -> int_{x_ref}^x w(t) dt`` for a smooth integrand.

    Panel sums between nodes ``x_ref + j*h`` are tabulated once and reused; the
    partial panel from the node nearest ``x_ref`` side up to ``x`` is
    integrated per call.  Raises :class:`NonintegrableSingularity` if a listed
    singularity of ``w`` lies between ``x_ref`` and ``x``.
    """

    def __init__(
        self,
        w: Callable[[np.ndarray], np.ndarray],
        x_ref: float = 0.0,
        singularities: Sequence[float] = (),
        panel: float = PANEL,
        order: int = GL_ORDER,
    ):
        self.w = w
        self.x_ref = float(x_ref)
        self.h = float(panel)
        self.singularities = np.asarray(sorted(singularities), dtype=float)
        self._xi, self._wt = np.polynomial.legendre.leggauss(order)
        self._lo = 0
        self._cum = np.zeros(1)  # _cum[j - _lo] = I(x_ref + j*h)
        self._lock = threading.Lock()

    def _panels(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[:, None] + half[:, None] * self._xi
        with np.errstate(all="ignore"):
            vals = np.asarray(self.w(pts.ravel()), dtype=float).reshape(pts.shape)
        return (vals @ self._wt) * half

    def _ensure(self, jmin: int, jmax: int) -> None:
        with self._lock:
            hi = self._lo + self._cum.size - 1
            if jmax > hi:
                new_hi = jmax + _CHUNK
                j = np.arange(hi, new_hi)
                seg = self._panels(self.x_ref + j * self.h, self.x_ref + (j + 1) * self.h)
                self._cum = np.concatenate([self._cum, self._cum[-1] + np.cumsum(seg)])
            if jmin < self._lo:
                new_lo = jmin - _CHUNK
                j = np.arange(new_lo, self._lo)
                seg = self._panels(self.x_ref + j * self.h, self.x_ref + (j + 1) * self.h)
                head = self._cum[0] - np.cumsum(seg[::-1])[::-1]
                self._cum = np.concatenate([head, self._cum])
                self._lo = new_lo

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = np.atleast_1d(x).ravel()
        if self.singularities.size:
            lo, hi = np.minimum(x, self.x_ref), np.maximum(x, self.x_ref)
            s = self.singularities
            crossed = (s[None, :] > lo[:, None]) & (s[None, :] < hi[:, None])
            if np.any(crossed & np.isfinite(x)[:, None]):
                raise NonintegrableSingularity(
                    "integrand singular between the reference point and the evaluation point"
                )
        t = (x - self.x_ref) / self.h
        j = np.trunc(np.where(np.isfinite(t), t, 0.0)).astype(np.int64)
        self._ensure(int(j.min()), int(j.max()))
        node = self.x_ref + j * self.h
        out = self._cum[j - self._lo] + self._panels(node, x)
        if not np.all(np.isfinite(out[np.isfinite(x)])):
            raise QuadratureOverflow("cumulative integral left the floating-point range")
        return out.reshape(shape)


def key_from_beta(beta: RealFunction, x_ref: float = 0.0) -> RealFunction:
    """Zero mode ``exp(-int_{x_ref}^x beta)``, with the exponent accumulated in log form.

    Valid on the smooth interval of ``beta`` containing ``x_ref``.
    """
    integral = CumulativeIntegral(beta, x_ref, singularities=beta.singularities)

    def jet(x, n):
        with np.errstate(all="ignore"):
            b = beta.jet(x, max(n - 1, 0))
            u = np.exp(-integral(x))
            out = [u]
            if n >= 1:
                out.append(-b[0] * u)
            if n >= 2:
                out.append((b[0] ** 2 - b[1]) * u)
        return out

    return RealFunction(jet, order=2, name="key")

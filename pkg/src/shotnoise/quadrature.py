"""Adaptive and composite Gauss-Legendre quadrature shared by the oracle and
the conditional scheme."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np


class QuadratureError(ArithmeticError):
    """Adaptive quadrature hit its panel budget; carries the partial result."""

    def __init__(self, message, value=None, error=None, panels=None):
        super().__init__(message)
        self.value = value
        self.error = error
        self.panels = panels


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and panel rules for numerical integration.

    ``t_max=None`` lets the characteristic-function inversion find its own
    truncation by doubling until the integrand is negligible.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-11
    t_max: Optional[float] = None
    panel_order: int = 16
    max_panels: int = 20000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.panel_order < 2:
            raise ValueError("panel_order must be at least 2")
        if self.t_max is not None and not self.t_max > 0:
            raise ValueError("t_max must be positive")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    panels: int


@functools.lru_cache(maxsize=64)
def gauss_legendre(order: int):
    """Nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panel_rule(f, a, b, order):
    """Gauss rule on each panel [a_i, b_i]; f maps an (npanel, order) array."""
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = f(pts)
    return half * (vals @ w)


def adaptive_gl(f, a, b, abs_tol=1e-12, rel_tol=1e-11, order=16, max_panels=20000, breakpoints=None, initial=4):
    """Integrate a vectorised f over [a, b] by panel bisection.

    Each panel is compared against the sum over its two halves; panels whose
    difference exceeds their share of the tolerance are split.  The accepted
    value is the two-half estimate, and the reported error is the sum of the
    accepted differences (conservative for smooth integrands).
    """
    if b == a:
        return QuadResult(0.0, 0.0, 0)
    if b < a:
        res = adaptive_gl(f, b, a, abs_tol, rel_tol, order, max_panels, breakpoints, initial)
        return QuadResult(-res.value, res.error, res.panels)
    edges = [a]
    if breakpoints is not None:
        edges += sorted(p for p in breakpoints if a < p < b)
    edges.append(b)
    lo, hi = [], []
    for e0, e1 in zip(edges[:-1], edges[1:]):
        g = np.linspace(e0, e1, initial + 1)
        lo.append(g[:-1])
        hi.append(g[1:])
    lo = np.concatenate(lo)
    hi = np.concatenate(hi)
    total = 0.0
    err = 0.0
    length = b - a
    used = 0
    while lo.size:
        used += lo.size
        if used > max_panels:
            raise QuadratureError(
                f"adaptive quadrature exceeded {max_panels} panels on [{a}, {b}]",
                value=total, error=err, panels=used,
            )
        mid = 0.5 * (lo + hi)
        coarse = _panel_rule(f, lo, hi, order)
        fine = _panel_rule(f, lo, mid, order) + _panel_rule(f, mid, hi, order)
        diff = np.abs(fine - coarse)
        scale = abs(total + fine.sum())
        tol = max(abs_tol, rel_tol * scale)
        ok = diff <= tol * (hi - lo) / length
        # panels shrunk to rounding level are accepted as they stand
        ok |= (hi - lo) <= 1e-13 * max(abs(a), abs(b), length)
        total += fine[ok].sum()
        err += diff[ok].sum()
        lo = np.concatenate([lo[~ok], mid[~ok]])
        hi = np.concatenate([mid[~ok], hi[~ok]])
    return QuadResult(float(total), float(err), used)


def composite_gl(edges, order):
    """Nodes and weights of a composite Gauss rule over consecutive edges.

    ``edges`` may carry trailing axes; the panel axis is the first one.  The
    returned node/weight arrays have shape (npanel * order, ...).
    """
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    shape = (-1,) + edges.shape[1:]
    nodes = (mid[:, None] + half[:, None] * x.reshape((1, -1) + (1,) * (edges.ndim - 1))).reshape(shape)
    weights = (half[:, None] * w.reshape((1, -1) + (1,) * (edges.ndim - 1))).reshape(shape)
    return nodes, weights

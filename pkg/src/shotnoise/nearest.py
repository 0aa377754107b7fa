"""Closed-form densities for sums of intermediate nearest-point contributions
when d = 2, gamma = 4.

Given R_1 = r_1 and R_ell = r_ell, the points in between are i.i.d. uniform
in v = r^2 on (r_1^2, r_ell^2), so each contribution s = r^-4 has density
proportional to s^(-3/2) on (s_ell, s_1) with s_i = r_i^-4.  Two such terms
sum to W with a density in closed form; three sum to Z with a density given
by a single regular integral.
"""

from __future__ import annotations

import numpy as np

from .model import ModelError
from .quadrature import gauss_legendre

_Z_ORDER = 40


def _A(x, w):
    # antiderivative of s^-3/2 (w - s)^-3/2 in s, up to the factor 2 / w^2
    return (2.0 * x - w) / np.sqrt(x * (w - x))


def _pair_sum_density(w, lo, cap):
    """int over ordered pairs s_a >= s_b > lo, s_a <= cap, s_a + s_b = w of (s_a s_b)^-3/2.

    Equals (2 / w^2) [A(min(w - lo, cap)) - A(w / 2)] where the slice is
    non-empty, and zero otherwise.
    """
    w, lo, cap = np.broadcast_arrays(np.asarray(w, float), np.asarray(lo, float), np.asarray(cap, float))
    top = np.minimum(w - lo, cap)
    ok = (w > 2.0 * lo) & (top > 0.5 * w)
    out = np.zeros(w.shape)
    if ok.any():
        wo = w[ok]
        out[ok] = 2.0 / wo**2 * (_A(top[ok], wo) - _A(0.5 * wo, wo))
    return out


def _pair_norm(s1, s_far):
    return 2.0 * (s_far**-0.5 - s1**-0.5) ** 2


def _check_order(s1, s_far):
    if np.any(np.asarray(s_far) >= np.asarray(s1)):
        raise ModelError("need s_far < s1 (the outer radius must exceed the inner one)")
    if np.any(np.asarray(s_far) <= 0):
        raise ModelError("contributions must be positive")


def two_point_density_W(s1, s4, w):
    """Density of W = S_2 + S_3 given the first and fourth nearest contributions.

    On 2 s4 < w <= s1 + s4 this is

        (1/Z) (4/w^2) (1/2 - s4/w) / sqrt(1/4 - (1/2 - s4/w)^2),

    Z = 2 (s4^-1/2 - s1^-1/2)^2; above s1 + s4 the cap s_a <= s1 takes
    effect.  Zero outside (2 s4, 2 s1).  Vectorised.
    """
    _check_order(s1, s4)
    s1 = np.asarray(s1, dtype=float)
    s4 = np.asarray(s4, dtype=float)
    out = _pair_sum_density(w, s4, s1) / _pair_norm(s1, s4)
    return out if out.ndim else float(out)


def _smoothstep_rule(lo, hi, order):
    """Nodes/weights on [lo, hi] graded at both ends by w = lo + (hi-lo)(3u^2 - 2u^3)."""
    x, wts = gauss_legendre(order)
    u = 0.5 * (x + 1.0)
    g = u * u * (3.0 - 2.0 * u)
    dg = 6.0 * u * (1.0 - u)
    span = (hi - lo)[..., None]
    return lo[..., None] + span * g, span * 0.5 * wts * dg


def three_point_density_Z(s1, s5, z, spec=None):
    """Density of Z = S_2 + S_3 + S_4 given the first and fifth nearest contributions.

    With the largest of the three equal to z - w and the other two summing to
    w (each capped at z - w),

        f_Z(z) = (1/Z3) int (z - w)^-3/2 G(w) dw,   w in (max(z - s1, 2 s5), 2z/3),

    Z3 = (4/3) (s5^-1/2 - s1^-1/2)^3.  The integrand is bounded with a kink
    where the cap switches, at w = (z + s5)/2; each piece uses a graded
    Gauss rule.  ``spec.panel_order`` overrides the default node count.
    """
    _check_order(s1, s5)
    order = _Z_ORDER if spec is None else max(int(spec.panel_order), 8)
    s1a, s5a, za = np.broadcast_arrays(np.asarray(s1, float), np.asarray(s5, float), np.asarray(z, float))
    out = np.zeros(za.shape)
    lo = np.maximum(za - s1a, 2.0 * s5a)
    hi = 2.0 * za / 3.0
    ok = hi > lo
    if ok.any():
        zo, lo_o, hi_o, s1o, s5o = za[ok], lo[ok], hi[ok], s1a[ok], s5a[ok]
        kink = np.clip(0.5 * (zo + s5o), lo_o, hi_o)
        total = np.zeros(zo.shape)
        for a, b in ((lo_o, kink), (kink, hi_o)):
            nodes, wts = _smoothstep_rule(a, b, order)
            cap = zo[:, None] - nodes
            vals = cap**-1.5 * _pair_sum_density(nodes, s5o[:, None], cap)
            total += np.sum(vals * wts, axis=-1)
        norm = (4.0 / 3.0) * (s5o**-0.5 - s1o**-0.5) ** 3
        out[ok] = total / norm
    return out if out.ndim else float(out)

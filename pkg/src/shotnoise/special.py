"""Special functions for the tilt and Edgeworth formulas.

The workhorse is the kernel

    I(a, x) = int_0^1 exp(x u) u^(a-1) du,      a > 0, x real,

which is a lower incomplete gamma function for x < 0 and a Kummer function
for x > 0.  Tilted cumulants, the tilt equation and psi_0 are all expressed
through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelError, ModelParams

X_OVERFLOW = 700.0
_EPS = 1e-17
_MAX_TERMS = 5000
_TINY = 1e-300


class RangeError(ArithmeticError):
    """Argument outside the range where the result is representable."""


@dataclass(frozen=True)
class KernelEval:
    a: float
    x: float
    value: float
    log_value: float


def kernel_I(a: float, x: float) -> KernelEval:
    """Evaluate I(a, x) with its logarithm."""
    if not a > 0:
        raise ModelError(f"kernel exponent must be positive, got a={a}")
    value = float(kernel_values(a, np.array([x], dtype=float))[0])
    return KernelEval(a=a, x=float(x), value=value, log_value=math.log(value))


def kernel_values(a: float, x) -> np.ndarray:
    """Vectorised I(a, x) for scalar a > 0 and an array of real x.

    Regimes: power series for x >= -1 (positive terms for x >= 0), the
    lower-gamma series exp(-z) sum z^k / (a)_(k+1) for z = -x < a + 1, and
    z^-a Gamma(a) minus the Legendre continued fraction otherwise.
    """
    if not a > 0:
        raise ModelError(f"kernel exponent must be positive, got a={a}")
    x = np.asarray(x, dtype=float)
    if np.any(x > X_OVERFLOW):
        raise RangeError(f"I(a, x) overflows for x > {X_OVERFLOW}")
    if np.any(np.isnan(x)):
        raise RangeError("NaN argument to I(a, x)")
    flat = x.ravel()
    out = np.empty_like(flat)

    series = flat >= -1.0
    z = -flat
    lowgam = (~series) & (z < a + 1.0)
    contfrac = (~series) & ~lowgam
    if series.any():
        out[series] = _kummer_series(a, flat[series])
    if lowgam.any():
        out[lowgam] = _lower_gamma_series(a, z[lowgam])
    if contfrac.any():
        out[contfrac] = _upper_gamma_complement(a, z[contfrac])
    return out.reshape(x.shape)


def _kummer_series(a, x):
    # sum_k x^k / (k! (a + k))
    term = np.ones_like(x)
    total = term / a
    active = np.arange(x.size)
    xa = x.copy()
    k = 0
    while active.size:
        k += 1
        if k > _MAX_TERMS:
            raise RangeError("kernel power series did not converge")
        term[active] *= xa / k
        contrib = term[active] / (a + k)
        total[active] += contrib
        done = (np.abs(contrib) <= _EPS * np.abs(total[active])) & (k > np.abs(xa))
        if done.any():
            keep = ~done
            active = active[keep]
            xa = xa[keep]
    return total


def _lower_gamma_series(a, z):
    # exp(-z) sum_k z^k / (a (a+1) ... (a+k))
    term = np.full_like(z, 1.0 / a)
    total = term.copy()
    active = np.arange(z.size)
    za = z.copy()
    k = 0
    while active.size:
        k += 1
        if k > _MAX_TERMS:
            raise RangeError("lower incomplete gamma series did not converge")
        term[active] *= za / (a + k)
        total[active] += term[active]
        done = term[active] <= _EPS * total[active]
        if done.any():
            active = active[~done]
            za = za[~done]
    return np.exp(-z) * total


def _upper_gamma_complement(a, z):
    # z^-a Gamma(a) - exp(-z) * CF, with CF from modified Lentz on the
    # Legendre continued fraction for Gamma(a, z) e^z z^-a.
    b = z + 1.0 - a
    c = np.full_like(z, 1.0 / _TINY)
    dd = 1.0 / b
    h = dd.copy()
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b = b + 2.0
        dd = an * dd + b
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        dd = 1.0 / dd
        delta = dd * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-15):
            break
    else:
        raise RangeError("incomplete gamma continued fraction did not converge")
    lead = np.exp(math.lgamma(a) - a * np.log(z))
    return lead - np.exp(-z) * h


def psi0(params: ModelParams, s):
    """psi_0(s) = int_0^1 (exp(-s u) - 1 + s u) u^(-1-d/gamma) du for real s.

    Series sum_{n>=2} (-s)^n / (n! (n - alpha)) for s <= 2 (positive terms
    when s <= 0).  For s > 2, integration by parts gives

        alpha psi_0(s) = s/(1-alpha) - s I(1-alpha, -s) + 1 - exp(-s) - s.
    """
    alpha = params.alpha
    s_arr = np.asarray(s, dtype=float)
    if np.any(-s_arr > X_OVERFLOW):
        raise RangeError(f"psi_0(s) overflows for s < {-X_OVERFLOW}")
    flat = s_arr.ravel()
    out = np.empty_like(flat)
    small = flat <= 2.0
    if small.any():
        out[small] = _psi0_series(alpha, flat[small])
    big = ~small
    if big.any():
        sb = flat[big]
        kern = kernel_values(1.0 - alpha, -sb)
        out[big] = (sb / (1.0 - alpha) - sb * kern - np.expm1(-sb) - sb) / alpha
    out = out.reshape(s_arr.shape)
    return out if out.ndim else float(out)


def _psi0_series(alpha, s):
    q = -s
    term = q * q / 2.0
    total = term / (2.0 - alpha)
    active = np.arange(s.size)
    qa = q.copy()
    n = 2
    while active.size:
        n += 1
        if n > _MAX_TERMS:
            raise RangeError("psi_0 series did not converge")
        term[active] *= qa / n
        contrib = term[active] / (n - alpha)
        total[active] += contrib
        done = (np.abs(contrib) <= _EPS * np.abs(total[active])) & (n > np.abs(qa))
        if done.any():
            active = active[~done]
            qa = qa[~done]
    return total


def psi0_remainder(params: ModelParams, s):
    """d1 psi_0(s) - d3 s, for s > 0.

    For large s, psi_0 grows linearly; splitting off the linear part lets the
    lower-tail log prefactor avoid cancelling d3 s against -y s.
    """
    alpha = params.alpha
    s = np.asarray(s, dtype=float)
    kern = kernel_values(1.0 - alpha, -s)
    return (params.d1 / alpha) * (-np.expm1(-s) - s * kern)


def hermite_at_zero(n: int) -> int:
    """Probabilists' Hermite polynomial He_n at 0."""
    if n < 0:
        raise ModelError("Hermite order must be non-negative")
    if n % 2:
        return 0
    m = n // 2
    dfact = 1
    for j in range(1, n, 2):
        dfact *= j
    return -dfact if m % 2 else dfact


_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return out if out.ndim else float(out)

"""Edgeworth correction at the tilted mean and the resulting density of Y^(r)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelError, ModelParams, mean_tail, sigma_tail
from .special import hermite_at_zero
from .tilt import (
    SupportError,
    TiltState,
    in_support,
    log_prefactor_values,
    solve_scaled,
    tilt,
    tilted_cumulant_values,
)

MAX_ORDER = 30
DEFAULT_ORDER = 2
_PHI0 = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class EdgeworthTable:
    k: int
    c: np.ndarray  # c[j, l] for 1 <= l <= j <= k; other entries zero
    nf_k: float
    state: TiltState


def _check_order(k, max_order=MAX_ORDER):
    if int(k) != k or k < 0:
        raise ModelError(f"Edgeworth order must be a non-negative integer, got {k}")
    if k > max_order:
        raise ModelError(f"Edgeworth order {k} exceeds the configured maximum {max_order}")


def coefficient_table(kappa, k: int) -> np.ndarray:
    """c~_{j,l} from tilted cumulants by convolution over compositions.

    ``kappa`` is indexed so that kappa[n - 2] = kappa~_n, for n up to k + 2;
    trailing axes are carried along (one table per state).  Returns an array
    of shape (k + 1, k + 1, ...) holding c[j, l].

    Ordered l-tuples (n_1..n_l), 3 <= n_i <= k + 2, with sum (n_i - 2) = j
    are accumulated one factor at a time; the l! is divided out at the end.
    The loop order for a given j does not depend on k, so entries with j <= k
    are bit-identical across orders.
    """
    kappa = np.asarray(kappa, dtype=float)
    tail = kappa.shape[1:]
    c = np.zeros((k + 1, k + 1) + tail)
    if k == 0:
        return c
    a = [None] + [kappa[m] / math.factorial(m + 2) for m in range(1, k + 1)]
    prev = [None] * (k + 1)  # P_{l-1}[j]
    for j in range(1, k + 1):
        prev[j] = a[j]
        c[j, 1] = a[j]
    for ell in range(2, k + 1):
        cur = [None] * (k + 1)
        for j in range(ell, k + 1):
            acc = np.zeros(tail)
            for m in range(1, j - ell + 2):
                acc = acc + prev[j - m] * a[m]
            cur[j] = acc
            c[j, ell] = acc / math.factorial(ell)
        prev = cur
    return c


def coefficient_table_bruteforce(kappa, k: int) -> np.ndarray:
    """Literal enumeration of all ordered tuples; test oracle for small k."""
    c = np.zeros((k + 1, k + 1))
    for j in range(1, k + 1):
        for ell in range(1, j + 1):
            total = 0.0
            for tup in itertools.product(range(3, k + 3), repeat=ell):
                if sum(n - 2 for n in tup) != j:
                    continue
                prod = 1.0
                for n in tup:
                    prod *= kappa[n - 2] / math.factorial(n)
                total += prod
            c[j, ell] = total / math.factorial(ell)
    return c


def nf_from_table(c, kappa2, rho, k: int):
    """nu~_k = phi(0)/sqrt(k2) [1 + sum_j (-1)^j rho^-j sum_l c_jl k2^-(j/2+l) H_{j+2l}(0)].

    Odd j carry H_odd(0) = 0 and are skipped outright, so nu~_{2m+1} and
    nu~_{2m} are the same floating-point expression.
    """
    kappa2 = np.asarray(kappa2, dtype=float)
    rho = np.asarray(rho, dtype=float)
    total = np.zeros(np.broadcast(kappa2, rho).shape)
    for j in range(2, k + 1, 2):
        inner = np.zeros_like(total)
        for ell in range(1, j + 1):
            inner = inner + c[j, ell] * kappa2 ** (-(j / 2.0 + ell)) * float(hermite_at_zero(j + 2 * ell))
        total = total + rho ** (-float(j)) * inner
    return _PHI0 / np.sqrt(kappa2) * (1.0 + total)


def build_coefficients(state: TiltState, k: int, max_order: int = MAX_ORDER) -> EdgeworthTable:
    _check_order(k, max_order)
    if len(state.tkappa) < k + 1:
        raise ModelError(f"tilted cumulants needed up to order {k + 2}")
    kap = np.asarray(state.tkappa[: k + 1])
    c = coefficient_table(kap, k)
    nf = float(nf_from_table(c, kap[0], state.rho, k))
    return EdgeworthTable(k=k, c=c, nf_k=nf, state=state)


def nf_k(table: EdgeworthTable) -> float:
    return table.nf_k


def validity_flag(params: ModelParams, y: float, r: float, k: int, C4: float = 1.0) -> bool:
    """Whether r meets the expansion's rate conditions (unknown C4 set to 1)."""
    rho = r ** (params.d / 2.0)
    if y >= 0:
        return rho >= C4 * math.sqrt(k)
    return rho >= max(C4 * math.sqrt(k), k)


def density_Y_values(params: ModelParams, y, r, k: int = DEFAULT_ORDER):
    """Vectorised order-k approximation of f_{Y^(r)}(y); zero outside the support.

    Negative Edgeworth values (possible for small rho and k >= 2) are clipped
    to zero.
    """
    _check_order(k)
    y, r = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(r, dtype=float))
    out = np.zeros(y.shape)
    rho = r ** (params.d / 2.0)
    ok = in_support(params, y, rho) & (r > 0)
    if not ok.any():
        return out
    yo, ro = y[ok], rho[ok]
    x = np.zeros_like(yo)
    nz = yo != 0
    if nz.any():
        x[nz] = solve_scaled(params, yo[nz] / ro[nz])
    kap = tilted_cumulant_values(params, x, k + 2)
    c = coefficient_table(kap[: k + 1], k)
    nf = nf_from_table(c, kap[0], ro, k)
    lp = np.zeros_like(yo)
    if nz.any():
        lp[nz] = log_prefactor_values(params, x[nz], yo[nz], ro[nz])
    out[ok] = np.maximum(nf, 0.0) * np.exp(lp)
    return out


def density_Y(params: ModelParams, y: float, r: float, k: int = DEFAULT_ORDER) -> float:
    """Order-k tilted Edgeworth approximation nu~_k e^(-xi y) phi_Y(-xi)."""
    _check_order(k)
    state = tilt(params, y, r, n_max=k + 2)
    table = build_coefficients(state, k)
    return max(table.nf_k, 0.0) * math.exp(state.log_prefactor)


def density_Sbar(params: ModelParams, sbar: float, r: float, k: int = DEFAULT_ORDER) -> float:
    """Density of Sbar^(r) by standardisation."""
    if not sbar > 0:
        raise SupportError(f"Sbar^(r) is positive; got sbar={sbar}")
    sig = float(sigma_tail(params, r))
    y = (sbar - float(mean_tail(params, r))) / sig
    return density_Y(params, y, r, k) / sig


def error_bound_form(params: ModelParams, state: TiltState, k: int, C2: float = 1.0, C3: float = 1.0) -> float:
    """Shape of the relative-error bound for given constants (no certified value)."""
    _check_order(k)
    k2 = state.tkappa[0]
    lead = C2 * C3**k * (float(k) ** (k / 2.0) if k else 1.0)
    if state.y >= 0:
        return lead / (math.sqrt(k2) * state.rho) ** (k + 1)
    return lead * (k2 ** (1.0 / params.d1 - 0.5) / state.rho) ** (k + 1)

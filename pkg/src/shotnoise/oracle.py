"""Reference engines: characteristic-function inversion for the density of
Y^(r), Monte Carlo simulation of Sbar^(r), and the finite-n convergence check.

The inversion works with complex arguments and keeps its own evaluation of
the kernel I(a, z) (Gauss-Jacobi for moderate |z|, a complex continued
fraction otherwise), so it does not share numerics with the real-argument
code used by the Edgeworth approximation.
"""

from __future__ import annotations

import functools
import math
from typing import Optional

import numpy as np
from scipy.special import roots_jacobi

from .model import ModelError, ModelParams, first_radius_density, mean_tail, sigma_tail, stable_density_S
from .quadrature import QuadratureError, QuadratureSpec, adaptive_gl
from .special import RangeError
from .tilt import in_support, solve_xi, tilted_cumulants

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "cf_Y",
    "log_cf_Y",
    "decay_constant",
    "truncation_point",
    "invert_density",
    "invert_cdf",
    "density_Sbar_oracle",
    "conditional_cdf_exact",
    "density_S_oracle",
    "simulate_Sbar",
    "finite_n_density_check",
    "spawn_generator",
]

_JACOBI_NODES = 100
_CF_SWITCH = 60.0
_TINY = 1e-300


@functools.lru_cache(maxsize=16)
def _jacobi_rule(a: float, n: int):
    # int_0^1 g(u) u^(a-1) du ~ sum w_i g(u_i)
    x, w = roots_jacobi(n, 0.0, a - 1.0)
    return (1.0 + x) / 2.0, w / 2.0**a


def _kernel_complex(a: float, z):
    """I(a, z) = int_0^1 exp(z u) u^(a-1) du for complex z."""
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    out = np.empty_like(flat)
    use_cf = (np.abs(flat) > _CF_SWITCH) & (flat.real < np.abs(flat.imag))
    quad = ~use_cf
    if quad.any():
        u, w = _jacobi_rule(a, _JACOBI_NODES)
        out[quad] = np.exp(np.multiply.outer(flat[quad], u)) @ w
    if use_cf.any():
        q = -flat[use_cf]
        h = _gamma_cf_complex(a, q)
        # (-z)^(-a) Gamma(a) - exp(z) * [Gamma(a, -z) exp(-z) (-z)^(-a)]
        out[use_cf] = np.exp(math.lgamma(a) - a * np.log(q)) - np.exp(-q) * h
    return out.reshape(z.shape)


def _gamma_cf_complex(a, q):
    b = q + 1.0 - a
    c = np.full_like(q, 1.0 / _TINY)
    dd = 1.0 / b
    h = dd.copy()
    for i in range(1, 5000):
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
            return h
    raise RangeError("complex incomplete gamma continued fraction did not converge")


def _psi0_complex(alpha: float, s):
    """psi_0(s) for complex s: power series near 0, integration by parts beyond."""
    s = np.asarray(s, dtype=complex)
    flat = s.ravel()
    out = np.empty_like(flat)
    small = np.abs(flat) <= 2.0
    if small.any():
        q = -flat[small]
        term = q * q / 2.0
        total = term / (2.0 - alpha)
        for n in range(3, 80):
            term = term * q / n
            total = total + term / (n - alpha)
        out[small] = total
    big = ~small
    if big.any():
        sb = flat[big]
        kern = _kernel_complex(1.0 - alpha, -sb)
        out[big] = (sb / (1.0 - alpha) - sb * kern - np.expm1(-sb) - sb) / alpha
    return out.reshape(s.shape)


def log_cf_Y(params: ModelParams, r: float, t):
    """log chi_{Y^(r)}(t) for complex t; Im t = -xi gives the tilted offsets."""
    rho = r ** (params.d / 2.0)
    t = np.asarray(t, dtype=complex)
    return params.d1 * rho**2 * _psi0_complex(params.alpha, -1j * t / rho)


def cf_Y(params: ModelParams, r: float, t):
    """Characteristic function of the standardised tail sum Y^(r)."""
    if not r > 0:
        raise ModelError(f"radius must be positive, got {r}")
    out = np.exp(log_cf_Y(params, r, t))
    return out if out.ndim else complex(out)


def decay_constant(params: ModelParams) -> float:
    """c in log|chi_Y(t)| ~ -c rho^d1 |t|^alpha as |t| -> infinity."""
    a = params.alpha
    return -params.d1 * math.gamma(-a) * math.cos(math.pi * a / 2.0)


def truncation_point(params: ModelParams, r: float, abs_tol: float, c_fit: Optional[float] = None) -> float:
    """Point beyond which the stretched-exponential envelope is below abs_tol/10, doubled.

    ``c_fit`` defaults to half the asymptotic decay constant.
    """
    if c_fit is None:
        c_fit = 0.5 * decay_constant(params)
    rho = r ** (params.d / 2.0)
    target = -math.log(abs_tol / 10.0)
    t = (target / (c_fit * rho**params.d1)) ** (1.0 / params.alpha)
    return 2.0 * max(t, rho / 2.0)


def _inversion_integral(integrand, scale, spec: QuadratureSpec, tol):
    """int_0^inf integrand(t) dt with automatic truncation by doubling segments."""
    kw = dict(rel_tol=spec.rel_tol, order=spec.panel_order, max_panels=spec.max_panels)
    if spec.t_max is not None:
        res = adaptive_gl(integrand, 0.0, spec.t_max, abs_tol=tol, **kw)
        return res.value, res.error
    lo, hi = 0.0, 8.0 * scale
    res = adaptive_gl(integrand, lo, hi, abs_tol=tol, **kw)
    total, err = res.value, res.error
    quiet = 0
    for _ in range(200):
        lo, hi = hi, 2.0 * hi
        seg = adaptive_gl(integrand, lo, hi, abs_tol=tol, **kw)
        total += seg.value
        err += seg.error
        probe = np.abs(integrand(np.linspace(lo, hi, 65))).max() * (hi - lo)
        if max(abs(seg.value), probe) < 0.1 * max(tol, spec.rel_tol * abs(total)):
            quiet += 1
            if quiet == 2:
                return total, err
        else:
            quiet = 0
    raise QuadratureError("characteristic function did not decay within the search range", value=total, error=err)


def invert_density(params: ModelParams, y: float, r: float, spec: Optional[QuadratureSpec] = None, tilted: bool = True) -> float:
    """f_{Y^(r)}(y) by Fourier inversion.

    With ``tilted`` the contour is shifted to Im t = -xi(y, r), where the
    integrand is a non-oscillating bell of width 1/sqrt(kappa~_2):

        f(y) = e^(-xi y) phi(-xi) / pi * int_0^inf Re[chi_Y(t - i xi) e^(-ity) / phi(-xi)] dt.

    Returns 0 outside the support.  ``spec.abs_tol`` bounds the error of f.
    """
    spec = spec or QuadratureSpec()
    if not r > 0:
        raise ModelError(f"radius must be positive, got {r}")
    rho = r ** (params.d / 2.0)
    if not in_support(params, y, rho):
        return 0.0
    xi = 0.0
    scale = 1.0
    if tilted and y != 0:
        state = tilted_cumulants(params, solve_xi(params, y, r), 2)
        xi = state.xi
        scale = 1.0 / math.sqrt(state.kappa(2))
    base = complex(log_cf_Y(params, r, -1j * xi)).real

    def integrand(t):
        z = log_cf_Y(params, r, t - 1j * xi) - base - 1j * t * y
        return np.exp(z).real

    log_pref = base - xi * y
    tol = spec.abs_tol * math.pi * math.exp(min(-log_pref, 700.0))
    value, _ = _inversion_integral(integrand, scale, spec, tol)
    return max(value, 0.0) * math.exp(log_pref) / math.pi


def invert_cdf(params: ModelParams, y: float, r: float, spec: Optional[QuadratureSpec] = None) -> float:
    """P(Y^(r) <= y) by the Gil-Pelaez formula."""
    spec = spec or QuadratureSpec(abs_tol=1e-10, rel_tol=1e-10)
    rho = r ** (params.d / 2.0)
    if y <= -params.d3 * rho:
        return 0.0

    def integrand(t):
        return (np.exp(log_cf_Y(params, r, t) - 1j * t * y)).imag / t

    value, _ = _inversion_integral(integrand, 1.0, spec, spec.abs_tol * math.pi)
    return min(max(0.5 - value / math.pi, 0.0), 1.0)


def density_Sbar_oracle(params: ModelParams, sbar, r: float, spec: Optional[QuadratureSpec] = None):
    """Density of Sbar^(r) from the tilted inversion, vectorised over sbar."""
    sig = float(sigma_tail(params, r))
    mu = float(mean_tail(params, r))
    sb = np.atleast_1d(np.asarray(sbar, dtype=float))
    out = np.array([invert_density(params, (v - mu) / sig, r, spec) / sig if v > 0 else 0.0 for v in sb.ravel()])
    out = out.reshape(sb.shape)
    return out if np.ndim(sbar) else float(out[0])


def _joint_R1_S(params: ModelParams, s: float, spec: Optional[QuadratureSpec]):
    """r1 -> f_{R1}(r1) f_{Sbar^(r1)}(s - r1^-gamma), the exact joint density of (R1, S)."""
    spec = spec or QuadratureSpec(abs_tol=1e-13, rel_tol=1e-10)

    def f(r1):
        r1 = np.asarray(r1, dtype=float)
        flat = r1.ravel()
        out = np.zeros(flat.size)
        for i, a in enumerate(flat):
            rest = s - a ** (-params.gamma)
            if rest > 0:
                out[i] = first_radius_density(params, a) * density_Sbar_oracle(params, rest, a, spec)
        return out.reshape(r1.shape)

    return f


def _r1_upper(params: ModelParams, s: float) -> float:
    # P(R1 > r) = exp(-d2 r^d) is below 1e-300 beyond this radius
    return (700.0 / params.d2) ** (1.0 / params.d)


def density_S_oracle(params: ModelParams, s: float, spec: Optional[QuadratureSpec] = None, tol: float = 1e-10) -> float:
    """f_S(s) by integrating the exact joint density of (R1, S) over r1."""
    lo = s ** (-1.0 / params.gamma)
    f = _joint_R1_S(params, s, spec)
    hi = max(_r1_upper(params, s), 2.0 * lo)
    return adaptive_gl(f, lo, hi, abs_tol=tol, rel_tol=tol, order=12, initial=8).value


def conditional_cdf_exact(params: ModelParams, r: float, s: float, spec: Optional[QuadratureSpec] = None, tol: float = 1e-10, f_S: Optional[float] = None) -> float:
    """P(R1 <= r | S = s) from the exact joint density of (R1, S).

    Conditioning on R1 = r1 leaves a Poisson process outside r1, so
    S - r1^-gamma has the law of Sbar^(r1), whose density comes from the
    inversion oracle.  The denominator defaults to the same integral over
    all r1.
    """
    lo = s ** (-1.0 / params.gamma)
    if r <= lo:
        return 0.0
    f = _joint_R1_S(params, s, spec)
    num = adaptive_gl(f, lo, r, abs_tol=tol, rel_tol=tol, order=12, initial=8).value
    if f_S is None:
        f_S = density_S_oracle(params, s, spec, tol)
    return num / f_S


def spawn_generator(seed: int, *stream) -> np.random.Generator:
    """Counter-based generator for a seed and a stream index path.

    Child streams are keyed by (seed, *stream) through SeedSequence hashing, so
    parallel workers draw from independent, reproducible streams.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def default_tail_radius(r: float) -> float:
    return 8.0 * r


def simulate_Sbar(params: ModelParams, r: float, tail_radius: Optional[float] = None, rng_seed: int = 0, size: Optional[int] = None, chunk: int = 20000):
    """Draws of Sbar^(r) with the annulus (r, T] simulated and the tail beyond T
    replaced by its mean mu(T).

    In v = R^d coordinates the points form a Poisson process of rate d2, so
    the annulus holds Poisson(d2 (T^d - r^d)) points placed uniformly in
    (r^d, T^d].  The estimator is unbiased; its missing spread has standard
    deviation sigma(T).  Returns a float when ``size`` is None.
    """
    if not r > 0:
        raise ModelError(f"radius must be positive, got {r}")
    T = default_tail_radius(r) if tail_radius is None else float(tail_radius)
    if T < r:
        raise ModelError("tail_radius must be at least r")
    n = 1 if size is None else int(size)
    d, g = params.d, params.gamma
    v0, v1 = r**d, T**d
    rate = params.d2 * (v1 - v0)
    tail = float(mean_tail(params, T))
    out = np.empty(n)
    for c, start in enumerate(range(0, n, chunk)):
        m = min(chunk, n - start)
        rng = spawn_generator(rng_seed, c)
        counts = rng.poisson(rate, size=m)
        v = v0 + (v1 - v0) * rng.random(counts.sum())
        contrib = v ** (-g / d)
        owner = np.repeat(np.arange(m), counts)
        out[start:start + m] = np.bincount(owner, weights=contrib, minlength=m) + tail
    return float(out[0]) if size is None else out


def _finite_n_log_sums(params: ModelParams, n: int, samples: int, seed: int, block: int = 64, chunk: int = 2000):
    """log S^(n) for n i.i.d. points uniform in the ball of volume n / lam.

    The ordered values U_(j) = m Gamma_j / Gamma_(n+1) come from cumulative
    Exp(1) sums whose columns are drawn in fixed blocks, so runs with the same
    seed share their first exponentials across n (common random numbers).
    """
    d, g = params.d, params.gamma
    m = n / params.d2
    out = np.empty(samples)
    nblocks = -(-(n + 1) // block)
    for c, start in enumerate(range(0, samples, chunk)):
        rows = min(chunk, samples - start)
        cols = [spawn_generator(seed, c, b).standard_exponential((chunk, block))[:rows] for b in range(nblocks)]
        e = np.concatenate(cols, axis=1)[:, : n + 1]
        gam = np.cumsum(e, axis=1)
        u = m * gam[:, :n] / gam[:, n:]
        out[start:start + rows] = np.log(np.sum(u ** (-g / d), axis=1))
    return out


def _coupled_log_sums(params: ModelParams, n: int, samples: int, seed: int, v_max: float = 400.0, chunk: int = 2000):
    """Pathwise-coupled draws of (log S^(n), log S).

    One Poisson process of rate d2 in v = R^d is drawn on (0, max(m, v_max)).
    Its K ~ Poisson(n) points in (0, m) are i.i.d. uniform given K; keeping
    the first n of them, topped up with fresh uniforms when K < n, gives n
    i.i.d. uniforms in the ball.  S is the full sum plus the mean of the
    region beyond v_max.
    """
    d, g = params.d, params.gamma
    m = n / params.d2
    top = max(m, float(v_max))
    tail = float(mean_tail(params, top ** (1.0 / d)))
    fin = np.empty(samples)
    inf = np.empty(samples)
    for c, start in enumerate(range(0, samples, chunk)):
        rows = min(chunk, samples - start)
        rng = spawn_generator(seed, c)
        k_in = rng.poisson(n, size=rows)
        k_out = rng.poisson(params.d2 * (top - m), size=rows)
        k_add = np.maximum(n - k_in, 0)
        u_in = (m * rng.random(k_in.sum())) ** (-g / d)
        u_out = (m + (top - m) * rng.random(k_out.sum())) ** (-g / d)
        u_add = (m * rng.random(k_add.sum())) ** (-g / d)
        owner_in = np.repeat(np.arange(rows), k_in)
        # rank of each in-ball point within its row; only the first n are kept
        rank = np.arange(owner_in.size) - np.repeat(np.cumsum(k_in) - k_in, k_in)
        keep = rank < n
        s_in = np.bincount(owner_in, weights=u_in, minlength=rows)
        s_keep = np.bincount(owner_in[keep], weights=u_in[keep], minlength=rows)
        s_out = np.bincount(np.repeat(np.arange(rows), k_out), weights=u_out, minlength=rows)
        s_add = np.bincount(np.repeat(np.arange(rows), k_add), weights=u_add, minlength=rows)
        fin[start:start + rows] = np.log(s_keep + s_add)
        inf[start:start + rows] = np.log(s_in + s_out + tail)
    return fin, inf


def _smoothed_target(params: ModelParams, s_grid, h: float, nodes: int = 80):
    # f_S seen through the same log-space Gaussian kernel as the estimate
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    ls = np.log(s_grid)[:, None] - h * x[None, :]
    g = np.asarray(stable_density_S(params, np.exp(ls))) * np.exp(ls)
    return (g * w).sum(axis=1) / (math.sqrt(2.0 * math.pi) * s_grid)


def _log_kde(logs, s_grid, h):
    ls = np.log(s_grid)
    dens = np.zeros_like(ls)
    for start in range(0, logs.size, 4096):
        z = (ls[:, None] - logs[None, start:start + 4096]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    return dens / (logs.size * h * math.sqrt(2.0 * math.pi) * s_grid)


FINITE_N_METHODS = ("control", "smoothed", "raw")


def finite_n_density_check(
    params: ModelParams,
    n: int,
    s_grid,
    rng_seed: int = 0,
    samples: int = 100000,
    method: str = "control",
    bandwidth: Optional[float] = None,
) -> float:
    """Estimate sup over s_grid of |f_{S^(n)} - f_S| through a kernel density.

    The kernel estimate is built on log S^(n) (Gaussian kernel, bandwidth by
    default 1.06 N^(-1/5) times the sample spread) and mapped back by the
    Jacobian 1/s.  Methods:

    ``raw``
        KDE against f_S itself; carries the smoothing bias of the kernel.
    ``smoothed``
        KDE against f_S convolved with the same kernel, so the bias cancels.
    ``control``
        each finite-n draw is paired with a draw of S built from the same
        Poisson points, and the distance is sup |KDE_n - KDE_inf|.  KDE_inf
        has the smoothed f_S as its mean, so this estimates the same quantity
        as ``smoothed`` with the shared Monte Carlo noise removed.
    """
    if n < 8:
        raise ModelError("finite-n check needs n >= 8")
    if method not in FINITE_N_METHODS:
        raise ModelError(f"method must be one of {FINITE_N_METHODS}")
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    if np.any(s_grid <= 0):
        raise ModelError("s_grid must be positive")
    if method == "control":
        logs, logs_inf = _coupled_log_sums(params, n, samples, rng_seed)
    else:
        logs = _finite_n_log_sums(params, n, samples, rng_seed)
    h = 1.06 * np.std(logs) * samples ** (-0.2) if bandwidth is None else float(bandwidth)
    dens = _log_kde(logs, s_grid, h)
    if method == "control":
        ref = _log_kde(logs_inf, s_grid, h)
    elif method == "smoothed":
        ref = _smoothed_target(params, s_grid, h)
    else:
        ref = stable_density_S(params, s_grid)
    return float(np.max(np.abs(dens - ref)))

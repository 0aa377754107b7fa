"""Samplers for the radii: unconditional draws, and a pairwise Gibbs sampler
for n points in a ball conditioned on their total contribution.

Unconditionally the values V_i = R_i^d form a Poisson process of rate d2 on
(0, inf), so R_i^d = T_1 + ... + T_i with T_j i.i.d. Exp(d2).

For the conditional sampler, n points are uniform in the ball of volume
n / lam, so U_j = |X_j|^d is uniform on (0, m) with m = n / d2 and
W_j = U_j^(-gamma/d) has density proportional to w^(-1-alpha) on (b, inf),
b = m^(-gamma/d).  A Gibbs step picks two coordinates, keeps their sum c and
redraws the split from the exact conditional law

    x ~ (x (c - x))^(-1-alpha)   on (b, c - b),

which leaves the law of (W_1..W_n) given sum W_j = s invariant.

``gibbs_process`` targets the infinite process instead: the points in the
same ball (a Poisson number with mean n) together with the total Sbar of the
points outside it, jointly conditioned on S = s.  Besides the pair moves it
uses Metropolis exchange moves between one point and the outside total and
birth-death moves for the count; the density of the outside total is
tabulated once from the Fourier-inversion oracle.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ModelError, ModelParams, make_params, mean_tail, sigma_tail
from .oracle import invert_density, spawn_generator

__all__ = [
    "RadiiSample",
    "GibbsChainState",
    "DominanceReport",
    "box_size",
    "sample_radii",
    "sample_radii_batch",
    "pair_resample",
    "gibbs_conditional",
    "gibbs_process",
    "gibbs_radii",
    "dominance_test",
]

_ARCLENGTH_GRID = 4097
_OUTSIDE_Y_MAX = 40.0
_OUTSIDE_POINTS = 801
_LOG_FLOOR = math.log(1e-300)
OUTSIDE_MODES = ("none", "mean", "exact")


@dataclass(frozen=True)
class RadiiSample:
    radii: np.ndarray
    power_sum: float
    meta: dict = field(default_factory=dict)


@dataclass
class GibbsChainState:
    """State of one or many chains (rows of ``u`` when several)."""

    u: np.ndarray
    s: float
    sweep_count: int
    m: float
    drift: float = 0.0
    d: int = 2

    @property
    def radii(self) -> np.ndarray:
        """Sorted radii u^(1/d), per chain."""
        return np.sort(self.u, axis=-1) ** (1.0 / self.d)


def box_size(params: ModelParams, n: int) -> float:
    """m = n d / (lam omega) = n / d2: the ball holding n points on average."""
    return n / params.d2


def sample_radii(params: ModelParams, count: int, seed: int) -> RadiiSample:
    """The ``count`` nearest radii of the Poisson process."""
    if int(count) != count or count < 1:
        raise ModelError("count must be a positive integer")
    rng = spawn_generator(seed)
    v = np.cumsum(rng.exponential(1.0 / params.d2, size=int(count)))
    radii = v ** (1.0 / params.d)
    return RadiiSample(
        radii=radii,
        power_sum=float(np.sum(radii ** (-params.gamma))),
        meta={"seed": seed, "n": int(count), "d": params.d, "gamma": params.gamma},
    )


def sample_radii_batch(params: ModelParams, count: int, draws: int, seed: int, chunk: int = 100000) -> np.ndarray:
    """(draws, count) array of independent nearest-radius vectors."""
    out = np.empty((draws, count))
    for c, start in enumerate(range(0, draws, chunk)):
        rows = min(chunk, draws - start)
        rng = spawn_generator(seed, c)
        v = np.cumsum(rng.exponential(1.0 / params.d2, size=(rows, count)), axis=1)
        out[start:start + rows] = v ** (1.0 / params.d)
    return out


def _split_fraction(rng, eps, alpha):
    """t in (eps, 1 - eps) with density proportional to (t (1 - t))^(-1-alpha).

    The density is symmetric about 1/2: draw from [eps, 1/2] by a truncated
    Pareto proposal t^(-1-alpha), accept with probability
    ((1 - t) / (1/2))^(-1-alpha) <= 1, then reflect with probability 1/2.
    """
    eps = np.asarray(eps, dtype=float)
    t = np.empty(eps.shape)
    todo = np.arange(eps.size)
    top = eps ** (-alpha)
    bottom = 2.0**alpha
    while todo.size:
        e = top[todo]
        v = rng.random(todo.size)
        cand = (e - v * (e - bottom)) ** (-1.0 / alpha)
        accept = rng.random(todo.size) < (2.0 * (1.0 - cand)) ** (-1.0 - alpha)
        t[todo[accept]] = cand[accept]
        todo = todo[~accept]
    flip = rng.random(eps.size) < 0.5
    return np.where(flip, 1.0 - t, t)


def _arclength_sample(g, w, m, rng):
    # numeric inverse CDF of the normalised arclength on the curve, parametrised by u2
    u_star = (w / 2.0) ** (-1.0 / g)
    grade = np.linspace(0.0, 1.0, _ARCLENGTH_GRID)
    u2 = u_star + (m - u_star) * grade * grade * (3.0 - 2.0 * grade)
    inner = w - u2 ** (-g)
    dh = inner ** (-1.0 / g - 1.0) * u2 ** (-g - 1.0)
    speed = np.sqrt(1.0 + dh * dh)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(u2))])
    x = np.interp(rng.random() * cdf[-1], cdf, u2)
    return (w - x ** (-g)) ** (-1.0 / g), x


def pair_resample(gamma_over_d: float, w: float, m: float, seed: int, measure: str = "conditional"):
    """Redraw two coordinates (u1 <= u2) in (0, m) on u1^-g + u2^-g = w, g = gamma/d.

    ``measure="conditional"`` draws from the law of two i.i.d. uniforms on
    (0, m) given the constraint, which is what keeps the Gibbs sampler exact.
    ``measure="arclength"`` draws from normalised curve length instead; it
    is provided for comparison and is not the conditional law.
    """
    g = float(gamma_over_d)
    b = m ** (-g)
    if not w > 2.0 * b:
        raise ModelError(f"infeasible pair: need w > 2 m^(-gamma/d) = {2.0 * b:.6g}, got {w}")
    rng = spawn_generator(seed)
    if measure == "arclength":
        u1, u2 = _arclength_sample(g, w, m, rng)
    elif measure == "conditional":
        t = float(_split_fraction(rng, np.array([b / w]), 1.0 / g)[0])
        x = t * w
        u1, u2 = sorted((x ** (-1.0 / g), (w - x) ** (-1.0 / g)))
    else:
        raise ModelError(f"unknown measure {measure!r}")
    return float(u1), float(u2)


def default_burn_in(n: int) -> int:
    return 100 * n


def gibbs_conditional(
    params: ModelParams,
    n: int,
    m: Optional[float],
    s: float,
    sweeps: Optional[int],
    seed: int,
    chains: Optional[int] = None,
) -> GibbsChainState:
    """Random-pair Gibbs sampler for (U_1..U_n) given sum U_j^(-gamma/d) = s.

    One sweep is n pair updates.  ``chains`` runs that many independent
    chains side by side (rows of the returned ``u``), all fed from one
    stream keyed by (seed, chains, n).  Starting point: all coordinates equal.
    """
    if int(n) != n or n < 2:
        raise ModelError("need n >= 2")
    m = box_size(params, n) if m is None else float(m)
    g = params.gamma / params.d
    b = m ** (-g)
    if not s > n * b:
        raise ModelError(f"infeasible constraint: need s > n m^(-gamma/d) = {n * b:.6g}")
    sweeps = default_burn_in(n) if sweeps is None else int(sweeps)
    nc = 1 if chains is None else int(chains)
    alpha = params.alpha
    rng = spawn_generator(seed, nc, n)
    w = np.full((nc, n), s / n)
    rows = np.arange(nc)
    worst = 0.0
    for _ in range(sweeps):
        for _ in range(n):
            a = rng.integers(0, n, size=nc)
            c2 = (a + 1 + rng.integers(0, n - 1, size=nc)) % n
            tot = w[rows, a] + w[rows, c2]
            t = _split_fraction(rng, b / tot, alpha)
            xa = t * tot
            w[rows, a] = xa
            w[rows, c2] = tot - xa
        # restore the constraint on the largest coordinate
        drift = s - w.sum(axis=1)
        top = np.argmax(w, axis=1)
        w[rows, top] += drift
        worst = max(worst, float(np.max(np.abs(drift))))
    u = w ** (-1.0 / g)
    return GibbsChainState(u=u[0] if chains is None else u, s=float(s), sweep_count=sweeps, m=m, drift=worst, d=params.d)


@dataclass
class ProcessChainState:
    """Chains of ``gibbs_process``: inside points padded with NaN, plus the outside total."""

    u: np.ndarray
    count: np.ndarray
    s_out: np.ndarray
    s: float
    sweep_count: int
    m: float
    d: int = 2
    capped_births: int = 0

    @property
    def radii(self) -> np.ndarray:
        """Sorted radii per chain; NaN beyond each chain's count."""
        return np.sort(self.u, axis=-1) ** (1.0 / self.d)


@functools.lru_cache(maxsize=8)
def _outside_table(d: int, gamma: float, r_out: float, points: int = _OUTSIDE_POINTS):
    """log f_Y of the standardised outside total on a y grid, floored at log 1e-300."""
    params = make_params(d, gamma)
    rho = r_out ** (d / 2.0)
    y = np.linspace(-(1.0 - 1e-3) * params.d3 * rho, _OUTSIDE_Y_MAX, points)
    f = np.array([invert_density(params, v, r_out) for v in y])
    return y, np.log(np.maximum(f, 1e-300))


def _pareto(rng, lo, hi, alpha):
    # density proportional to x^(-1-alpha) on (lo, hi); hi may be inf
    top = lo ** (-alpha)
    bottom = np.where(np.isfinite(hi), np.asarray(hi, dtype=float) ** (-alpha), 0.0)
    v = rng.random(np.shape(lo))
    return (top - v * (top - bottom)) ** (-1.0 / alpha)


def gibbs_process(
    params: ModelParams,
    n: int,
    s: float,
    sweeps: int,
    seed: int,
    chains: int = 1,
    capacity: Optional[int] = None,
) -> ProcessChainState:
    """Points of the infinite process inside the ball of volume n / lam, given S = s.

    State: the inside contributions w_1..w_K (K random, mean n) and the
    outside total Sbar = s - sum w.  Each of the n steps of a sweep makes
    one pair move (exact conditional split), one exchange move between a
    random point and Sbar (truncated-Pareto proposal, Metropolis accept on
    f_Sbar), and one birth or death move with ratios n/(K+1) and K/n times
    the change in f_Sbar.  ``capacity`` bounds K; births beyond it are
    rejected and counted.
    """
    if int(n) != n or n < 2:
        raise ModelError("need n >= 2")
    if not s > 0:
        raise ModelError("s must be positive")
    m = box_size(params, n)
    g = params.gamma / params.d
    alpha = params.alpha
    b = m ** (-g)
    r_out = m ** (1.0 / params.d)
    mu_out = float(mean_tail(params, r_out))
    sig_out = float(sigma_tail(params, r_out))
    grid, table = _outside_table(params.d, float(params.gamma), float(r_out))

    y0, h, last_cell = grid[0], grid[1] - grid[0], grid.size - 1

    def log_f(x):
        # linear interpolation on the uniform y grid, -inf off the grid
        pos = ((x - mu_out) / sig_out - y0) / h
        i = np.clip(pos.astype(np.int64), 0, last_cell - 1)
        frac = pos - i
        out = table[i] + frac * (table[i + 1] - table[i])
        out[(pos < 0.0) | (pos > last_cell)] = -np.inf
        return out

    cap = n + int(10 * math.sqrt(n)) + 20 if capacity is None else int(capacity)
    nc = int(chains)
    rng = spawn_generator(seed, nc, n, 1)
    s_out = np.full(nc, min(mu_out, 0.5 * s))
    k0 = int(min(n, (s - s_out[0]) / (2.0 * b)))
    w = np.zeros((nc, cap))
    flat = w.reshape(-1)
    base = np.arange(nc) * cap
    if k0 > 0:
        w[:, :k0] = (s - s_out[0]) / k0
    count = np.full(nc, k0)
    lf_cur = log_f(s_out)
    capped = 0
    log_n = math.log(n)
    for _ in range(int(sweeps)):
        for _ in range(n):
            # pair move
            ok = np.flatnonzero(count >= 2)
            if ok.size:
                kk = count[ok]
                a = (rng.random(ok.size) * kk).astype(int)
                c2 = (a + 1 + (rng.random(ok.size) * (kk - 1)).astype(int)) % kk
                tot = flat[base[ok] + a] + flat[base[ok] + c2]
                xa = _split_fraction(rng, b / tot, alpha) * tot
                flat[base[ok] + a] = xa
                flat[base[ok] + c2] = tot - xa
            # exchange move with the outside total
            ok = np.flatnonzero(count >= 1)
            if ok.size:
                j = (rng.random(ok.size) * count[ok]).astype(int)
                c = flat[base[ok] + j] + s_out[ok]
                x_new = _pareto(rng, np.full(ok.size, b), c, alpha)
                prop = log_f(c - x_new)
                acc = np.log(rng.random(ok.size)) < prop - lf_cur[ok]
                hit = ok[acc]
                flat[base[hit] + j[acc]] = x_new[acc]
                s_out[hit] = c[acc] - x_new[acc]
                lf_cur[hit] = prop[acc]
            # birth or death
            u_bd = rng.random(nc)
            u_acc = np.log(rng.random(nc))
            birth = u_bd < 0.5
            full = birth & (count >= cap)
            capped += int(full.sum())
            br = np.flatnonzero(birth & ~full)
            if br.size:
                x_new = _pareto(rng, np.full(br.size, b), np.full(br.size, np.inf), alpha)
                new_out = s_out[br] - x_new
                lf_new = log_f(new_out)
                acc = u_acc[br] < log_n - np.log(count[br] + 1.0) + lf_new - lf_cur[br]
                hit = br[acc]
                flat[base[hit] + count[hit]] = x_new[acc]
                s_out[hit] = new_out[acc]
                lf_cur[hit] = lf_new[acc]
                count[hit] += 1
            dr = np.flatnonzero(~birth & (count >= 1))
            if dr.size:
                j = (rng.random(dr.size) * count[dr]).astype(int)
                new_out = s_out[dr] + flat[base[dr] + j]
                lf_new = log_f(new_out)
                acc = u_acc[dr] < np.log(count[dr].astype(float)) - log_n + lf_new - lf_cur[dr]
                hit = dr[acc]
                last = count[hit] - 1
                flat[base[hit] + j[acc]] = flat[base[hit] + last]
                flat[base[hit] + last] = 0.0
                s_out[hit] = new_out[acc]
                lf_cur[hit] = lf_new[acc]
                count[hit] -= 1
        # the outside total is the residual of the constraint
        s_out = s - w.sum(axis=1)
        lf_cur = log_f(s_out)
    active = np.arange(cap)[None, :] < count[:, None]
    u = np.where(active, np.where(active, w, 1.0) ** (-1.0 / g), np.nan)
    return ProcessChainState(
        u=u, count=count, s_out=s_out, s=float(s), sweep_count=int(sweeps), m=m, d=params.d, capped_births=capped,
    )


def gibbs_radii(
    params: ModelParams,
    n: int,
    s: float,
    draws: int,
    seed: int,
    sweeps: Optional[int] = None,
    outside: str = "none",
    m: Optional[float] = None,
) -> np.ndarray:
    """(draws, K) sorted radii from independent chains, one draw each.

    ``outside`` selects what stands in for the points beyond the ball:

    ``none``
        nothing; the n points are conditioned on their own sum S^(n) = s.
    ``mean``
        the n points are conditioned on s - mu(m^(1/d)), the unconditional
        mean of the outside contribution.
    ``exact``
        ``gibbs_process``: the infinite process given S = s, seen through
        the ball.  Rows are NaN-padded beyond each chain's count.
    """
    if outside not in OUTSIDE_MODES:
        raise ModelError(f"outside must be one of {OUTSIDE_MODES}")
    sweeps = default_burn_in(n) if sweeps is None else int(sweeps)
    if outside == "exact":
        if m is not None:
            raise ModelError("the exact mode fixes the ball at m = n / d2")
        return gibbs_process(params, n, s, sweeps, seed, chains=draws).radii
    m = box_size(params, n) if m is None else float(m)
    target = s - float(mean_tail(params, m ** (1.0 / params.d))) if outside == "mean" else s
    state = gibbs_conditional(params, n, m, target, sweeps, seed, chains=draws)
    return state.radii


@dataclass(frozen=True)
class DominanceReport:
    ell: int
    s: float
    grid: np.ndarray
    F_cond: np.ndarray
    F_uncond: np.ndarray
    se: np.ndarray
    violations: int
    escape_radius: float
    escape_probability: float
    escape_se: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def dominance_test(
    params: ModelParams,
    n: int,
    m: Optional[float],
    s: float,
    ell: int,
    draws: int,
    seed: int,
    a: float = 0.2,
    sweeps: Optional[int] = None,
    radii: Optional[np.ndarray] = None,
) -> DominanceReport:
    """Compare R_ell given S^(n) = s with the unconditional R'_(ell-1).

    Counts deciles of the conditional law where
    F_cond(x) > F_uncond(x) + 3 SE, and reports the escape probability
    P(R_ell <= (a ell)^(1/d) | S = s).  ``radii`` reuses a Gibbs sample.
    """
    if ell < 2:
        raise ModelError("ell must be at least 2")
    if radii is None:
        radii = gibbs_radii(params, n, s, draws, seed, sweeps=sweeps, m=m)
    cond = radii[:, ell - 1]
    uncond = sample_radii_batch(params, ell - 1, draws, seed + 1)[:, ell - 2]
    grid = np.quantile(cond, np.linspace(0.1, 0.9, 9))
    Fc = np.mean(cond[:, None] <= grid[None, :], axis=0)
    Fu = np.mean(uncond[:, None] <= grid[None, :], axis=0)
    se = np.sqrt(Fc * (1 - Fc) / cond.size + Fu * (1 - Fu) / uncond.size)
    violations = int(np.sum(Fc > Fu + 3.0 * se))
    x_esc = (a * ell) ** (1.0 / params.d)
    p_esc = float(np.mean(cond <= x_esc))
    return DominanceReport(
        ell=ell, s=float(s), grid=grid, F_cond=Fc, F_uncond=Fu, se=se, violations=violations,
        escape_radius=x_esc, escape_probability=p_esc,
        escape_se=math.sqrt(max(p_esc * (1 - p_esc), 1e-300) / cond.size),
    )

"""Conditional law of the nearest radius R_1 given the total S = s.

The joint density of (R_1, S) is approximated by integrating out the next
ell - 1 radii exactly and replacing the density of the remaining tail sum
Sbar^(R_ell) by its tilted Edgeworth approximation g_{ell,k}:

    fhat(r1, s) = int f_{R_1..R_ell}(r1, ..., r_ell) g_{ell,k}(y, r_ell) dr_2 ... dr_ell,
    y = (s - sum_i r_i^-gamma - mu(r_ell)) / sigma(r_ell).

Computation is in v = r^d, where, given V_1 = v1, the gap V_ell - v1 is
Gamma(ell - 1, d2) and the ell - 2 intermediate points are i.i.d. uniform on
(v1, V_ell).  The gap is integrated on a Gauss rule in its survival
probability; one, two or three intermediate contributions are folded into
a one-dimensional integral over y against their exact density; any further
intermediates go to randomised quasi-Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.special import gammainccinv, gammaincc
from scipy.stats import qmc

from .edgeworth import density_Y_values
from .model import ModelError, ModelParams, first_radius_density, mean_tail, sigma_tail, stable_density_S
from .nearest import _pair_norm, _pair_sum_density, three_point_density_Z, two_point_density_W
from .quadrature import QuadratureSpec, adaptive_gl, composite_gl
from .special import normal_pdf
from .tilt import SUPPORT_GUARD

__all__ = [
    "ConditionalConfig",
    "Estimate",
    "CdfResult",
    "cutoff_radius",
    "g_ellk",
    "fhat_R1S",
    "conditional_cdf_R1",
    "fS_via_scheme",
    "normal_baseline_R1S",
    "two_point_density_W",
    "three_point_density_Z",
]

# y-panel template: fine uniform panels over the bulk, geometric beyond
_Y_BULK = 6.0
_Y_GROWTH = 1.2
_Y_GEOM = 40
_R1_MASS_CUT = 36.0  # P(R1 > r) = exp(-d2 r^d) below e^-36 is dropped


@dataclass(frozen=True)
class ConditionalConfig:
    """Settings for the conditional scheme.

    ``a0`` and ``k`` left as None resolve to 0.8/d2 and floor(sqrt(a0 ell)).
    ``reduction`` uses the closed-form W and Z densities; it only applies
    when d=2, gamma=4.
    ``theorem_mode`` enforces k <= floor(sqrt(a0 ell)).
    """

    ell: int = 4
    k: Optional[int] = None
    a0: Optional[float] = None
    quadrature: QuadratureSpec = field(default_factory=lambda: QuadratureSpec(abs_tol=1e-9, rel_tol=1e-7))
    reduction: bool = True
    theorem_mode: bool = False
    t_panels: int = 12
    t_order: int = 8
    y_step: float = 0.25
    y_order: int = 8
    r1_order: int = 8
    qmc_log2: int = 11
    qmc_replicates: int = 8
    seed: int = 0

    def resolve(self, params: ModelParams) -> "ConditionalConfig":
        if int(self.ell) != self.ell or self.ell < 1:
            raise ModelError(f"ell must be a positive integer, got {self.ell}")
        a0 = 0.8 / params.d2 if self.a0 is None else float(self.a0)
        if not 0.0 < a0 < 1.0 / params.d2:
            raise ModelError(f"a0 must lie in (0, 1/d2) = (0, {1.0 / params.d2:.6g}), got {a0}")
        kmax = int(math.floor(math.sqrt(a0 * self.ell)))
        k = kmax if self.k is None else int(self.k)
        if k < 0:
            raise ModelError("Edgeworth order must be non-negative")
        if self.theorem_mode and k > kmax:
            raise ModelError(f"k={k} exceeds floor(sqrt(a0 ell))={kmax}")
        return replace(self, a0=a0, k=k)


@dataclass(frozen=True)
class Estimate:
    value: float
    error: float

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class CdfResult:
    r: np.ndarray
    value: np.ndarray
    clamped: np.ndarray
    slack: float
    error: np.ndarray
    f_S: float


def cutoff_radius(params: ModelParams, cfg: ConditionalConfig) -> float:
    """(a0 ell)^(1/d); g_{ell,k} vanishes at or below it."""
    cfg = cfg.resolve(params)
    return (cfg.a0 * cfg.ell) ** (1.0 / params.d)


def _g_values(params, y, r, k, cutoff_v):
    y, r = np.broadcast_arrays(np.asarray(y, float), np.asarray(r, float))
    out = np.zeros(y.shape)
    live = r**params.d > cutoff_v
    if live.any():
        out[live] = density_Y_values(params, y[live], r[live], k) / sigma_tail(params, r[live])
    return out


def _normal_values(params, y, r):
    return normal_pdf(y) / sigma_tail(params, np.asarray(r, float))


def g_ellk(params: ModelParams, y: float, r: float, cfg: ConditionalConfig) -> float:
    """(1/sigma(r)) nu~_k e^(-xi y) phi(-xi) above the cutoff radius, else 0."""
    cfg = cfg.resolve(params)
    if not r > 0:
        return 0.0
    return float(_g_values(params, np.array([y]), np.array([r]), cfg.k, cfg.a0 * cfg.ell)[0])


# --- densities of the intermediate contributions folded into the y integral


def _single_density(params, s_far, s1, x):
    a = params.alpha
    inside = (x > s_far) & (x < s1)
    out = np.zeros(np.broadcast(s_far, s1, x).shape)
    s_far, s1, x = np.broadcast_arrays(s_far, s1, x)
    out[inside] = a / (s_far[inside] ** -a - s1[inside] ** -a) * x[inside] ** (-1.0 - a)
    return out


class _Folded:
    """Density of the sum X of the last j intermediate contributions."""

    def __init__(self, params, j):
        self.params = params
        self.j = j

    def support(self, s_far, s1):
        return self.j * s_far, self.j * s1

    def kinks(self, s_far, s1):
        if self.j == 2:
            return [s1 + s_far]
        if self.j == 3:
            return [s1 + 2.0 * s_far, 2.0 * s1 + s_far]
        return []

    def __call__(self, s_far, s1, x):
        if self.j == 1:
            return _single_density(self.params, s_far, s1, x)
        if self.j == 2:
            return _pair_sum_density(x, s_far, s1) / _pair_norm(s1, s_far)
        return three_point_density_Z(s1, s_far, x)


def _y_template(step):
    bulk = np.arange(-_Y_BULK, _Y_BULK + 0.5 * step, step)
    geom = _Y_BULK * _Y_GROWTH ** np.arange(1, _Y_GEOM + 1)
    return np.concatenate([bulk, geom])


def _inner(params, s1, s_far, r_far, base, folded, kernel, order, step):
    """int kernel(y, r_far) f_X(base - mu - sigma y) sigma dy for each outer node."""
    mu = mean_tail(params, r_far)
    sig = sigma_tail(params, r_far)
    rho = r_far ** (params.d / 2.0)
    xlo, xhi = folded.support(s_far, s1)
    floor = -params.d3 * rho * (1.0 - SUPPORT_GUARD)
    ya = np.maximum((base - mu - xhi) / sig, floor)
    yb = (base - mu - xlo) / sig
    live = yb > ya
    out = np.zeros(base.shape)
    if not live.any():
        return out
    ya, yb, mu, sig, r_l = ya[live], yb[live], mu[live], sig[live], r_far[live]
    sf, bl = s_far[live], base[live]
    s1v = np.broadcast_to(s1, base.shape)[live]
    tmpl = _y_template(step)
    pts = [np.broadcast_to(tmpl[:, None], (tmpl.size, ya.size))]
    kinks = folded.kinks(sf, s1v)
    if kinks:
        pts.append(np.stack([(bl - mu - kx) / sig for kx in kinks]))
    pts.append(np.stack([ya, yb]))
    edges = np.sort(np.clip(np.concatenate(pts), ya, yb), axis=0)
    nodes, wts = composite_gl(edges, order)
    keep = wts > 0
    col = np.broadcast_to(np.arange(ya.size), nodes.shape)[keep]
    yv = nodes[keep]
    x = bl[col] - mu[col] - sig[col] * yv
    dens = folded(sf[col], s1v[col], x)
    vals = np.zeros(yv.shape)
    pos = dens > 0
    if pos.any():
        vals[pos] = kernel(yv[pos], r_l[col][pos]) * dens[pos] * sig[col][pos]
    out[live] = np.bincount(col, weights=vals * wts[keep], minlength=ya.size)
    return out


def _gap_nodes(ell, d2, tc, panels, order):
    """Gauss nodes for the Gamma(ell-1, d2) gap beyond tc, in the survival variable."""
    ptop = float(gammaincc(ell - 1, d2 * tc)) if tc > 0 else 1.0
    edges = np.linspace(0.0, ptop, panels + 1)
    p, w = composite_gl(edges, order)
    t = gammainccinv(ell - 1, p) / d2
    return t, w


class _Scheme:
    def __init__(self, params, cfg, kernel, cutoff_v):
        self.params = params
        self.cfg = cfg
        self.kernel = kernel
        self.cutoff_v = cutoff_v
        ell = cfg.ell
        if ell == 1:
            self.folded_j, self.outer_u = 0, 0
        elif ell == 2:
            self.folded_j, self.outer_u = 0, 0
        else:
            mid = ell - 2
            j = min(mid, 3 if (cfg.reduction and params.is_levy) else 1)
            if cfg.reduction and params.is_levy and mid >= 4:
                j = 2
            self.folded_j = j
            self.outer_u = mid - j
        self.folded = _Folded(params, self.folded_j) if self.folded_j else None

    def _integrand(self, v1, s, t, u):
        """Conditional expectation given V1 = v1 for each outer node (t, u...)."""
        p = self.params
        g_over_d = p.gamma / p.d
        v_far = v1 + t
        r_far = v_far ** (1.0 / p.d)
        s1 = v1**-g_over_d
        s_far = v_far**-g_over_d
        base = s - s1 - s_far
        if u is not None and u.shape[0]:
            base = base - np.sum((v1 + t[None, :] * u) ** -g_over_d, axis=0)
        if self.folded is None:
            mu = mean_tail(p, r_far)
            sig = sigma_tail(p, r_far)
            y = (base - mu) / sig
            rho = r_far ** (p.d / 2.0)
            ok = y > -p.d3 * rho * (1.0 - SUPPORT_GUARD)
            out = np.zeros(t.shape)
            if ok.any():
                out[ok] = self.kernel(y[ok], r_far[ok])
            return out
        return _inner(p, s1, s_far, r_far, base, self.folded, self.kernel, self.cfg.y_order, self.cfg.y_step)

    def expectation(self, r1, s):
        """E[g(y, R_ell) | R1 = r1] with an error estimate."""
        p, cfg = self.params, self.cfg
        v1 = r1**p.d
        ell = cfg.ell
        if ell == 1:
            if v1 <= self.cutoff_v:
                return 0.0, 0.0
            val = float(self._integrand(v1, s, np.zeros(1), None)[0])
            return val, 0.0
        tc = max(0.0, self.cutoff_v - v1)
        if ell == 2:
            return self._expectation_gap_adaptive(v1, s, tc)
        if self.outer_u == 0:
            return self._expectation_gap_gauss(v1, s, tc)
        if self.outer_u == 1:
            return self._expectation_tensor(v1, s, tc)
        return self._expectation_qmc(v1, s, tc)

    def _expectation_gap_gauss(self, v1, s, tc):
        cfg = self.cfg
        t, w = _gap_nodes(cfg.ell, self.params.d2, tc, cfg.t_panels, cfg.t_order)
        val = float(self._integrand(v1, s, t, None) @ w)
        t2, w2 = _gap_nodes(cfg.ell, self.params.d2, tc, cfg.t_panels, max(cfg.t_order - 3, 2))
        coarse = float(self._integrand(v1, s, t2, None) @ w2)
        return val, abs(val - coarse)

    def _tensor_value(self, v1, s, tc, t_order):
        cfg = self.cfg
        t, wt = _gap_nodes(cfg.ell, self.params.d2, tc, cfg.t_panels, t_order)
        u, wu = composite_gl(np.linspace(0.0, 1.0, cfg.t_panels + 1), t_order)
        tt = np.repeat(t, u.size)
        uu = np.tile(u, t.size)[None, :]
        vals = self._integrand(v1, s, tt, uu).reshape(t.size, u.size)
        return float(wt @ vals @ wu)

    def _expectation_tensor(self, v1, s, tc):
        val = self._tensor_value(v1, s, tc, self.cfg.t_order)
        coarse = self._tensor_value(v1, s, tc, max(self.cfg.t_order - 3, 2))
        return val, abs(val - coarse)

    def _expectation_gap_adaptive(self, v1, s, tc):
        d2 = self.params.d2
        ptop = float(gammaincc(1, d2 * tc)) if tc > 0 else 1.0
        q = self.cfg.quadrature

        def f(p):
            pf = p.ravel()
            return self._integrand(v1, s, -np.log(pf) / d2, None).reshape(p.shape)

        res = adaptive_gl(f, 0.0, ptop, abs_tol=q.abs_tol, rel_tol=q.rel_tol, order=q.panel_order, max_panels=q.max_panels)
        return res.value, res.error

    def _expectation_qmc(self, v1, s, tc):
        cfg, p = self.cfg, self.params
        dim = 1 + self.outer_u
        ptop = float(gammaincc(cfg.ell - 1, p.d2 * tc)) if tc > 0 else 1.0
        reps = []
        for rep in range(cfg.qmc_replicates):
            sob = qmc.Sobol(d=dim, scramble=True, seed=np.random.SeedSequence([cfg.seed, rep]))
            pts = sob.random_base2(cfg.qmc_log2)
            t = gammainccinv(cfg.ell - 1, ptop * pts[:, 0]) / p.d2
            u = pts[:, 1:].T
            reps.append(ptop * float(np.mean(self._integrand(v1, s, t, u))))
        reps = np.asarray(reps)
        return float(reps.mean()), float(reps.std(ddof=1) / math.sqrt(reps.size)) if reps.size > 1 else 0.0

    def joint(self, r1, s):
        val, err = self.expectation(r1, s)
        f1 = float(first_radius_density(self.params, r1))
        return f1 * val, f1 * err


def _scheme(params, cfg):
    cfg = cfg.resolve(params)
    kernel = lambda y, r: _g_values(params, y, r, cfg.k, 0.0)  # noqa: E731
    return _Scheme(params, cfg, kernel, cfg.a0 * cfg.ell)


def fhat_R1S(params: ModelParams, r1: float, s: float, cfg: Optional[ConditionalConfig] = None) -> Estimate:
    """Scheme approximation of the joint density of (R_1, S) at (r1, s)."""
    cfg = cfg or ConditionalConfig()
    if not r1 > 0:
        raise ModelError(f"r1 must be positive, got {r1}")
    if r1 ** (-params.gamma) >= s:
        return Estimate(0.0, 0.0)
    val, err = _scheme(params, cfg).joint(r1, s)
    return Estimate(val, err)


def _r1_limits(params, s):
    lo = s ** (-1.0 / params.gamma)
    hi = max((_R1_MASS_CUT / params.d2) ** (1.0 / params.d), 1.5 * lo)
    return lo, hi


def _r1_edges(params, s, extra=()):
    """Panel edges in r1: graded towards the lower end, where the mass sits for large s."""
    lo, hi = _r1_limits(params, s)
    # s1 = r1^-gamma runs from s down; grade in log(r1 - lo)
    span = hi - lo
    frac = np.concatenate([[0.0], np.geomspace(1e-6, 1.0, 40)])
    edges = lo + span * frac
    extra = [e for e in extra if lo < e < hi]
    return np.unique(np.concatenate([edges, extra]))


def _integrate_joint(scheme, s, edges, order):
    nodes, wts = composite_gl(edges, order)
    vals = np.empty(nodes.size)
    errs = np.empty(nodes.size)
    for i, r1 in enumerate(nodes):
        vals[i], errs[i] = scheme.joint(r1, s)
    per_panel = (vals * wts).reshape(-1, order).sum(axis=1)
    err_panel = (errs * wts).reshape(-1, order).sum(axis=1)
    return per_panel, err_panel


def fS_via_scheme(params: ModelParams, s: float, cfg: Optional[ConditionalConfig] = None) -> Estimate:
    """f_S(s) approximated by integrating fhat(r1, s) over r1."""
    cfg = (cfg or ConditionalConfig()).resolve(params)
    if not s > 0:
        raise ModelError(f"s must be positive, got {s}")
    scheme = _scheme(params, cfg)
    per, err = _integrate_joint(scheme, s, _r1_edges(params, s), cfg.r1_order)
    return Estimate(float(per.sum()), float(err.sum()))


def _denominator(params, s, cfg, f_S, scheme_total):
    if isinstance(f_S, (int, float)) and not isinstance(f_S, bool):
        return float(f_S)
    if f_S == "scheme":
        return scheme_total
    if f_S in (None, "closed"):
        if params.is_levy:
            return float(stable_density_S(params, s))
        if f_S == "closed":
            raise ModelError("closed-form f_S only for d=2, gamma=4")
        return scheme_total
    raise ModelError(f"unknown f_S option {f_S!r}")


def _cdf_from_scheme(params, scheme, r, s, order, f_S):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lo, _ = _r1_limits(params, s)
    edges = _r1_edges(params, s, extra=r)
    per, err = _integrate_joint(scheme, s, edges, order)
    cum = np.concatenate([[0.0], np.cumsum(per)])
    cum_err = np.concatenate([[0.0], np.cumsum(err)])
    total = float(cum[-1])
    denom = _denominator(params, s, scheme.cfg, f_S, total)
    idx = np.searchsorted(edges, np.minimum(r, edges[-1]))
    num = np.where(r <= lo, 0.0, np.where(r >= edges[-1], total, cum[idx]))
    nerr = np.where(r <= lo, 0.0, cum_err[np.minimum(idx, cum_err.size - 1)])
    value = num / denom
    slack = float(max(0.0, value.max() - 1.0))
    return CdfResult(r=r, value=value, clamped=np.clip(value, 0.0, 1.0), slack=slack, error=nerr / denom, f_S=denom)


def conditional_cdf_R1(params: ModelParams, r, s: float, cfg: Optional[ConditionalConfig] = None, f_S: Union[None, str, float] = None) -> CdfResult:
    """Scheme approximation of P(R_1 <= r | S = s), vectorised over r.

    ``f_S``: None uses the closed form when available and the scheme
    integral otherwise; "scheme" always normalises by the scheme's own
    f_S approximation; a number is used as given.
    """
    cfg = (cfg or ConditionalConfig()).resolve(params)
    if not s > 0:
        raise ModelError(f"s must be positive, got {s}")
    return _cdf_from_scheme(params, _scheme(params, cfg), r, s, cfg.r1_order, f_S)


def _baseline_cfg(params, cfg, n_points):
    # the baseline has no cutoff; a0 is zeroed after validation
    base = replace(cfg or ConditionalConfig(), ell=n_points, a0=None, k=0)
    return replace(base.resolve(params), a0=0.0)


def normal_baseline_R1S(params: ModelParams, r1: float, s: float, n_points: int = 4, cfg: Optional[ConditionalConfig] = None) -> Estimate:
    """Crude reference: the tail sum beyond R_{n_points} replaced by a Gaussian
    with matching mean and variance, no tilt and no cutoff."""
    cfg = _baseline_cfg(params, cfg, n_points)
    if r1 ** (-params.gamma) >= s:
        return Estimate(0.0, 0.0)
    scheme = _Scheme(params, cfg, lambda y, r: _normal_values(params, y, r), 0.0)
    val, err = scheme.joint(r1, s)
    return Estimate(val, err)


def normal_baseline_cdf(params: ModelParams, r, s: float, n_points: int = 4, cfg: Optional[ConditionalConfig] = None, f_S: Union[None, str, float] = None) -> CdfResult:
    cfg = _baseline_cfg(params, cfg, n_points)
    scheme = _Scheme(params, cfg, lambda y, rr: _normal_values(params, y, rr), 0.0)
    return _cdf_from_scheme(params, scheme, r, s, cfg.r1_order, f_S)

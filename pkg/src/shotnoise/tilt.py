"""Exponential tilting of the standardised tail sum Y^(r).

Everything is solved in the scaled variables x = xi / rho and tau = y / rho,
whose relation does not depend on r:

    tau = d1 * (I(1 - alpha, x) - 1 / (1 - alpha)),

an increasing convex function of x.  Newton's method started to the right of
the root therefore converges monotonically; the bracket is only a guard
against rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import MAX_CUMULANT_ORDER, ModelError, ModelParams
from .special import RangeError, kernel_values, psi0, psi0_remainder

SUPPORT_GUARD = 1e-9
DEFAULT_TOL = 1e-12
MAX_NEWTON = 400


class SupportError(ModelError):
    """Target value lies outside the support of Y^(r)."""


class ConvergenceError(ArithmeticError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True)
class TiltState:
    y: float
    r: float
    rho: float
    xi: float
    tkappa: tuple = ()
    log_prefactor: float = math.nan

    @property
    def x(self) -> float:
        return self.xi / self.rho

    def kappa(self, n: int) -> float:
        """Tilted cumulant kappa~_n (n >= 2)."""
        return self.tkappa[n - 2]


def support_floor(params: ModelParams, r: float) -> float:
    """Lower end -d3 rho of the support of Y^(r)."""
    return -params.d3 * r ** (params.d / 2.0)


def in_support(params: ModelParams, y, rho):
    """Mask of points safely inside the support (outside the guard sliver)."""
    edge = params.d3 * rho
    return np.asarray(y) + edge > SUPPORT_GUARD * edge


def tilt_residual(params: ModelParams, x, tau):
    """d1 (I(1-alpha, x) - 1/(1-alpha)) - tau, computed without cancellation near 0."""
    a = 1.0 - params.alpha
    x = np.asarray(x, dtype=float)
    return params.d1 * (kernel_values(a, x) - 1.0 / a) - tau


def solve_scaled(params: ModelParams, tau, tol: float = DEFAULT_TOL):
    """Vectorised root x(tau) of the scaled tilt equation.

    ``tau`` must lie strictly above -d3; callers mask out-of-support points.
    Iterates until the scaled residual is far below ``tol`` or the Newton
    step stalls at rounding level.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau <= -params.d3):
        raise SupportError("tau outside support (-d3, inf)")
    d1 = params.d1
    a1 = 1.0 - params.alpha
    a2 = 2.0 - params.alpha
    x = np.zeros_like(tau)

    up = tau > 0
    if up.any():
        hi = np.ones(up.sum())
        tu = tau[up]
        for _ in range(64):
            f = tilt_residual(params, hi, tu)
            short = f < 0
            if not short.any():
                break
            hi[short] *= 2.0
        else:
            raise ConvergenceError("could not bracket the tilt root", bracket=(0.0, hi.max()))
        x[up] = hi

    active = np.flatnonzero(tau != 0)
    for _ in range(MAX_NEWTON):
        if active.size == 0:
            break
        xa = x[active]
        ta = tau[active]
        ia = kernel_values(a1, xa)
        f = d1 * (ia - 1.0 / a1) - ta
        fp = d1 * kernel_values(a2, xa)
        step = f / fp
        xn = xa - step
        x[active] = xn
        scale = np.maximum(np.abs(ta), 1.0)
        # residuals below the rounding floor of their own evaluation are converged
        floor = 4.0 * np.finfo(float).eps * (d1 * ia + d1 / a1 + np.abs(ta))
        done = (np.abs(f) <= np.maximum(1e-3 * tol * scale, floor)) | (np.abs(step) <= 1e-15 * np.abs(xn))
        active = active[~done]
    else:
        raise ConvergenceError("Newton iteration for the tilt did not converge")
    return x


def _check_support(params, y, r):
    rho = r ** (params.d / 2.0)
    if not np.all(in_support(params, y, rho)):
        raise SupportError(
            f"y={y} outside the support of Y^(r) (must exceed {-params.d3 * rho:.6g}) at r={r}"
        )
    return rho


def solve_xi(params: ModelParams, y: float, r: float, tol: float = DEFAULT_TOL) -> TiltState:
    """Tilt parameter xi(y, r) solving the mean-shift equation."""
    if not r > 0:
        raise ModelError(f"radius must be positive, got {r}")
    if not tol > 0:
        raise ModelError("tolerance must be positive")
    rho = _check_support(params, y, r)
    if y == 0:
        return TiltState(y=0.0, r=r, rho=rho, xi=0.0)
    x = float(solve_scaled(params, np.array([y / rho]), tol=tol)[0])
    return TiltState(y=float(y), r=float(r), rho=rho, xi=x * rho)


def tilted_cumulant_values(params: ModelParams, x, n_max: int) -> np.ndarray:
    """Array of kappa~_n(x) for n = 2..n_max, shape (n_max - 1, *x.shape)."""
    if not 2 <= n_max <= MAX_CUMULANT_ORDER:
        raise ModelError(f"n_max must lie in [2, {MAX_CUMULANT_ORDER}], got {n_max}")
    x = np.asarray(x, dtype=float)
    alpha = params.alpha
    return np.stack([params.d1 * kernel_values(n - alpha, x) for n in range(2, n_max + 1)])


def tilted_cumulants(params: ModelParams, state: TiltState, n_max: int) -> TiltState:
    kap = tilted_cumulant_values(params, np.array([state.x]), n_max)[:, 0]
    return replace(state, tkappa=tuple(float(v) for v in kap))


def log_prefactor_values(params: ModelParams, x, y, rho):
    """log(e^(-xi y) phi_Y(-xi)) = rho^2 h(x, tau), vectorised.

    For x < -2 the linear growth of psi_0 is split off so that
    h = s (tau + d3) + [d1 psi_0(s) - d3 s] with s = -x.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = np.asarray(rho, dtype=float)
    x, y, rho = np.broadcast_arrays(x, y, rho)
    out = np.empty(x.shape)
    upper = x >= -2.0
    if upper.any():
        xu = x[upper]
        out[upper] = -xu * rho[upper] * y[upper] + params.d1 * rho[upper] ** 2 * psi0(params, -xu)
    low = ~upper
    if low.any():
        s = -x[low]
        rl = rho[low]
        shifted = (y[low] + params.d3 * rl) / rl
        out[low] = rl ** 2 * (s * shifted + psi0_remainder(params, s))
    if not np.all(np.isfinite(out)):
        raise RangeError("log prefactor not finite")
    return out


def log_prefactor(params: ModelParams, state: TiltState) -> float:
    if state.xi == 0.0:
        return 0.0
    return float(log_prefactor_values(params, state.x, state.y, state.rho))


def tilt(params: ModelParams, y: float, r: float, n_max: int = 4, tol: float = DEFAULT_TOL) -> TiltState:
    """Solve the tilt and populate cumulants up to n_max and the log prefactor."""
    state = tilted_cumulants(params, solve_xi(params, y, r, tol), n_max)
    return replace(state, log_prefactor=log_prefactor(params, state))

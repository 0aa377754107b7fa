"""Model parameters and closed-form moments of power-law Poisson shot noise.

The Poisson intensity is fixed so that Var(Sbar^(r)) = r^(d - 2 gamma).  All
other constants follow from (d, gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_CUMULANT_ORDER = 64


class ModelError(ValueError):
    """Invalid model parameters or evaluation outside the model's support."""


class NoClosedFormError(ModelError):
    """Raised when a closed form is only available for d=2, gamma=4."""


def sphere_area(d: int) -> float:
    """Surface measure of the unit (d-1)-sphere, 2 pi^(d/2) / Gamma(d/2)."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class ModelParams:
    d: int
    gamma: float
    lam: float = field(init=False)
    d1: float = field(init=False)
    d2: float = field(init=False)
    d3: float = field(init=False)
    omega: float = field(init=False)

    def __post_init__(self):
        d, g = self.d, self.gamma
        if int(d) != d or d < 1:
            raise ModelError(f"dimension must be a positive integer, got {d!r}")
        if not g > d:
            raise ModelError(f"need gamma > d, got gamma={g}, d={d}")
        omega = sphere_area(int(d))
        set_ = object.__setattr__
        set_(self, "d", int(d))
        set_(self, "gamma", float(g))
        set_(self, "omega", omega)
        set_(self, "lam", (2.0 * g - d) / omega)
        set_(self, "d1", 2.0 - d / g)
        set_(self, "d2", 2.0 * g / d - 1.0)
        set_(self, "d3", (2.0 - d / g) / (1.0 - d / g))

    @property
    def alpha(self) -> float:
        """Stability index d/gamma of the full sum S."""
        return self.d / self.gamma

    @property
    def is_levy(self) -> bool:
        return self.d == 2 and self.gamma == 4.0


@dataclass(frozen=True)
class RadialScale:
    r: float
    rho: float
    mu: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def make_params(d: int, gamma: float) -> ModelParams:
    return ModelParams(d, gamma)


def radial_scale(params: ModelParams, r: float) -> RadialScale:
    if not r > 0:
        raise ModelError(f"radius must be positive, got {r}")
    return RadialScale(
        r=r,
        rho=r ** (params.d / 2.0),
        mu=mean_tail(params, r),
        sigma2=r ** (params.d - 2.0 * params.gamma),
    )


def mean_tail(params: ModelParams, r):
    """mu(r) = E[Sbar^(r)] = d3 r^(d - gamma)."""
    return params.d3 * np.power(r, params.d - params.gamma)


def sigma_tail(params: ModelParams, r):
    """sigma(r) = r^(d/2 - gamma)."""
    return np.power(r, params.d / 2.0 - params.gamma)


def cumulant(params: ModelParams, r: float, n: int) -> float:
    """n-th cumulant of Sbar^(r): a1 a2^n / (n - d/gamma).

    With the normalised intensity a1 = d1 r^d and a2 = r^-gamma.
    """
    if not r > 0:
        raise ModelError(f"radius must be positive, got {r}")
    if int(n) != n or n < 1:
        raise ModelError(f"cumulant order must be a positive integer, got {n}")
    if n > MAX_CUMULANT_ORDER:
        raise ModelError(f"cumulant order {n} exceeds {MAX_CUMULANT_ORDER}")
    a1 = params.d1 * r ** params.d
    return a1 * r ** (-params.gamma * n) / (n - params.alpha)


def stable_density_S(params: ModelParams, s):
    """Density of the full sum S; closed form (Levy) only for d=2, gamma=4."""
    if not params.is_levy:
        raise NoClosedFormError(
            f"no closed form for the density of S at d={params.d}, gamma={params.gamma}"
        )
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    sp = s[pos]
    out[pos] = 1.5 * sp ** -1.5 * np.exp(-9.0 * math.pi / (4.0 * sp))
    return out if out.ndim else float(out)


def first_radius_density(params: ModelParams, r1):
    """d d2 r^(d-1) exp(-d2 r^d), from the void probability P(R1 > r)."""
    d, d2 = params.d, params.d2
    r1 = np.asarray(r1, dtype=float)
    out = np.where(r1 > 0, d * d2 * np.abs(r1) ** (d - 1) * np.exp(-d2 * np.abs(r1) ** d), 0.0)
    return out if out.ndim else float(out)


def joint_radii_density(params: ModelParams, radii) -> float:
    """Joint density of the ell nearest radii R_1 < ... < R_ell."""
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ModelError("radii must be a non-empty vector")
    if radii[0] <= 0 or np.any(np.diff(radii) <= 0):
        raise ModelError("radii must be positive and strictly increasing")
    d, d2 = params.d, params.d2
    ell = radii.size
    return float(
        (d * d2) ** ell * np.prod(radii ** (d - 1)) * math.exp(-d2 * radii[-1] ** d)
    )

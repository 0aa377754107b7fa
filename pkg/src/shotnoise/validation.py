"""Quick invariant checks behind ``shotnoise validate``.

Each check reports the measured quantity against its threshold; the whole
suite runs in well under a minute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from .model import ModelError, cumulant, first_radius_density, make_params, mean_tail, sigma_tail
from .quadrature import adaptive_gl
from .special import hermite_at_zero, kernel_values, psi0

PSI0_AT_ONE = 0.27694458640740725


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    value: float
    threshold: float


def _levy():
    return make_params(2, 4.0)


def _model_checks(rng):
    p = _levy()
    r = rng.uniform(0.5, 5.0, 50)
    err_mu = np.max(np.abs(mean_tail(p, r) * r**2 / 3.0 - 1.0))
    err_sig = np.max(np.abs(sigma_tail(p, r) ** 2 * r**6 - 1.0))
    k2 = max(abs(cumulant(p, x, 2) * x**6 - 1.0) for x in r[:10])
    mass = adaptive_gl(lambda x: first_radius_density(p, x), 0.0, 8.0, 1e-13, 1e-12).value
    return [
        ("mean_tail", err_mu, 1e-14),
        ("sigma_tail", err_sig, 1e-14),
        ("second_cumulant", k2, 1e-14),
        ("first_radius_mass", abs(mass - 1.0), 1e-10),
    ]


def _special_checks(rng):
    p = _levy()
    a = rng.uniform(0.2, 4.0, 40)
    x = rng.uniform(-30.0, 30.0, 40)
    # I(a, x) = (e^x - x I(a+1, x)) / a
    lhs = np.array([kernel_values(ai, np.array([xi]))[0] for ai, xi in zip(a, x)])
    rhs = np.array([(math.exp(xi) - xi * kernel_values(ai + 1.0, np.array([xi]))[0]) / ai for ai, xi in zip(a, x)])
    rec = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), np.exp(x) / a)))
    return [
        ("kernel_recurrence", rec, 1e-12),
        ("psi0_at_one", abs(psi0(p, 1.0) - PSI0_AT_ONE), 1e-14),
        ("hermite_h6", abs(hermite_at_zero(6) + 15), 0.0),
    ]


def _tilt_checks(rng):
    from .tilt import solve_xi, tilt_residual

    p = _levy()
    worst = 0.0
    for _ in range(100):
        r = rng.uniform(1.0, 8.0)
        rho = r ** (p.d / 2.0)
        y = rng.uniform(-0.9 * p.d3 * rho, 6.0)
        st = solve_xi(p, y, r)
        worst = max(worst, abs(float(tilt_residual(p, st.x, y / rho))))
    zero = max(abs(solve_xi(p, 0.0, r).xi) for r in (1.0, 2.0, 5.0))
    a = solve_xi(p, 1.5, 2.0).x
    b = solve_xi(p, 3.0, 4.0).x
    return [
        ("residual", worst, 1e-12),
        ("xi_at_zero", zero, 0.0),
        ("scale_coupling", abs(a - b), 1e-10),
    ]


def _edgeworth_checks(rng):
    from .edgeworth import coefficient_table, coefficient_table_bruteforce, density_Y

    p = _levy()
    kap = rng.uniform(0.1, 2.0, 9)
    dp = coefficient_table(kap, 8)
    bf = coefficient_table_bruteforce(kap, 8)
    table = float(np.max(np.abs(dp - bf) / np.maximum(np.abs(bf), 1e-300)))
    parity = max(abs(density_Y(p, y, 3.0, 2 * m + 1) - density_Y(p, y, 3.0, 2 * m)) for y in (-1.0, 0.5, 3.0) for m in range(4))
    return [("dp_vs_enumeration", table, 1e-12), ("odd_even_parity", parity, 0.0)]


def _oracle_checks(rng):
    from .oracle import cf_Y, invert_density

    p = _levy()
    t = rng.uniform(-20.0, 20.0, 20)
    conj = float(np.max(np.abs(cf_Y(p, 2.0, -t) - np.conj(cf_Y(p, 2.0, t)))))
    a = invert_density(p, 1.0, 2.0, tilted=True)
    b = invert_density(p, 1.0, 2.0, tilted=False)
    return [("cf_conjugate_symmetry", conj, 1e-14), ("direct_vs_tilted", abs(a - b), 1e-9)]


def _conditional_checks(rng):
    from .nearest import two_point_density_W
    s1, s4 = 16.0, 1.0
    mass = adaptive_gl(
        lambda w: two_point_density_W(s1, s4, w), 2.0 * s4, 2.0 * s1, 1e-12, 1e-11,
        breakpoints=[s1 + s4],
    ).value
    return [("pair_sum_mass", abs(mass - 1.0), 1e-8)]


def _sampler_checks(rng):
    from .sampler import gibbs_conditional, pair_resample

    p = _levy()
    g = p.gamma / p.d
    worst = 0.0
    for i in range(20):
        w = rng.uniform(0.5, 20.0)
        u1, u2 = pair_resample(g, w, 10.0, seed=i)
        worst = max(worst, abs(u1**-g + u2**-g - w) / w)
    st = gibbs_conditional(p, 16, None, 10.0, sweeps=20, seed=1, chains=8)
    total = float(np.max(np.abs((st.u ** -g).sum(axis=1) - 10.0)))
    return [("pair_constraint", worst, 1e-12), ("gibbs_constraint", total / 10.0, 1e-12)]


CHECKS: Dict[str, Callable] = {
    "core-model": _model_checks,
    "special-fn": _special_checks,
    "tilt": _tilt_checks,
    "edgeworth": _edgeworth_checks,
    "oracle": _oracle_checks,
    "conditional": _conditional_checks,
    "sampler": _sampler_checks,
}


def run_checks(only: Optional[Iterable[str]] = None, seed: int = 0) -> List[CheckResult]:
    names = list(CHECKS) if only is None else list(only)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ModelError(f"unknown modules {unknown}; choose from {list(CHECKS)}")
    out = []
    for i, name in enumerate(names):
        rng = np.random.default_rng([seed, i])
        for check, value, threshold in CHECKS[name](rng):
            out.append(CheckResult(name, check, bool(value <= threshold), float(value), float(threshold)))
    return out

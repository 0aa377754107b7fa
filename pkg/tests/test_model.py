import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from shotnoise import model as M


def test_constants_levy(levy):
    assert levy.alpha == 0.5
    assert (levy.d1, levy.d2, levy.d3) == (1.5, 3.0, 3.0)
    assert levy.is_levy


@pytest.mark.parametrize("d,gamma", [(2, 2.0), (3, 2.5), (0, 4.0)])
def test_rejects_bad_parameters(d, gamma):
    with pytest.raises(M.ModelError):
        M.make_params(d, gamma)


def test_sphere_area_low_dimensions():
    assert M.sphere_area(1) == pytest.approx(2.0)
    assert M.sphere_area(2) == pytest.approx(2 * math.pi)
    assert M.sphere_area(3) == pytest.approx(4 * math.pi)


@given(r=st.floats(0.1, 50.0))
def test_tail_moments_levy(levy, r):
    assert M.mean_tail(levy, r) == pytest.approx(3.0 / r**2, rel=1e-14)
    assert M.sigma_tail(levy, r) ** 2 == pytest.approx(r**-6, rel=1e-14)


@given(r=st.floats(0.2, 20.0), n=st.integers(1, 12))
@settings(max_examples=50)
def test_first_cumulants_match_moments(plane_gamma3, r, n):
    p = plane_gamma3
    k = M.cumulant(p, r, n)
    assert k == pytest.approx(p.d1 * r**p.d * r ** (-p.gamma * n) / (n - p.alpha), rel=1e-13)
    if n == 1:
        assert k == pytest.approx(M.mean_tail(p, r), rel=1e-13)
    if n == 2:
        assert k == pytest.approx(M.sigma_tail(p, r) ** 2, rel=1e-13)


def test_cumulant_order_guard(levy):
    with pytest.raises(M.ModelError):
        M.cumulant(levy, 1.0, M.MAX_CUMULANT_ORDER + 1)
    with pytest.raises(M.ModelError):
        M.cumulant(levy, -1.0, 2)


def test_levy_density_normalised(levy):
    mass, _ = integrate.quad(lambda s: M.stable_density_S(levy, s), 0, np.inf, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_no_closed_form_outside_levy():
    with pytest.raises(M.NoClosedFormError):
        M.stable_density_S(M.make_params(3, 4.0), 1.0)


@pytest.mark.parametrize("d,gamma", [(1, 2.0), (2, 4.0), (3, 5.0)])
def test_first_radius_density_normalised(d, gamma):
    p = M.make_params(d, gamma)
    mass, _ = integrate.quad(lambda r: M.first_radius_density(p, r), 0, np.inf)
    assert mass == pytest.approx(1.0, abs=1e-10)


def test_joint_radii_marginal(levy):
    # integrating out r1 from the joint of (R1, R2) gives the Gamma(2) law of R2^d
    r2 = 0.8
    val, _ = integrate.quad(lambda r1: M.joint_radii_density(levy, [r1, r2]), 1e-12, r2 - 1e-12)
    v = r2**2
    expected = 2 * r2 * levy.d2**2 * v * math.exp(-levy.d2 * v)
    assert val == pytest.approx(expected, rel=1e-9)


def test_joint_radii_rejects_unordered(levy):
    with pytest.raises(M.ModelError):
        M.joint_radii_density(levy, [1.0, 0.5])

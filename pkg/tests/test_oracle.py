import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shotnoise.model import ModelError, mean_tail, sigma_tail, stable_density_S
from shotnoise.oracle import (
    QuadratureSpec,
    cf_Y,
    decay_constant,
    density_S_oracle,
    density_Sbar_oracle,
    finite_n_density_check,
    invert_cdf,
    invert_density,
    simulate_Sbar,
    spawn_generator,
    truncation_point,
)
from shotnoise.quadrature import composite_gl

DENSITY_REF = [
    (2.0, 0.0, 0.396783861429727),
    (2.0, 2.0, 0.0578295839296851),
    (2.0, -2.0, 0.0459844232685185),
    (4.0, -1.0, 0.254798670080343),
]


@pytest.mark.parametrize("r,y,ref", DENSITY_REF)
def test_reference_densities(levy, r, y, ref):
    assert invert_density(levy, y, r) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("y", [-4.0, -1.0, 0.5, 3.0, 8.0])
def test_direct_and_tilted_contours_agree(levy, y):
    assert invert_density(levy, y, 2.0, tilted=False) == pytest.approx(invert_density(levy, y, 2.0), abs=1e-9)


@given(t=st.floats(-50.0, 50.0))
@settings(max_examples=50)
def test_cf_conjugate_symmetry(levy, t):
    assert cf_Y(levy, 2.0, -t) == pytest.approx(np.conj(cf_Y(levy, 2.0, t)), abs=1e-15)


def test_cf_at_origin(levy):
    assert cf_Y(levy, 3.0, 0.0) == 1.0


def test_cf_second_moment(levy):
    # chi(t) = 1 - t^2/2 + O(t^3) for the standardised variable
    h = 1e-4
    curv = (cf_Y(levy, 2.0, h) + cf_Y(levy, 2.0, -h) - 2.0).real / h**2
    assert curv == pytest.approx(-1.0, rel=1e-6)


def test_decay_constant_levy(levy):
    assert decay_constant(levy) == pytest.approx(1.5 * 2 * math.sqrt(math.pi) / math.sqrt(2), rel=1e-15)


def test_truncation_point_grows_with_accuracy(levy):
    assert truncation_point(levy, 2.0, 1e-14) > truncation_point(levy, 2.0, 1e-8) > 0


def test_halving_panels_stable(levy):
    coarse = invert_density(levy, 1.0, 2.0, QuadratureSpec(panel_order=16))
    fine = invert_density(levy, 1.0, 2.0, QuadratureSpec(panel_order=32))
    assert abs(coarse - fine) < 1e-12


def test_cdf_matches_density(levy):
    a, b = -1.0, 1.5
    nodes, wts = composite_gl(np.linspace(a, b, 6), 16)
    mass = sum(w * invert_density(levy, y, 2.0) for y, w in zip(nodes, wts))
    assert invert_cdf(levy, b, 2.0) - invert_cdf(levy, a, 2.0) == pytest.approx(mass, abs=1e-9)


def test_zero_outside_support(levy):
    assert invert_density(levy, -6.0, 2.0) == 0.0
    assert invert_cdf(levy, -6.0, 2.0) == 0.0


def test_sbar_density_vectorised(levy):
    r = 2.0
    sb = np.array([-0.1, 0.75, 1.0])
    out = density_Sbar_oracle(levy, sb, r)
    assert out[0] == 0.0
    y = (1.0 - mean_tail(levy, r)) / sigma_tail(levy, r)
    assert out[2] == pytest.approx(invert_density(levy, y, r) / sigma_tail(levy, r), rel=1e-14)


@pytest.mark.slow
def test_full_sum_density_against_closed_form(levy):
    assert density_S_oracle(levy, 10.0) == pytest.approx(stable_density_S(levy, 10.0), rel=1e-9)


class TestSimulateSbar:
    def test_moments(self, levy):
        r, T = 1.0, 8.0
        x = simulate_Sbar(levy, r, rng_seed=11, size=200000)
        mu = mean_tail(levy, r)
        se = x.std() / math.sqrt(x.size)
        assert abs(x.mean() - mu) < 4 * se
        var = sigma_tail(levy, r) ** 2 - sigma_tail(levy, T) ** 2
        # fourth cumulant of the annulus sum gives the spread of the sample variance
        k4 = 1.5 * (r**-14 - T**-14) / 3.5
        se_var = math.sqrt((k4 + 2 * var**2) / x.size)
        assert abs(x.var() - var) < 4 * se_var

    def test_empty_annulus_is_deterministic(self, levy):
        assert simulate_Sbar(levy, 1.3, tail_radius=1.3, rng_seed=5) == pytest.approx(mean_tail(levy, 1.3))

    def test_reproducible(self, levy):
        a = simulate_Sbar(levy, 1.0, rng_seed=3, size=50000)
        b = simulate_Sbar(levy, 1.0, rng_seed=3, size=50000)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, simulate_Sbar(levy, 1.0, rng_seed=4, size=50000))

    def test_rejects_inner_tail_radius(self, levy):
        with pytest.raises(ModelError):
            simulate_Sbar(levy, 2.0, tail_radius=1.0)


def test_spawned_streams_differ():
    a = spawn_generator(1, 0).random(4)
    assert np.array_equal(a, spawn_generator(1, 0).random(4))
    assert not np.array_equal(a, spawn_generator(1, 1).random(4))


def test_finite_n_single_point_grid(levy):
    one = finite_n_density_check(levy, 32, [5.0], samples=4000)
    again = finite_n_density_check(levy, 32, np.array([5.0, 5.0]), samples=4000)
    assert one == again and one >= 0


def test_finite_n_shrinks_with_n(levy):
    grid = np.linspace(2, 50, 25)
    small = finite_n_density_check(levy, 16, grid, samples=20000)
    large = finite_n_density_check(levy, 256, grid, samples=20000)
    assert large < small


def test_finite_n_guards(levy):
    with pytest.raises(ModelError):
        finite_n_density_check(levy, 4, [1.0])
    with pytest.raises(ModelError):
        finite_n_density_check(levy, 16, [0.0])
    with pytest.raises(ModelError):
        finite_n_density_check(levy, 16, [1.0], method="other")

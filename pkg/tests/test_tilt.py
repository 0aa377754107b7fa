import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from shotnoise.tilt import (
    SupportError,
    solve_scaled,
    solve_xi,
    tilt,
    tilt_residual,
    tilted_cumulant_values,
)

# roots of 3/2 (I(1/2, x) - 2) = tau found in arbitrary precision
ROOTS = [
    (-2.5, -28.27433388230503889),
    (-1.0, -1.4775292508110915275),
    (0.3, 0.2756289712397674427),
    (2.0, 1.2939703740317804048),
]


@pytest.mark.parametrize("tau,x", ROOTS)
def test_scaled_root_reference(levy, tau, x):
    assert solve_scaled(levy, tau)[0] == pytest.approx(x, rel=1e-13)


@given(r=st.floats(0.5, 30.0), u=st.floats(0.001, 0.999), top=st.floats(0.0, 40.0))
@settings(max_examples=300)
def test_residual_small(levy, r, u, top):
    rho = r
    y = -levy.d3 * rho * u + top * (1 - u)
    assume(y > -levy.d3 * rho * 0.999)
    st_ = solve_xi(levy, y, r)
    assert abs(float(tilt_residual(levy, st_.x, y / rho))) < 1e-12


@pytest.mark.parametrize("r", [0.3, 1.0, 7.0])
def test_zero_tilt_at_mean(levy, r):
    assert solve_xi(levy, 0.0, r).xi == 0.0


@given(q=st.floats(-2.9, 10.0), r1=st.floats(0.5, 10.0), r2=st.floats(0.5, 10.0))
def test_scale_coupling(levy, q, r1, r2):
    # xi / rho depends on (y, r) only through y / rho
    a = solve_xi(levy, q * r1, r1).x
    b = solve_xi(levy, q * r2, r2).x
    assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_support_violation(levy):
    with pytest.raises(SupportError):
        solve_xi(levy, -6.5, 2.0)


def test_tilted_cumulants_at_zero(levy, plane_gamma3):
    for p in (levy, plane_gamma3):
        kap = tilted_cumulant_values(p, np.array([0.0]), 10)[:, 0]
        expected = [p.d1 / (n - p.alpha) for n in range(2, 11)]
        np.testing.assert_allclose(kap, expected, rtol=1e-15)


@given(x=st.floats(-300.0, 300.0))
def test_tilted_cumulant_chain_decreasing(levy, x):
    kap = tilted_cumulant_values(levy, np.array([x]), 8)[:, 0]
    assert np.all(np.diff(kap) < 0)


def test_prefactor_vanishes_without_tilt(levy):
    assert tilt(levy, 0.0, 2.0).log_prefactor == 0.0


@given(y=st.floats(-5.5, 12.0))
def test_log_prefactor_is_a_chernoff_bound(levy, y):
    # e^(-xi y) E e^(xi Y) minimises over xi, so it lies below its xi = 0 value of 1
    assume(abs(y) > 1e-6)
    assert tilt(levy, y, 2.0).log_prefactor < 0.0

import numpy as np
import pytest

from shotnoise.conditional import (
    ConditionalConfig,
    conditional_cdf_R1,
    cutoff_radius,
    fhat_R1S,
    fS_via_scheme,
    g_ellk,
    normal_baseline_R1S,
)
from shotnoise.model import ModelError, stable_density_S

SMALL_A0 = ConditionalConfig(a0=0.05)


class TestConfig:
    def test_defaults_resolve(self, levy):
        cfg = ConditionalConfig().resolve(levy)
        assert cfg.a0 == pytest.approx(0.8 / 3.0)
        assert cfg.k == 1  # floor(sqrt(0.8 / 3 * 4))

    @pytest.mark.parametrize("a0", [0.0, 1 / 3, 0.5])
    def test_a0_range(self, levy, a0):
        with pytest.raises(ModelError):
            ConditionalConfig(a0=a0).resolve(levy)

    def test_theorem_mode_caps_order(self, levy):
        with pytest.raises(ModelError):
            ConditionalConfig(k=3, theorem_mode=True).resolve(levy)
        assert ConditionalConfig(k=3).resolve(levy).k == 3

    def test_cutoff_radius(self, levy):
        assert cutoff_radius(levy, SMALL_A0) == pytest.approx(np.sqrt(0.2))


def test_kernel_vanishes_below_cutoff(levy):
    rc = cutoff_radius(levy, SMALL_A0)
    assert g_ellk(levy, 0.0, 0.99 * rc, SMALL_A0) == 0.0
    assert g_ellk(levy, 0.0, 1.01 * rc, SMALL_A0) > 0.0


def test_joint_zero_when_first_point_exceeds_total(levy):
    assert fhat_R1S(levy, 0.5, 10.0).value == 0.0  # 0.5^-4 = 16 > 10


def test_joint_positive_with_error(levy):
    est = fhat_R1S(levy, 0.7, 10.0, SMALL_A0)
    assert est.value > 0 and 0 <= est.error < 1e-3 * est.value


@pytest.mark.slow
def test_closed_form_reduction_matches_generic(levy):
    cfg = ConditionalConfig(ell=4, k=1, a0=0.05)
    a = fhat_R1S(levy, 0.7, 10.0, cfg).value
    b = fhat_R1S(levy, 0.7, 10.0, ConditionalConfig(ell=4, k=1, a0=0.05, reduction=False)).value
    assert a == pytest.approx(b, rel=1e-6)


def test_baseline_positive(levy):
    assert normal_baseline_R1S(levy, 0.7, 10.0).value > 0


@pytest.mark.slow
def test_scheme_normalisation_close_to_closed_form(levy):
    est = fS_via_scheme(levy, 10.0, SMALL_A0)
    assert est.value == pytest.approx(stable_density_S(levy, 10.0), rel=0.03)


@pytest.mark.slow
def test_cdf_properties(levy):
    rs = np.array([0.5, 0.6, 0.7, 0.8, 1.0])
    res = conditional_cdf_R1(levy, rs, 10.0, SMALL_A0, f_S="scheme")
    assert res.value[0] == 0.0  # below s^(-1/gamma)
    assert np.all(np.diff(res.value) >= 0)
    assert res.value[-1] <= 1.0 + 1e-9
    assert np.all((res.clamped >= 0) & (res.clamped <= 1))
    # exact values from the Fourier-inversion route at the same points
    exact = np.array([0.0, 0.035448, 0.547067, 0.933186, 0.999997])
    np.testing.assert_allclose(res.value, exact, atol=5e-3)


def test_unknown_denominator(levy):
    with pytest.raises(ModelError):
        conditional_cdf_R1(levy, [0.7], 10.0, SMALL_A0, f_S="bogus")

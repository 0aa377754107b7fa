import numpy as np
import pytest
from scipy import integrate

from shotnoise.model import ModelError
from shotnoise.nearest import three_point_density_Z, two_point_density_W


def _single(s, lo, hi):
    # contribution of one intermediate point: density proportional to s^-3/2 on (lo, hi)
    norm = 2 * (lo**-0.5 - hi**-0.5)
    s = np.asarray(s, dtype=float)
    inside = (s > lo) & (s < hi)
    return np.where(inside, np.where(inside, s, 1.0) ** -1.5 / norm, 0.0)


def _brute_W(s1, s4, w):
    lo, hi = max(s4, w - s1), min(s1, w - s4)
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(lambda a: _single(a, s4, s1) * _single(w - a, s4, s1), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


S1, S4 = 16.0, 1.0


@pytest.mark.parametrize("w", np.linspace(2.05, 31.9, 20))
def test_W_matches_convolution(w):
    assert two_point_density_W(S1, S4, w) == pytest.approx(_brute_W(S1, S4, w), abs=1e-10)


def test_W_normalised():
    mass, _ = integrate.quad(lambda w: two_point_density_W(S1, S4, w), 2 * S4, 2 * S1, points=[S1 + S4], epsabs=1e-13, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-10)


def test_W_support():
    assert two_point_density_W(S1, S4, 1.9) == 0.0
    assert two_point_density_W(S1, S4, 32.1) == 0.0
    out = two_point_density_W(S1, S4, np.array([1.0, 5.0, 40.0]))
    assert out[0] == 0.0 and out[1] > 0 and out[2] == 0.0


def test_W_normalising_constant():
    # the three-way constant is 2 (s4^-1/2 - s1^-1/2)^2, which gives 1/4 in the prefactor for these radii
    z = 2 * (S4**-0.5 - S1**-0.5) ** 2
    assert z == pytest.approx(9 / 8)


@pytest.mark.parametrize("z", [3.5, 8.0, 17.5, 30.0, 47.5])
def test_Z_matches_double_convolution(z):
    s1, s5 = 16.0, 1.0
    f = lambda b, a: _single(a, s5, s1) * _single(b, s5, s1) * _single(z - a - b, s5, s1)  # noqa: E731
    brute, _ = integrate.dblquad(f, s5, s1, lambda a: max(s5, z - a - s1), lambda a: min(s1, z - a - s5), epsabs=1e-13, epsrel=1e-11)
    assert three_point_density_Z(s1, s5, z) == pytest.approx(brute, abs=1e-9)


def test_Z_normalised():
    s1, s5 = 16.0, 1.0
    mass, _ = integrate.quad(lambda z: three_point_density_Z(s1, s5, z), 3 * s5, 3 * s1, points=[s1 + 2 * s5, 2 * s1 + s5], limit=400, epsabs=1e-13)
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_rejects_misordered_contributions():
    with pytest.raises(ModelError):
        two_point_density_W(1.0, 2.0, 2.5)
    with pytest.raises(ModelError):
        three_point_density_Z(1.0, 0.0, 2.5)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shotnoise.model import ModelError
from shotnoise.special import RangeError, hermite_at_zero, kernel_I, kernel_values, psi0

# arbitrary-precision quadrature (and the incomplete-gamma form for x = -700)
KERNEL_REF = [
    (0.5, -40.0, 0.28024956081989642074),
    (0.5, -3.0, 1.0086871204628776),
    (0.5, 0.7, 2.5835052977235312747),
    (1.5, 12.0, 12970.352410873284711),
    (2.5, -0.001, 0.39971439679510020423),
    (3.5, 60.0, 1.826005569297653138e24),
    (0.25, -700.0, 0.7048660042960507326),
    (1.0, 5.0, 29.482631820515320684),
]

PSI0_REF = [
    (-30.0, 375716138970.09360225),
    (-5.0, 38.616837271676589969),
    (-1.0, 0.4140433267106359645),
    (0.5, 0.075689896790435546449),
    (1.0, 0.27694458640740725521),
    (2.0, 0.94417738023634180449),
    (3.0, 1.8483031404870064296),
    (25.0, 34.275461490944314605),
]


@pytest.mark.parametrize("a,x,ref", KERNEL_REF)
def test_kernel_reference_values(a, x, ref):
    assert kernel_I(a, x).value == pytest.approx(ref, rel=2e-15 * max(1.0, abs(x)))


@pytest.mark.parametrize("s,ref", PSI0_REF)
def test_psi0_reference_values(levy, s, ref):
    assert psi0(levy, s) == pytest.approx(ref, rel=2e-15)


@given(a=st.floats(0.1, 5.0), x=st.floats(-200.0, 200.0))
@settings(max_examples=200)
def test_kernel_recurrence(a, x):
    # I(a, x) = (e^x - x I(a+1, x)) / a, compared on the scale of the larger term
    lhs = kernel_values(a, np.array([x]))[0]
    rhs = (math.exp(x) - x * kernel_values(a + 1.0, np.array([x]))[0]) / a
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), math.exp(x) / a)


@given(a=st.floats(0.1, 5.0), x=st.floats(-100.0, 100.0), dx=st.floats(1e-3, 5.0))
def test_kernel_increasing_in_x(a, x, dx):
    lo, hi = kernel_values(a, np.array([x, x + dx]))
    assert hi > lo


def test_kernel_at_zero_is_reciprocal():
    for a in (0.3, 1.0, 2.7):
        assert kernel_I(a, 0.0).value == pytest.approx(1.0 / a, rel=1e-15)


def test_kernel_log_value():
    k = kernel_I(0.5, 650.0)
    assert k.log_value == pytest.approx(math.log(k.value))


def test_kernel_rejects_nonpositive_exponent():
    with pytest.raises(ModelError):
        kernel_I(0.0, 1.0)


def test_psi0_branch_continuity(levy):
    lo, hi = psi0(levy, np.array([2.0, np.nextafter(2.0, 3.0)]))
    assert hi == pytest.approx(lo, rel=1e-14)


def test_psi0_overflow_raises(levy):
    with pytest.raises(RangeError):
        psi0(levy, -701.0)


@pytest.mark.parametrize("n,h", [(0, 1), (1, 0), (2, -1), (3, 0), (4, 3), (6, -15), (8, 105), (10, -945)])
def test_hermite_at_zero(n, h):
    assert hermite_at_zero(n) == h

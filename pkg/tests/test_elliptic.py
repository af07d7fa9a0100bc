import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ciq.elliptic import (EllipticDomainError, EllipticModulus, EllipticSingularityError, agm,
                          complete_elliptic_k, jacobi_elliptic, jacobi_imaginary)

mpmath = pytest.importorskip("mpmath")


def test_agm_known_value():
    assert agm(1.0, math.sqrt(2.0)) == pytest.approx(float(mpmath.agm(1, mpmath.sqrt(2))), rel=1e-15)
    assert agm(3.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        agm(-1.0, 1.0)


def test_k_at_zero_is_half_pi():
    assert abs(complete_elliptic_k(0.0) - math.pi / 2) <= 1e-15


@pytest.mark.parametrize("k", [1e-8, 0.1, 0.5, 0.9, 0.999, 1 - 1e-10])
def test_k_matches_mpmath(k):
    with mpmath.workdps(40):  # m = k^2 near 1 needs extra digits
        ref = float(mpmath.ellipk(mpmath.mpf(k) ** 2))
    assert complete_elliptic_k(k) == pytest.approx(ref, rel=1e-13)


def test_k_near_one_logarithmic():
    k = 1 - 1e-12
    kp = math.sqrt((1 - k) * (1 + k))
    # K(k) ~ log(4/k') as k -> 1
    assert complete_elliptic_k(k) == pytest.approx(math.log(4 / kp), rel=1e-6)


@pytest.mark.parametrize("k", [-0.1, 1.0, 1.5, float("nan")])
def test_domain_errors(k):
    with pytest.raises(EllipticDomainError):
        complete_elliptic_k(k)
    with pytest.raises(EllipticDomainError):
        jacobi_elliptic(0.3, k)


def test_degenerate_moduli():
    sn, cn, dn = jacobi_elliptic(0.7, 0.0)
    assert (sn, cn, dn) == pytest.approx((math.sin(0.7), math.cos(0.7), 1.0), abs=1e-15)
    sn_i, cn_i, dn_i = jacobi_imaginary(0.7, 0.0)
    assert sn_i == pytest.approx(math.sinh(0.7), rel=1e-14)
    assert cn_i == pytest.approx(math.cosh(0.7), rel=1e-14)


def test_quarter_period_values():
    k = 0.8
    m = EllipticModulus.from_k(k)
    sn, cn, dn = jacobi_elliptic(m.K_k, k)
    assert sn == pytest.approx(1.0, abs=1e-13)
    assert cn == pytest.approx(0.0, abs=1e-7)
    assert dn == pytest.approx(m.k_prime, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(u=st.floats(-20, 20), k=st.floats(0.0, 0.999999))
def test_jacobi_matches_mpmath(u, k):
    m = mpmath.mpf(k) ** 2
    ref = [float(mpmath.ellipfun(name, u, m=m)) for name in ("sn", "cn", "dn")]
    assert np.allclose(jacobi_elliptic(u, k), ref, atol=1e-12)


def test_imaginary_transform_matches_complex_mpmath():
    k, u = 0.3, 0.9
    m = mpmath.mpf(k) ** 2
    sn = complex(mpmath.ellipfun("sn", 1j * u, m=m))
    cn = complex(mpmath.ellipfun("cn", 1j * u, m=m))
    dn = complex(mpmath.ellipfun("dn", 1j * u, m=m))
    got = jacobi_imaginary(u, k)
    assert got == pytest.approx((sn.imag, cn.real, dn.real), rel=1e-13)


def test_imaginary_pole_raises():
    k = 0.6
    m = EllipticModulus.from_k(k)
    # cn(u | k') vanishes at u = K(k') = K'(k)
    with pytest.raises(EllipticSingularityError):
        jacobi_imaginary(m.K_kprime, k)


def test_modulus_from_condition_number():
    m = EllipticModulus.from_condition_number(1e8)
    assert m.k == pytest.approx(1e-4)
    assert m.k**2 + m.k_prime**2 == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(EllipticDomainError):
        EllipticModulus.from_condition_number(1.0)

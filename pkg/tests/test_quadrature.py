import math

import numpy as np
import pytest

from ciq.lanczos import SpectrumEstimate
from ciq.quadrature import (QuadratureRule, build_rule, quadrature_rate, rational_invsqrt_scalar,
                            rational_sqrt_scalar, weight_sum_bound)


def rule_for(kappa, Q, lmin=1.0):
    return build_rule(SpectrumEstimate.exact(lmin, lmin * kappa), Q)


@pytest.mark.parametrize("kappa", [10.0, 1e4, 1e8])
@pytest.mark.parametrize("Q", [4, 8, 16])
def test_nodes_positive_and_sorted(kappa, Q):
    r = rule_for(kappa, Q)
    assert np.all(r.shifts > 0) and np.all(r.weights > 0)
    assert np.all(np.diff(r.shifts) > 0)


@pytest.mark.parametrize("kappa,Q", [(1e2, 8), (1e4, 8), (1e4, 16), (1e6, 16), (1e8, 32)])
def test_scalar_error_follows_rate(kappa, Q):
    r = rule_for(kappa, Q, lmin=0.3)
    lam = np.geomspace(0.3, 0.3 * kappa, 500)
    err = np.abs(rational_sqrt_scalar(r, lam) / np.sqrt(lam) - 1.0).max()
    # observed constant is a small multiple of the geometric rate
    assert err < 10 * quadrature_rate(kappa, Q) + 1e-14


def test_invsqrt_scalar_consistent():
    r = rule_for(1e3, 12)
    lam = np.array([1.0, 30.0, 999.0])
    assert np.allclose(rational_invsqrt_scalar(r, lam) * lam, rational_sqrt_scalar(r, lam))
    assert np.allclose(rational_invsqrt_scalar(r, lam), lam**-0.5, rtol=1e-6)


def test_error_decreases_with_q():
    lam = np.geomspace(1, 1e5, 300)
    errs = [np.abs(rational_sqrt_scalar(rule_for(1e5, Q), lam) / np.sqrt(lam) - 1).max() for Q in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_identity_spectrum_clamped():
    r = build_rule(SpectrumEstimate.exact(4.0, 4.0), 6)
    assert r.kappa == pytest.approx(1.0 + 1e-8)
    assert rational_sqrt_scalar(r, np.array([4.0]))[0] == pytest.approx(2.0, rel=1e-10)


def test_scale_covariance():
    # the rule for c * [a, b] is the rule for [a, b] with shifts * c and weights * sqrt(c)
    r1 = rule_for(1e3, 8, lmin=1.0)
    r2 = rule_for(1e3, 8, lmin=9.0)
    assert np.allclose(r2.shifts, 9.0 * r1.shifts, rtol=1e-13)
    assert np.allclose(r2.weights, 3.0 * r1.weights, rtol=1e-13)


@pytest.mark.parametrize("kappa", [1e1, 1e2, 1e4, 1e6, 1e8])
@pytest.mark.parametrize("Q", [4, 8, 16, 32])
def test_weight_shift_ratio_bound(kappa, Q):
    r = rule_for(kappa, Q, lmin=0.05)
    assert np.sum(r.weights / r.shifts) < weight_sum_bound(r)


def test_table_roundtrip():
    r = rule_for(1e3, 5, lmin=0.2)
    back = QuadratureRule.from_table(r.to_table())
    assert np.array_equal(back.shifts, r.shifts) and np.array_equal(back.weights, r.weights)
    assert back.spectrum.lambda_max == r.spectrum.lambda_max


def test_invalid_inputs():
    with pytest.raises(ValueError):
        rule_for(10, 0)
    with pytest.raises(ValueError):
        build_rule(SpectrumEstimate(-1.0, 2.0, -1.0, 2.0), 4)


def test_quadrature_rate_formula():
    assert quadrature_rate(math.e**2, 1) == pytest.approx(math.exp(-2 * math.pi**2 / 5))

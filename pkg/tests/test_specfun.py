import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from herglotz_enclosure.specfun import (
    BesselDomainError,
    bessel_j,
    bessel_j_derivative,
    bessel_j_series,
    bessel_y,
    h0_h1,
    hankel1,
    hankel1_derivative,
    jn_array,
    jn_normalized_array,
    yn_array,
)

XS = np.array([1e-3, 0.1, 0.7, 1.0, 2.5, 7.3, 19.0, 48.0])


def test_jn_matches_scipy_relative():
    J = jn_array(60, XS)
    ref = sp.jv(np.arange(61)[:, None], XS[None, :])
    mask = np.abs(ref) > 1e-290
    rel = np.abs(J - ref)[mask] / np.maximum(np.abs(ref)[mask], 1e-300)
    # relative accuracy except right at zeros of J_m, where absolute error counts
    assert np.all((rel < 1e-12) | (np.abs(J - ref)[mask] < 1e-15))


def test_jn_at_zero():
    J = jn_array(5, np.array([0.0]))
    assert J[0, 0] == 1.0 and np.all(J[1:, 0] == 0.0)


def test_neumann_sum_is_one():
    J = jn_array(120, XS)
    total = J[0] + 2 * J[2::2].sum(axis=0)
    assert np.allclose(total, 1.0, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 40.0), st.integers(1, 50))
def test_three_term_recurrence(x, m):
    J = jn_array(m + 1, x)
    scale = max(abs(J[m - 1]), abs(J[m + 1]), abs(J[m]), 1e-300)
    assert abs(J[m - 1] + J[m + 1] - 2 * m / x * J[m]) <= 1e-12 * scale * (1 + 2 * m / x)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 40.0), st.integers(0, 30))
def test_wronskian(x, m):
    J = bessel_j(m, x), bessel_j(m + 1, x)
    Y = bessel_y(m, x), bessel_y(m + 1, x)
    w = J[1] * Y[0] - J[0] * Y[1]
    assert w == pytest.approx(2 / (math.pi * x), rel=1e-10)


def test_yn_matches_scipy():
    Y = yn_array(20, XS[1:])
    ref = sp.yn(np.arange(21)[:, None], XS[None, 1:])
    assert np.allclose(Y, ref, rtol=1e-11, atol=0)


def test_hankel_and_derivatives():
    for m in (-3, 0, 1, 7):
        for x in (0.3, 2.0, 11.0):
            assert hankel1(m, x) == pytest.approx(sp.hankel1(m, x), rel=1e-12)
            assert hankel1_derivative(m, x) == pytest.approx(sp.h1vp(m, x), rel=1e-11)
            assert bessel_j_derivative(m, x) == pytest.approx(sp.jvp(m, x), rel=1e-10, abs=1e-15)


def test_series_agrees_with_recurrence():
    for m in (0, 3, 12):
        for x in (0.2, 1.5):
            assert bessel_j_series(m, x) == pytest.approx(float(jn_array(m, x)[m]), rel=1e-14)


def test_negative_order_symmetry():
    assert bessel_j(-5, 2.0) == pytest.approx(-bessel_j(5, 2.0), rel=1e-15)


def test_h0_h1_chunked():
    x = np.linspace(0.01, 30, 1001).reshape(7, 143)
    h0, h1 = h0_h1(x, chunk=100)
    assert h0.shape == x.shape
    assert np.allclose(h0, sp.hankel1(0, x), rtol=1e-12)
    assert np.allclose(h1, sp.hankel1(1, x), rtol=1e-12)


def test_normalized_bessel():
    x = np.array([0.0, 0.4, 3.0, 17.0])
    rho = jn_normalized_array(80, x)
    assert np.all(rho[:, 0] == 1.0)
    for m in (0, 5, 40, 80):
        logj = m * np.log(x[1:] / 2) - math.lgamma(m + 1) + np.log(np.abs(rho[m, 1:]))
        ref = np.log(np.abs(sp.jv(m, x[1:])))
        ok = np.abs(sp.jv(m, x[1:])) > 1e-250
        assert np.allclose(logj[ok], ref[ok], atol=1e-11)


def test_domain_errors():
    with pytest.raises(BesselDomainError):
        jn_array(3, -1.0)
    with pytest.raises(BesselDomainError):
        yn_array(3, 0.0)
    with pytest.raises(BesselDomainError):
        hankel1(0, 0.0)
    with pytest.raises(BesselDomainError):
        jn_normalized_array(3, np.array([np.nan]))


def test_hankel_large_argument_modulus():
    assert abs(hankel1(0, 500.0)) * math.sqrt(math.pi * 500.0 / 2) == pytest.approx(1.0, abs=1e-3)


def test_derivative_identity():
    for m in range(1, 21):
        for x in (0.5, 1.0, 10.0):
            lhs = bessel_j_derivative(m, x)
            assert abs(lhs - 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x))) <= 1e-10

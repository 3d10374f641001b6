import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from embedq._validation import DomainError
from embedq.qfunc import (
    GaussianLimitError,
    WeightSettings,
    moment_closed_form,
    normalization_constant,
    product_terms,
    q_factorial,
    q_hermite,
    q_number,
    support_bound,
    weight_pdf,
    weight_quadrature,
    weight_unnormalized,
)


def quad_expect(f, q):
    """Expectation under v(x|q) with adaptive quadrature, independent of the GL rule."""
    x0 = support_bound(q) if q < 1 else 40.0
    val, _ = integrate.quad(lambda x: f(x) * weight_pdf(x, q), -x0, x0, limit=400,
                            epsabs=1e-13, epsrel=1e-12, points=[0.0])
    return val


@pytest.mark.parametrize("n,q,expected", [(3, 1, 3.0), (0, 0.5, 0.0), (3, 0.5, 1.75), (1, 0.0, 1.0)])
def test_q_number(n, q, expected):
    assert q_number(n, q) == expected


@pytest.mark.parametrize("n,q,expected", [(0, 0.7, 1.0), (3, 1, 6.0), (2, 0.5, 1.5)])
def test_q_factorial(n, q, expected):
    assert q_factorial(n, q) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("fn", [q_number, q_factorial])
def test_negative_n_rejected(fn):
    with pytest.raises(DomainError):
        fn(-1, 0.5)


@pytest.mark.parametrize("q", [-0.1, 1.2])
def test_q_outside_unit_interval_rejected(q):
    with pytest.raises(DomainError):
        q_number(2, q)


def test_q_hermite_examples():
    assert q_hermite(0, 0.37, 0.4) == 1.0
    assert q_hermite(1, 0.5, 0.9) == 0.5
    assert q_hermite(2, 2.0, 0.0) == 3.0


def test_q_hermite_limits():
    x = np.linspace(-3, 3, 13)
    # probabilists' Hermite at q = 1
    for n in range(7):
        he = np.polynomial.hermite_e.hermeval(x, [0] * n + [1])
        np.testing.assert_allclose(q_hermite(n, x, 1.0), he, rtol=1e-12, atol=1e-12)
    # Chebyshev of the second kind in x/2 at q = 0
    for n in range(7):
        theta = np.arccos(np.clip(x / 2, -1, 1))
        inside = np.abs(x) < 2
        un = np.sin((n + 1) * theta[inside]) / np.sin(theta[inside])
        np.testing.assert_allclose(q_hermite(n, x[inside], 0.0), un, rtol=1e-10, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 10), x=st.floats(-5, 5), q=st.floats(0, 1))
def test_recursion_identity(n, x, q):
    lhs = x * q_hermite(n, x, q) - q_hermite(n + 1, x, q) - q_number(n, q) * q_hermite(n - 1, x, q)
    scale = 1 + abs(x * q_hermite(n, x, q)) + abs(q_hermite(n + 1, x, q))
    assert abs(lhs) <= 1e-12 * scale


def test_weight_unnormalized_examples():
    for q in (0.0, 0.3, 0.9):
        x0 = support_bound(q)
        assert weight_unnormalized(x0, q) == 0.0
        assert weight_unnormalized(-x0, q) == 0.0
    assert weight_unnormalized(0.0, 0.0, WeightSettings(product_truncation=1)) == 1.0
    assert weight_unnormalized(1.0, 0.0) == pytest.approx(math.sqrt(0.75), rel=1e-15)


def test_weight_unnormalized_brute_force_product():
    q, x = 0.4, 1.3
    x0sq = 4 / (1 - q)
    y = x * x / x0sq
    brute = math.sqrt(1 - y)
    for kappa in range(1, 200):
        brute *= 1 - 4 * y / (2 + q**kappa + q**-kappa)
    assert weight_unnormalized(x, q) == pytest.approx(brute, rel=1e-13)


def test_weight_unnormalized_errors():
    with pytest.raises(GaussianLimitError):
        weight_unnormalized(0.0, 1.0)
    with pytest.raises(ValueError):
        weight_unnormalized(2.5, 0.0)


def test_product_truncation_adapts_to_q():
    assert product_terms(0.0) == 1
    assert product_terms(0.5) < product_terms(0.9) < product_terms(0.99)
    q = 0.9
    K = product_terms(q)
    assert 4 * q**K < 1e-14 <= 4 * q ** (K - 1)


def test_normalization_constant_semicircle():
    # integral of sqrt(1 - x^2/4) over [-2, 2] is pi
    assert normalization_constant(0.0) == pytest.approx(1 / math.pi, rel=1e-12)


@pytest.mark.parametrize("q", [0.5, 0.99])
def test_normalization_defining_property(q):
    x0 = min(support_bound(q), 20.0)
    mass, _ = integrate.quad(lambda x: weight_pdf(x, q), -x0, x0, limit=400, epsabs=1e-13)
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_weight_pdf_examples():
    assert weight_pdf(0.0, 1.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert weight_pdf(3.0, 0.0) == 0.0
    assert weight_pdf(0.0, 0.0) == pytest.approx(1 / math.pi, rel=1e-15)


def test_weight_pdf_limits_pointwise():
    x = np.linspace(-4, 4, 161)
    np.testing.assert_allclose(weight_pdf(x, 1.0), stats.norm.pdf(x), atol=1e-10, rtol=0)
    semi = np.where(np.abs(x) <= 2, np.sqrt(np.clip(4 - x * x, 0, None)) / (2 * np.pi), 0.0)
    np.testing.assert_allclose(weight_pdf(x, 0.0), semi, atol=1e-10, rtol=0)


def test_weight_pdf_zero_outside_support():
    q = 0.5
    x0 = support_bound(q)
    assert weight_pdf(np.array([x0 + 1e-6, -x0 - 1.0, 10.0]), q).tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("q", [0.0, 0.5, 1.0])
def test_mu4_examples(q):
    assert moment_closed_form(2, q) == pytest.approx(2 + q, rel=1e-14)


def test_moment_examples():
    assert moment_closed_form(3, 1.0) == 15.0
    assert moment_closed_form(4, 0.0) == 14.0
    assert moment_closed_form(0, 0.3) == 1.0
    assert moment_closed_form(1, 0.3) == pytest.approx(1.0, rel=1e-15)


def test_moment_continuous_at_q_one():
    for n in range(1, 6):
        assert moment_closed_form(n, 1 - 1e-9) == pytest.approx(moment_closed_form(n, 1.0), rel=1e-7)


@pytest.mark.parametrize("q", [0.0, 0.3, 0.7, 0.95])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_even_moments_match_quadrature(q, n):
    num = quad_expect(lambda x: x ** (2 * n), q)
    assert num == pytest.approx(moment_closed_form(n, q), rel=1e-6)


@pytest.mark.parametrize("q", [0.0, 0.3, 0.7, 0.95])
@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_odd_moments_vanish(q, n):
    # half-line integrals cancel; adaptive quad does not exploit node symmetry
    x0 = support_bound(q)
    f = lambda x: x ** (2 * n + 1) * weight_pdf(x, q)
    right = integrate.quad(f, 0, x0, limit=400, epsabs=1e-14)[0]
    left = integrate.quad(f, -x0, 0, limit=400, epsabs=1e-14)[0]
    assert abs(left + right) < 1e-8


@pytest.mark.parametrize("q", [0.2, 0.5, 0.8])
def test_orthogonality(q):
    x, w = weight_quadrature(q)
    for n in range(7):
        hn = q_hermite(n, x, q)
        for m in range(7):
            val = np.dot(w, hn * q_hermite(m, x, q))
            if n == m:
                assert val == pytest.approx(q_factorial(n, q), rel=1e-6)
            else:
                assert abs(val) <= 1e-6 * q_factorial(max(n, m), q)


def test_weight_quadrature_matches_adaptive_quad():
    q = 0.6
    x, w = weight_quadrature(q)
    f = lambda t: np.cos(1.7 * t) * t**2
    assert np.dot(w, f(x)) == pytest.approx(quad_expect(f, q), rel=1e-9)

"""Hermite polynomials, quadrature rules, and activation expansions."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import roots_hermite

from nke.errors import DegreeTooLarge, DomainError, NonFiniteActivation
from nke.hermite import (
    HermiteCoeffs,
    gauss_hermite_rule,
    hermite_eval,
    hermite_expand,
    hermite_series_to_poly,
    monomial_to_hermite,
)

from conftest import exact_hermite_coeffs, exact_hermite_eval


# ---------------------------------------------------------------------------
# hermite_eval


@given(
    ell=st.integers(min_value=0, max_value=40),
    num=st.integers(min_value=-8, max_value=8),
    den=st.integers(min_value=1, max_value=4),
)
@settings(max_examples=120, deadline=None)
def test_eval_matches_exact_rational_recurrence(ell, num, den):
    t = Fraction(num, den)
    expected = float(exact_hermite_eval(ell, t))
    got = float(hermite_eval(ell, float(t)))
    assert got == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_eval_known_values():
    # frozen from the exact recurrence: h_2 = t^2 - 1, h_3 = t^3 - 3t,
    # h_4 = t^4 - 6t^2 + 3, h_6(2) = 64 - 15*16 + 45*4 - 15 = -11
    assert hermite_eval(2, 2.0) == pytest.approx(3.0)
    assert hermite_eval(3, 2.0) == pytest.approx(2.0)
    assert hermite_eval(4, 2.0) == pytest.approx(-5.0)
    assert hermite_eval(6, 2.0) == pytest.approx(-11.0)


def test_eval_vectorized_and_caps():
    t = np.linspace(-2, 2, 7)
    vals = hermite_eval(5, t)
    assert vals.shape == t.shape
    for ti, vi in zip(t, vals):
        assert vi == pytest.approx(float(hermite_eval(5, ti)))
    with pytest.raises(DegreeTooLarge):
        hermite_eval(201, 0.5)
    with pytest.raises(DomainError):
        hermite_eval(-1, 0.5)


def test_eval_stays_finite_at_cap():
    vals = hermite_eval(200, np.linspace(-10, 10, 11))
    assert np.all(np.isfinite(vals))


def test_rodrigues_form():
    # h_l(t) = (-1)^l e^{t^2/2} d^l/dt^l e^{-t^2/2}, checked symbolically
    sympy = pytest.importorskip("sympy")
    x = sympy.symbols("x")
    expr = sympy.exp(-(x**2) / 2)
    for ell in range(0, 11):
        rod = sympy.simplify((-1) ** ell * sympy.exp(x**2 / 2) * sympy.diff(expr, x, ell))
        for t in (-1.7, -0.3, 0.0, 0.9, 2.4):
            expected = float(rod.subs(x, t))
            assert float(hermite_eval(ell, t)) == pytest.approx(expected, rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------------------
# monomial_to_hermite


@given(i=st.integers(min_value=0, max_value=12))
@settings(max_examples=13, deadline=None)
def test_monomial_roundtrip(i):
    mu = monomial_to_hermite(i)
    for t in (-1.5, -0.25, 0.5, 1.0, 2.0):
        recon = sum(float(mu[l]) * float(exact_hermite_eval(l, Fraction(t))) for l in range(i + 1))
        assert recon == pytest.approx(t**i, rel=1e-9, abs=1e-12)


def test_monomial_to_hermite_parity_and_values():
    mu4 = monomial_to_hermite(4)
    # t^4 = h_4 + 6 h_2 + 3 h_0
    assert mu4 == pytest.approx([3.0, 0.0, 6.0, 0.0, 1.0])
    assert mu4[1] == 0.0 and mu4[3] == 0.0
    with pytest.raises(DegreeTooLarge):
        monomial_to_hermite(171)


def test_monomial_to_hermite_large_degree_finite():
    mu = monomial_to_hermite(170)
    assert np.all(np.isfinite(mu))
    assert mu[170] == 1.0


def test_hermite_series_to_poly_inverts_expansion():
    rng = np.random.default_rng(3)
    for deg in (0, 1, 5, 9):
        poly = rng.standard_normal(deg + 1)
        # convert to Hermite basis coefficient-by-coefficient, then back
        herm = np.zeros(deg + 1)
        for i, a in enumerate(poly):
            herm[: i + 1] += a * monomial_to_hermite(i)
        back = hermite_series_to_poly(herm)
        assert back == pytest.approx(poly, rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------------------
# gauss_hermite_rule


@pytest.mark.parametrize("q", [1, 2, 3, 5, 8, 20, 60, 128, 200])
def test_rule_basic_structure(q):
    rule = gauss_hermite_rule(q)
    assert rule.nodes.shape == (q,) and rule.weights.shape == (q,)
    assert np.all(rule.weights > 0)
    np.testing.assert_allclose(rule.nodes, -rule.nodes[::-1], atol=1e-12)
    assert abs(rule.weights.sum() - math.sqrt(math.pi)) < 1e-10


@pytest.mark.parametrize("q", [2, 5, 12, 40])
def test_rule_matches_scipy_roots(q):
    rule = gauss_hermite_rule(q)
    x, w = roots_hermite(q)
    np.testing.assert_allclose(rule.nodes, x, atol=1e-12)
    np.testing.assert_allclose(rule.weights, w, rtol=1e-11)


@pytest.mark.parametrize("q", [3, 7, 16])
def test_rule_polynomial_exactness(q):
    # integrates t^(2k) e^{-t^2} exactly up to degree 2q-1: value Gamma(k+1/2)
    rule = gauss_hermite_rule(q)
    for k in range(q):  # 2k <= 2q-2 < 2q-1
        exact = math.gamma(k + 0.5)
        got = float(np.sum(rule.weights * rule.nodes ** (2 * k)))
        assert got == pytest.approx(exact, rel=1e-9)


def test_rule_weight_formula():
    # w_i = q! sqrt(pi) / (q^2 h_{q-1}(sqrt(2) x_i)^2)
    for q in (4, 9, 25, 40):
        rule = gauss_hermite_rule(q)
        h = hermite_eval(q - 1, math.sqrt(2.0) * rule.nodes)
        formula = math.factorial(q) * math.sqrt(math.pi) / (q**2 * h**2)
        np.testing.assert_allclose(rule.weights, formula, rtol=1e-9)


def test_rule_rejects_bad_orders():
    with pytest.raises(DegreeTooLarge):
        gauss_hermite_rule(0)
    with pytest.raises(DegreeTooLarge):
        gauss_hermite_rule(201)


# ---------------------------------------------------------------------------
# hermite_expand


def test_expand_recovers_polynomial_coefficients():
    # sigma(t) = t^3: sigma(nu t) = nu^3 (h_3 + 3 h_1)
    out = hermite_expand(lambda t: t**3, q=6, nu=1.0)
    assert isinstance(out, HermiteCoeffs)
    expected = np.zeros(7)
    expected[1], expected[3] = 3.0, 1.0
    np.testing.assert_allclose(out.coeffs, expected, atol=1e-12)
    out2 = hermite_expand(lambda t: t**3, q=6, nu=2.0)
    np.testing.assert_allclose(out2.coeffs, 8.0 * expected, atol=1e-11)


def test_expand_relu_known_coefficients():
    # E[relu(t) h_j(t)]/j!: c_0 = 1/sqrt(2pi), c_1 = 1/2, c_2 = 1/(2 sqrt(2pi)),
    # odd coefficients beyond 1 vanish. The quadrature converges slowly across
    # the kink, so even coefficients are only a few digits at order 200; c_1
    # and the odd zeros come out exact by parity.
    out = hermite_expand(lambda t: np.maximum(t, 0.0), q=9, nu=1.0, quad_order=200)
    c = out.coeffs
    inv = 1.0 / math.sqrt(2.0 * math.pi)
    assert c[0] == pytest.approx(inv, rel=1e-2)
    assert c[1] == pytest.approx(0.5, rel=1e-12)
    assert c[2] == pytest.approx(inv / 2.0, rel=1e-2)
    assert abs(c[3]) < 1e-10 and abs(c[5]) < 1e-10 and abs(c[7]) < 1e-10


def test_expand_parseval_for_bounded_activation():
    # Partial Parseval sums sum_j c_j^2 j! approach E[sigma(nu t)^2] from
    # below as q grows; the residual is the truncation tail.
    from scipy.special import erf

    x, w = roots_hermite(200)
    direct = float(np.sum(w * erf(1.3 * math.sqrt(2.0) * x) ** 2) / math.sqrt(math.pi))
    masses = []
    for q in (10, 30, 60):
        hc = hermite_expand(erf, q=q, nu=1.3)
        masses.append(sum(hc.coeffs[j] ** 2 * math.factorial(j) for j in range(q + 1)))
    assert masses[0] < masses[1] < masses[2] < direct + 1e-12
    assert direct - masses[1] < 1e-4
    assert direct - masses[2] < 1e-9


def test_expand_validates_arguments():
    with pytest.raises(DomainError):
        hermite_expand(np.tanh, q=10, nu=1.0, quad_order=21)  # below 2q+2
    with pytest.raises(NonFiniteActivation):
        hermite_expand(lambda t: np.where(np.abs(t) > 3, np.nan, t), q=4, nu=1.0)
    with pytest.raises(DegreeTooLarge):
        hermite_expand(np.tanh, q=100, nu=1.0)  # needs quad order 202 > cap


def test_expand_accepts_exact_minimum_order():
    out = hermite_expand(np.tanh, q=10, nu=1.0, quad_order=22)
    assert out.coeffs.shape == (11,)
    assert np.all(np.isfinite(out.coeffs))

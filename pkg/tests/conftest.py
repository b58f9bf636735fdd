"""Shared oracles for the test suite.

Everything in here is implemented independently of the library under test:
exact rational Hermite polynomials, quadrature built on scipy's own
Gauss-Hermite roots, and Monte Carlo duals drawn from an explicit 2x2
Cholesky factor. Library results are checked against these, not against
themselves.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import roots_hermite


def exact_hermite_coeffs(ell: int) -> list[Fraction]:
    """Monomial coefficients of h_ell as exact Fractions (recurrence)."""
    prev = [Fraction(1)]
    if ell == 0:
        return prev
    cur = [Fraction(0), Fraction(1)]
    for k in range(1, ell):
        shifted = [Fraction(0)] + cur  # t * h_k
        nxt = shifted[:]
        for i, c in enumerate(prev):
            nxt[i] -= k * c
        prev, cur = cur, nxt
    return cur


def exact_hermite_eval(ell: int, t: Fraction) -> Fraction:
    acc = Fraction(0)
    for i, c in enumerate(exact_hermite_coeffs(ell)):
        acc += c * t**i
    return acc


def oracle_dual_quadrature(scalar_fn, a, b, c, order=150):
    """Dual kernel E[sigma(u)sigma(v)] via scipy's Gauss-Hermite roots.

    Independent of the library's rule construction. Accurate to near machine
    precision for smooth activations; a few digits for kinked ones.
    """
    x, w = roots_hermite(order)
    u = math.sqrt(2.0) * a * x
    s = math.sqrt(max(1.0 - c * c, 0.0))
    v = math.sqrt(2.0) * b * (c * x[:, None] + s * x[None, :])
    fu = scalar_fn(u)
    fv = scalar_fn(v)
    return float(np.einsum("i,ij,i,j->", fu, fv, w, w) / math.pi)


def oracle_dual_mc(scalar_fn, a, b, c, n=2_000_000, seed=0):
    """Monte Carlo dual with an explicit Cholesky factor of [[a^2,abc],[abc,b^2]]."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((2, n))
    u = a * g[0]
    v = b * (c * g[0] + math.sqrt(max(1.0 - c * c, 0.0)) * g[1])
    vals = scalar_fn(u) * scalar_fn(v)
    return float(np.mean(vals)), float(np.std(vals) / math.sqrt(n))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)

"""Probabilists' Hermite polynomials, Gauss-Hermite quadrature, and expansions.

The probabilists' Hermite polynomials satisfy the three-term recurrence

    h_0(t) = 1,   h_1(t) = t,   h_{l+1}(t) = t*h_l(t) - l*h_{l-1}(t)

and are orthogonal under the standard normal measure: E[h_l(t)h_m(t)] = l! if
l == m else 0. Monomials expand as t^i = sum_l mu_{i,l} h_l(t) with integer
coefficients mu_{i,l} = i! / (2^((i-l)/2) * ((i-l)/2)! * l!) for i-l even.

Quadrature rules here are for the physicists' weight exp(-x^2): a degree-q
rule integrates polynomials of degree <= 2q-1 exactly, and an expectation
under N(mu, s^2) is (1/sqrt(pi)) * sum_i w_i * g(mu + sqrt(2)*s*x_i).
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import BadParams, DegreeTooLarge, DomainError, EigenFailure, NonFiniteActivation

# The three-term recurrence itself is stable, but l! is the natural scale of
# h_l and 171! overflows float64; caps keep every returned quantity finite.
DEGREE_CAP = 200
MONOMIAL_CAP = 170

__all__ = [
    "DEGREE_CAP",
    "MONOMIAL_CAP",
    "QuadratureRule",
    "HermiteCoeffs",
    "hermite_eval",
    "monomial_to_hermite",
    "hermite_series_to_poly",
    "gauss_hermite_rule",
    "half_gauss_rule",
    "hermite_expand",
]


class QuadratureRule(NamedTuple):
    """Nodes and weights of a Gauss rule; the weight is the constructor's."""

    nodes: np.ndarray
    weights: np.ndarray


class HermiteCoeffs(NamedTuple):
    """Hermite expansion of sigma(nu*t): sigma(nu*t) ~= sum_j coeffs[j] h_j(t)."""

    coeffs: np.ndarray
    nu: float


def _check_degree(ell: int, cap: int = DEGREE_CAP) -> int:
    ell = int(ell)
    if ell < 0:
        raise DomainError(f"degree must be nonnegative, got {ell}")
    if ell > cap:
        raise DegreeTooLarge(f"degree {ell} exceeds the supported cap {cap}")
    return ell


def hermite_eval(ell: int, t):
    """Evaluate the probabilists' Hermite polynomial h_ell at t.

    t may be a scalar or ndarray; the recurrence is applied elementwise.
    """
    ell = _check_degree(ell)
    t = np.asarray(t, dtype=float)
    prev = np.ones_like(t)
    if ell == 0:
        return prev
    cur = t.copy()
    for k in range(1, ell):
        prev, cur = cur, t * cur - k * prev
    return cur


def _hermite_table(ell_max: int, t: np.ndarray) -> np.ndarray:
    """Stack [h_0(t), ..., h_ell_max(t)] along a new leading axis."""
    ell_max = _check_degree(ell_max)
    t = np.asarray(t, dtype=float)
    out = np.empty((ell_max + 1,) + t.shape, dtype=float)
    out[0] = 1.0
    if ell_max >= 1:
        out[1] = t
    for k in range(1, ell_max):
        out[k + 1] = t * out[k] - k * out[k - 1]
    return out


def monomial_to_hermite(i: int) -> np.ndarray:
    """Coefficients mu with t^i = sum_{l=0}^{i} mu[l] * h_l(t).

    The coefficients are exact integers (computed in integer arithmetic and
    converted to float64 at the end); mu[l] = 0 for i-l odd.
    """
    i = _check_degree(i, MONOMIAL_CAP)
    mu = np.zeros(i + 1)
    fact_i = math.factorial(i)
    for ell in range(i % 2, i + 1, 2):
        k = (i - ell) // 2
        mu[ell] = float(fact_i // (2**k * math.factorial(k) * math.factorial(ell)))
    return mu


def hermite_series_to_poly(coeffs) -> np.ndarray:
    """Monomial coefficients of sum_l coeffs[l] * h_l(t).

    Uses the explicit expansion h_l(t) = l! sum_k (-1)^k t^(l-2k) / (k! (l-2k)! 2^k).
    Exact in integer arithmetic per term, but note the terms alternate in sign
    and grow combinatorially, so the *monomial* representation of a high-degree
    Hermite series is numerically hostile; prefer working in the Hermite basis
    (see nke.series.dual_kernel_hermite) beyond degree ~30.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise BadParams("coeffs must be a nonempty 1-D sequence")
    deg = coeffs.size - 1
    _check_degree(deg, MONOMIAL_CAP)
    out = np.zeros(deg + 1)
    for ell in range(deg + 1):
        if coeffs[ell] == 0.0:
            continue
        fact_l = math.factorial(ell)
        for k in range(ell // 2 + 1):
            m = ell - 2 * k
            term = fact_l // (math.factorial(k) * math.factorial(m) * 2**k)
            out[m] += coeffs[ell] * ((-1) ** k) * float(term)
    return out


def _log_abs_hermite(ell: int, t: np.ndarray) -> np.ndarray:
    """log|h_ell(t)| via a rescaled recurrence (avoids float64 overflow)."""
    t = np.asarray(t, dtype=float)
    if ell == 0:
        return np.zeros_like(t)
    prev = np.ones_like(t)
    cur = t.copy()
    logscale = np.zeros_like(t)
    for k in range(1, ell):
        nxt = t * cur - k * prev
        mag = np.maximum(np.abs(nxt), np.abs(cur))
        mag = np.where(mag == 0.0, 1.0, mag)
        prev = cur / mag
        cur = nxt / mag
        logscale += np.log(mag)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(cur)) + logscale


def gauss_hermite_rule(q: int) -> QuadratureRule:
    """Degree-q Gauss-Hermite rule via the Golub-Welsch eigenproblem.

    The symmetric tridiagonal Jacobi matrix for the exp(-x^2) weight has zero
    diagonal and off-diagonals sqrt(k/2); its eigenvalues are the nodes.
    Weights use the classical identity w_i = q! sqrt(pi) / (q^2 h_{q-1}(sqrt2 x_i)^2),
    evaluated in log space: the squared-first-eigenvector route underflows to
    exact zeros at the extreme nodes once q is around 60, while this form stays
    accurate (and positive) through the degree cap. Nodes/weights are
    symmetrized so the rule is exactly even.
    """
    q = int(q)
    if not 1 <= q <= DEGREE_CAP:
        raise DegreeTooLarge(f"quadrature order must be in [1, {DEGREE_CAP}], got {q}")
    diag = np.zeros(q)
    off = np.sqrt(np.arange(1, q) / 2.0)
    try:
        nodes = eigh_tridiagonal(diag, off, eigvals_only=True)
    except Exception as exc:  # scipy raises LinAlgError on non-convergence
        raise EigenFailure(f"tridiagonal eigensolve failed for q={q}") from exc
    # eigenvalues come back sorted; enforce the +-x pairing exactly
    nodes = 0.5 * (nodes - nodes[::-1])
    log_h = _log_abs_hermite(q - 1, math.sqrt(2.0) * nodes)
    log_w = math.lgamma(q + 1) + 0.5 * math.log(math.pi) - 2.0 * math.log(q) - 2.0 * log_h
    weights = np.exp(log_w)
    weights = 0.5 * (weights + weights[::-1])
    if not (np.all(np.isfinite(nodes)) and np.all(weights > 0)):
        raise EigenFailure(f"degenerate quadrature rule for q={q}")
    return QuadratureRule(nodes=nodes, weights=weights)


@lru_cache(maxsize=64)
def half_gauss_rule(q: int, power: int = 0) -> QuadratureRule:
    """Gauss rule with q nodes for the weight r^power * exp(-r^2) on (0, inf).

    power=0 integrates Gaussian expectations restricted to a half-line;
    power=1 is the radial weight of a bivariate Gaussian in polar coordinates.
    Built by the discretized Stieltjes procedure (orthonormal three-term
    recurrence accumulated against a dense composite Gauss-Legendre grid,
    which is stable where the moment-based construction is not), followed by
    the Golub-Welsch eigenproblem. Exact for polynomials up to degree 2q-1
    in r.
    """
    q = int(q)
    if not 1 <= q <= DEGREE_CAP:
        raise DegreeTooLarge(f"quadrature order must be in [1, {DEGREE_CAP}], got {q}")
    if power not in (0, 1):
        raise BadParams(f"power must be 0 or 1, got {power}")
    # support effectively ends where exp(-r^2) underflows relative to the
    # largest node scale sqrt(2q+1)
    r_max = min(math.sqrt(2.0 * q + 1.0) + 8.0, 30.0)
    panels = max(48, q)
    xg, wg = np.polynomial.legendre.leggauss(32)
    edges = np.linspace(0.0, r_max, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    grid = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    dens = (half[:, None] * wg[None, :]).ravel() * grid**power * np.exp(-(grid**2))
    m0 = float(dens.sum())
    alphas = np.empty(q)
    betas = np.empty(q)
    p_prev = np.zeros_like(grid)
    p = np.full_like(grid, 1.0 / math.sqrt(m0))
    for k in range(q):
        alphas[k] = float(np.sum(dens * grid * p * p))
        if k + 1 == q:
            break
        resid = (grid - alphas[k]) * p - (math.sqrt(betas[k]) * p_prev if k else 0.0)
        betas[k + 1] = float(np.sum(dens * resid * resid))
        if not betas[k + 1] > 0.0:
            raise EigenFailure(f"Stieltjes breakdown at step {k + 1} for q={q}, power={power}")
        p_prev, p = p, resid / math.sqrt(betas[k + 1])
    try:
        nodes = eigh_tridiagonal(alphas, np.sqrt(betas[1:q]), eigvals_only=True)
    except Exception as exc:
        raise EigenFailure(f"tridiagonal eigensolve failed for q={q}, power={power}") from exc
    # Christoffel numbers w_i = 1 / sum_k p_k(x_i)^2: the squared-eigenvector
    # route underflows to exact zeros at extreme nodes, this form does not
    p_lo = np.zeros_like(nodes)
    p_hi = np.full_like(nodes, 1.0 / math.sqrt(m0))
    ssq = p_hi * p_hi
    for k in range(q - 1):
        p_new = ((nodes - alphas[k]) * p_hi - (math.sqrt(betas[k]) * p_lo if k else 0.0)) / math.sqrt(
            betas[k + 1]
        )
        ssq += p_new * p_new
        p_lo, p_hi = p_hi, p_new
    weights = 1.0 / ssq
    if not (np.all(np.isfinite(nodes)) and np.all(nodes > 0) and np.all(weights > 0)):
        raise EigenFailure(f"degenerate half-range rule for q={q}, power={power}")
    return QuadratureRule(nodes=nodes, weights=weights)


def hermite_expand(
    sigma: Callable[[np.ndarray], np.ndarray],
    q: int,
    nu: float = 1.0,
    quad_order: Optional[int] = None,
) -> HermiteCoeffs:
    """Hermite coefficients c_j, j = 0..q, of sigma(nu*t) under N(0,1).

    c_j = E[sigma(nu*t) h_j(t)] / j!, evaluated with a Gauss-Hermite rule:
    c_j = (1/j!) (1/sqrt(pi)) sum_i w_i sigma(nu*sqrt(2)*x_i) h_j(sqrt(2)*x_i).

    quad_order defaults to 2q+2 and must be at least that, so every integrand
    h_j*h_q is integrated exactly up to the truncation degree.
    """
    q = _check_degree(q)
    nu = float(nu)
    if not (np.isfinite(nu) and nu > 0):
        raise BadParams(f"nu must be a positive finite scale, got {nu}")
    if quad_order is None:
        quad_order = 2 * q + 2
    quad_order = int(quad_order)
    if quad_order < 2 * q + 2:
        raise DomainError(f"quad_order must be >= 2q+2 = {2 * q + 2}, got {quad_order}")
    rule = gauss_hermite_rule(quad_order)
    s2x = math.sqrt(2.0) * rule.nodes
    vals = np.asarray(sigma(nu * s2x), dtype=float)
    if vals.shape != s2x.shape:
        vals = np.broadcast_to(vals, s2x.shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteActivation("activation returned non-finite values at quadrature nodes")
    table = _hermite_table(q, s2x)
    raw = table @ (rule.weights * vals)  # sqrt(pi) * j! * c_j
    inv_sqrt_pi = 1.0 / math.sqrt(math.pi)
    coeffs = np.array([raw[j] * inv_sqrt_pi / math.factorial(j) for j in range(q + 1)])
    return HermiteCoeffs(coeffs=coeffs, nu=nu)

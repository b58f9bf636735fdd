"""Truncated-expansion dual kernels and their approximation error bounds.

A polynomial sigma~(t) = sum_j a_j t^j has the exact dual kernel

    K(x, y) = sum_l r_l(|x|) r_l(|y|) c^l,    c = <x,y>/(|x||y|),

with radial factors r_l(t) = sum_i a_{l+2i} (l+2i)! / (2^i i! sqrt(l!)) t^(2i+l).
For a general activation, truncating its Hermite expansion gives such a
polynomial, and the functions below bound the resulting kernel error.

Two evaluation paths are provided. The monomial-basis path (radial_factor,
dual_kernel_poly) follows the formula above literally and is exact for
polynomials handed over in monomial form. The Hermite-basis path
(hermite_radial_factor, dual_kernel_hermite) evaluates the *same* kernel
directly from Hermite coefficients c_j of sigma(nu*t):

    R_l(s) = sqrt(l!) sum_i c_{l+2i} (l+2i)!/(l! 2^i i!) (s^2-1)^i s^l,
    s = t/nu,

which follows from the scaling identity
h_j(s t) = sum_i C(j,2i) (2i-1)!! (s^2-1)^i s^(j-2i) h_{j-2i}(t).
Converting a degree-60 Hermite series to monomials first loses all float64
precision to cancellation; the Hermite-basis form is stable for s <= 1 and
should be preferred beyond degree ~30.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import BadParams, DomainError
from .hermite import DEGREE_CAP, MONOMIAL_CAP, HermiteCoeffs, hermite_expand

# Plain 1-D float arrays indexed by degree; kept as an alias so signatures
# document intent without wrapping numpy.
PolyCoeffs = np.ndarray

__all__ = [
    "PolyCoeffs",
    "RadialTable",
    "radial_factor",
    "radial_table",
    "dual_kernel_poly",
    "hermite_radial_factor",
    "dual_kernel_hermite",
    "hermite_dual_gram",
    "hermite_tail_mass",
    "truncation_error_bound_general",
    "truncation_error_bound_smooth",
    "truncation_error_bound_relu",
]


class RadialTable(NamedTuple):
    """Radial factors tabulated over a set of norms: values[l, j] = r_l(norms[j])."""

    values: np.ndarray
    norms: np.ndarray


def _as_coeffs(p: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise BadParams("polynomial coefficients must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise BadParams("polynomial coefficients must be finite")
    if arr.size - 1 > MONOMIAL_CAP:
        raise BadParams(f"polynomial degree {arr.size - 1} exceeds cap {MONOMIAL_CAP}")
    return arr


def _check_positive_norm(t, name: str = "t") -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t <= 0.0):
        raise DomainError(f"{name} must be positive and finite")
    return t


def _check_cosine(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)) or np.any(np.abs(c) > 1.0 + 1e-12):
        raise DomainError("cosine argument must lie in [-1, 1]")
    return np.clip(c, -1.0, 1.0)


def radial_factor(p: PolyCoeffs, ell: int, t) -> np.ndarray:
    """r_l(t) for the polynomial with monomial coefficients p; broadcasts over t.

    Computed term-by-term in log space so the factorial ratios stay finite up
    to the degree cap. Note the terms inherit the signs of the coefficients:
    for coefficient vectors with large alternating entries (e.g. high-degree
    Hermite polynomials written in the monomial basis) the sum cancels
    catastrophically, which is inherent to this representation.
    """
    p = _as_coeffs(p)
    q = p.size - 1
    ell = int(ell)
    if not 0 <= ell <= q:
        raise DomainError(f"ell must be in [0, {q}], got {ell}")
    t = _check_positive_norm(t)
    log_t = np.log(t)
    out = np.zeros_like(t)
    half_lg_ell = 0.5 * math.lgamma(ell + 1)
    for i in range((q - ell) // 2 + 1):
        a = p[ell + 2 * i]
        if a == 0.0:
            continue
        log_mag = (
            math.log(abs(a))
            + math.lgamma(ell + 2 * i + 1)
            - i * math.log(2.0)
            - math.lgamma(i + 1)
            - half_lg_ell
        )
        out = out + math.copysign(1.0, a) * np.exp(log_mag + (2 * i + ell) * log_t)
    return out


def radial_table(p: PolyCoeffs, ell_max: int, norms) -> RadialTable:
    """Tabulate r_l(t) for l = 0..ell_max over the given norms."""
    norms = _check_positive_norm(np.atleast_1d(norms), "norms")
    values = np.stack([radial_factor(p, ell, norms) for ell in range(int(ell_max) + 1)])
    return RadialTable(values=values, norms=norms)


def dual_kernel_poly(p: PolyCoeffs, x_norm, y_norm, c) -> np.ndarray:
    """Exact dual kernel of the polynomial p at (|x|, |y|, cos angle).

    K = sum_l r_l(|x|) r_l(|y|) c^l with the cosine power built iteratively.
    Broadcasts over array arguments.
    """
    p = _as_coeffs(p)
    x_norm = _check_positive_norm(x_norm, "x_norm")
    y_norm = _check_positive_norm(y_norm, "y_norm")
    c = _check_cosine(c)
    q = p.size - 1
    out = np.zeros(np.broadcast_shapes(x_norm.shape, y_norm.shape, c.shape))
    c_pow = np.ones_like(out)
    for ell in range(q + 1):
        out = out + radial_factor(p, ell, x_norm) * radial_factor(p, ell, y_norm) * c_pow
        c_pow = c_pow * c
    return out


def _hermite_radial_log_terms(coeffs: np.ndarray, ell: int, s: np.ndarray):
    """Signed log-space terms of R_l(s); shared by the evaluators below."""
    q = coeffs.size - 1
    log_s = np.log(s)
    with np.errstate(divide="ignore"):
        log_u = np.log(np.abs(s * s - 1.0))  # -inf at s=1 is fine (term -> 0)
    sign_u = np.where(s * s >= 1.0, 1.0, -1.0)
    half_lg_ell = 0.5 * math.lgamma(ell + 1)
    total = np.zeros_like(s)
    for i in range((q - ell) // 2 + 1):
        cj = coeffs[ell + 2 * i]
        if cj == 0.0:
            continue
        log_mag = (
            math.log(abs(cj))
            + math.lgamma(ell + 2 * i + 1)
            - half_lg_ell
            - i * math.log(2.0)
            - math.lgamma(i + 1)
            + ell * log_s
        )
        if i > 0:
            log_mag = log_mag + i * log_u
            sign = math.copysign(1.0, cj) * sign_u**i
        else:
            sign = math.copysign(1.0, cj)
        total = total + sign * np.exp(log_mag)
    return total


def hermite_radial_factor(hc: HermiteCoeffs, ell: int, t) -> np.ndarray:
    """R_l(t) of the Hermite-truncated activation sum_j c_j h_j(t/nu).

    Equals radial_factor of the same polynomial written in monomials, but
    evaluated without the unstable basis change. Broadcasts over t. Stable
    for t <= nu; accuracy degrades once (t/nu)^2 - 1 exceeds ~1.
    """
    coeffs = np.asarray(hc.coeffs, dtype=float)
    q = coeffs.size - 1
    ell = int(ell)
    if not 0 <= ell <= q:
        raise DomainError(f"ell must be in [0, {q}], got {ell}")
    t = _check_positive_norm(t)
    s = t / float(hc.nu)
    return _hermite_radial_log_terms(coeffs, ell, s)


def dual_kernel_hermite(hc: HermiteCoeffs, x_norm, y_norm, c) -> np.ndarray:
    """Dual kernel of the Hermite-truncated activation at (|x|, |y|, cos angle)."""
    coeffs = np.asarray(hc.coeffs, dtype=float)
    x_norm = _check_positive_norm(x_norm, "x_norm")
    y_norm = _check_positive_norm(y_norm, "y_norm")
    c = _check_cosine(c)
    q = coeffs.size - 1
    out = np.zeros(np.broadcast_shapes(x_norm.shape, y_norm.shape, c.shape))
    c_pow = np.ones_like(out)
    sx = x_norm / float(hc.nu)
    sy = y_norm / float(hc.nu)
    for ell in range(q + 1):
        r_x = _hermite_radial_log_terms(coeffs, ell, sx)
        r_y = _hermite_radial_log_terms(coeffs, ell, sy)
        out = out + r_x * r_y * c_pow
        c_pow = c_pow * c
    return out


def hermite_dual_gram(hc: HermiteCoeffs, norms: np.ndarray, cosines: np.ndarray) -> np.ndarray:
    """Gram matrix of the truncated dual over points with given norms/cosines.

    norms has shape (n,), cosines (n, n); returns (n, n). Same kernel as
    dual_kernel_hermite, assembled with one radial table instead of n^2
    scalar evaluations.
    """
    coeffs = np.asarray(hc.coeffs, dtype=float)
    norms = _check_positive_norm(np.atleast_1d(norms), "norms")
    cosines = _check_cosine(cosines)
    if cosines.shape != (norms.size, norms.size):
        raise BadParams("cosines must be (n, n) for n norms")
    q = coeffs.size - 1
    s = norms / float(hc.nu)
    table = np.stack([_hermite_radial_log_terms(coeffs, ell, s) for ell in range(q + 1)])
    out = np.zeros_like(cosines)
    c_pow = np.ones_like(cosines)
    for ell in range(q + 1):
        out += np.outer(table[ell], table[ell]) * c_pow
        c_pow = c_pow * cosines
    return out


def hermite_tail_mass(
    sigma: Callable[[np.ndarray], np.ndarray],
    q: int,
    nu: float,
    quad_order: Optional[int] = None,
) -> float:
    """Residual Hermite mass eps = sum_{j>q} c_j^2 j! of sigma(nu*t).

    The series is summed over a finite window (up to 4q terms, capped by the
    quadrature-order limit), so the result slightly undershoots the infinite
    tail: for activations with a kink the mass beyond the window decays only
    polynomially. Unless overridden, the maximum quadrature order is used;
    the sharpness of the estimate, not the bound's validity, is at stake.
    """
    q = int(q)
    if q < 0:
        raise DomainError("q must be nonnegative")
    q_ext = min(max(4 * q, q + 1), 99)
    if q_ext <= q:
        return 0.0
    if quad_order is None:
        quad_order = DEGREE_CAP
    hc = hermite_expand(sigma, q_ext, nu, quad_order)
    tail = 0.0
    for j in range(q + 1, q_ext + 1):
        cj = hc.coeffs[j]
        if cj != 0.0:
            tail += math.exp(2.0 * math.log(abs(cj)) + math.lgamma(j + 1))
    return tail


def _check_bound_norms(nu: float, x_norm: float, y_norm: float):
    nu = float(nu)
    if not (np.isfinite(nu) and nu >= 1.0):
        raise DomainError(f"nu must be >= 1, got {nu}")
    for name, v in (("x_norm", float(x_norm)), ("y_norm", float(y_norm))):
        if not (np.isfinite(v) and 0.0 < v <= nu * (1.0 + 1e-12)):
            raise DomainError(f"{name} must lie in (0, nu], got {v} with nu={nu}")
    return nu, float(x_norm), float(y_norm)


def truncation_error_bound_general(
    sigma_norm: float, eps: float, nu: float, x_norm: float, y_norm: float
) -> float:
    """Dual-kernel error bound for any truncation with L2(N(0,nu^2)) residual eps.

    |K_sigma - K_sigma~| <= sqrt(nu^2 eps (6 |sigma|^2 + 4 eps) / (|x||y|)),
    valid whenever |sigma - sigma~|^2 <= eps under N(0, nu^2), nu >= 1, and
    both norms lie in (0, nu]. sigma_norm is the (unsquared) Gaussian L2 norm.
    """
    nu, x_norm, y_norm = _check_bound_norms(nu, x_norm, y_norm)
    eps = float(eps)
    if eps < 0 or not np.isfinite(eps):
        raise DomainError("eps must be a nonnegative residual mass")
    s2 = float(sigma_norm) ** 2
    return math.sqrt(nu**2 * eps * (6.0 * s2 + 4.0 * eps) / (x_norm * y_norm))


def truncation_error_bound_smooth(
    k: int, q: int, nu: float, sigma_norm: float, sigma_k_norm: float, x_norm: float, y_norm: float
) -> float:
    """Error bound for degree-q Hermite truncation of a k-times differentiable sigma.

    5 nu^(k+1) |sigma^(k)| max(|sigma|, nu^k |sigma^(k)|) / sqrt(|x||y| k q^(k-1)).
    Norms are Gaussian L2 norms under N(0, nu^2), unsquared.
    """
    k = int(k)
    q = int(q)
    if k < 2:
        raise DomainError("smoothness order k must be >= 2")
    if q < 1:
        raise DomainError("truncation degree q must be >= 1")
    nu, x_norm, y_norm = _check_bound_norms(nu, x_norm, y_norm)
    num = 5.0 * nu ** (k + 1) * float(sigma_k_norm) * max(float(sigma_norm), nu**k * float(sigma_k_norm))
    return num / math.sqrt(x_norm * y_norm * k * q ** (k - 1))


def truncation_error_bound_relu(q: int, nu: float, x_norm: float, y_norm: float) -> float:
    """ReLU-specific truncation bound sqrt(2 nu^6 / (q |x||y|))."""
    q = int(q)
    if q < 1:
        raise DomainError("truncation degree q must be >= 1")
    nu, x_norm, y_norm = _check_bound_norms(nu, x_norm, y_norm)
    return math.sqrt(2.0 * nu**6 / (q * x_norm * y_norm))

"""Dual activation kernels: closed forms, quadrature, and transformations.

For an activation sigma, the dual kernel is

    k_sigma(a, b, c) = E[sigma(u) sigma(v)],
    (u, v) ~ N(0, [[a^2, a b c], [a b c, b^2]]),

i.e. the one-hidden-layer infinite-width covariance between points with norms
a, b and angle cosine c. The catalog below exposes closed-form pairs
(k_sigma, k_sigma') for the standard activation zoo; everything else can be
evaluated by Gauss-Hermite quadrature (gauss_hermite_dual) or differentiated
numerically along c via

    k_sigma'(a, b, c) = (1/(a b)) * d/dc k_sigma(a, b, c)

(derivative_dual_numeric). A dual is *homogeneous* when
k(a, b, c) = a*b*kappa(c); such entries carry the scalar profile kappa.

Rectified monomials use the angular functions
J_n(theta) = (-1)^n sin(theta)^(2n+1) ((1/sin)d/dtheta)^n ((pi-theta)/sin(theta)),
computed here through the polynomial recurrence
J_n = sin(theta) A_n(cos) + (pi - theta) B_n(cos), A_{n+1} = 2n c A_n +
(1-c^2) A_n' + B_n, B_{n+1} = (2n+1) c B_n + (1-c^2) B_n'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Optional

import numpy as np
from numpy.polynomial import polynomial as _P
from scipy.special import erf as _sp_erf

from . import series
from .errors import BadParams, DomainError, NonFiniteActivation, UnknownActivation
from .hermite import gauss_hermite_rule, half_gauss_rule

__all__ = [
    "ActivationSpec",
    "DualActivation",
    "activation_lookup",
    "catalog_lookup",
    "catalog_names",
    "derivative_dual_numeric",
    "gauss_hermite_dual",
    "gauss_hermite_mean",
    "affine_dual",
    "normalize_dual",
    "abrelu_fit_normalized_gaussian",
]

_SIGMOID_SCALE = 2.4020563531719796  # erf(t/this) + 1, halved, mimics a sigmoid
_RECT_CAP = 30  # J_n coefficients grow like (2n)!!; keep them exactly representable


class ActivationSpec(NamedTuple):
    """A scalar activation and (optionally) its pointwise derivative."""

    name: str
    scalar_fn: Callable[[np.ndarray], np.ndarray]
    scalar_deriv: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True, eq=False)
class DualActivation:
    """Closed-form dual kernel pair for one activation.

    eval(a, b, c) -> E[sigma(u) sigma(v)]; deriv_eval, when available, is the
    dual kernel of sigma' (None for activations whose a.e. derivative breaks
    the d/dc identity, e.g. sign/step). kappa is set only when the dual is
    homogeneous: eval(a, b, c) = a*b*kappa(c). All callables broadcast over
    numpy arrays.
    """

    name: str
    eval: Callable
    deriv_eval: Optional[Callable]
    is_homogeneous: bool
    kappa: Optional[Callable]
    params: tuple = ()


def _check_abc(a, b, c):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise DomainError("dual kernel arguments must be finite")
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise DomainError("norms a, b must be positive")
    if np.any(np.abs(c) > 1.0 + 1e-12):
        raise DomainError("cosine c must lie in [-1, 1]")
    return a, b, np.clip(c, -1.0, 1.0)


def _finite_params(*vals):
    for v in vals:
        if not np.all(np.isfinite(np.asarray(v, dtype=float))):
            raise BadParams("activation parameters must be finite numbers")


# ---------------------------------------------------------------------------
# angular J_n machinery for rectified monomials


@lru_cache(maxsize=None)
def _j_polys(n: int):
    a_cf = (0.0,)
    b_cf = (1.0,)
    one_minus_c2 = (1.0, 0.0, -1.0)
    for m in range(n):
        da = _P.polyder(a_cf) if len(a_cf) > 1 else (0.0,)
        db = _P.polyder(b_cf) if len(b_cf) > 1 else (0.0,)
        a_next = _P.polyadd(
            _P.polyadd(_P.polymul((0.0, 2.0 * m), a_cf), _P.polymul(one_minus_c2, da)), b_cf
        )
        b_next = _P.polyadd(_P.polymul((0.0, 2.0 * m + 1.0), b_cf), _P.polymul(one_minus_c2, db))
        a_cf, b_cf = tuple(a_next), tuple(b_next)
    return np.asarray(a_cf), np.asarray(b_cf)


def _j_eval(n: int, c):
    a_cf, b_cf = _j_polys(n)
    theta = np.arccos(c)
    s = np.sqrt(np.maximum(0.0, 1.0 - c * c))
    return s * _P.polyval(c, a_cf) + (math.pi - theta) * _P.polyval(c, b_cf)


# ---------------------------------------------------------------------------
# catalog builders


def _abrelu_dual(neg: float, pos: float, name: str, params: tuple) -> DualActivation:
    # sigma(t) = neg*min(t,0) + pos*max(t,0); 1-homogeneous
    d2 = (pos - neg) ** 2
    prod = pos * neg

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return a * b * (d2 / (2.0 * math.pi) * _j_eval(1, c) + prod * c)

    def _deriv(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return d2 / (2.0 * math.pi) * _j_eval(0, c) + prod

    def _kappa(t):
        t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
        return d2 / (2.0 * math.pi) * _j_eval(1, t) + prod * t

    return DualActivation(name, _eval, _deriv, True, _kappa, params)


def _rectified_dual(n: int) -> DualActivation:
    n = int(n)
    if not 0 <= n <= _RECT_CAP:
        raise BadParams(f"rectified_monomial degree must be in [0, {_RECT_CAP}], got {n}")
    two_pi = 2.0 * math.pi

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return (a * b) ** n * _j_eval(n, c) / two_pi

    if n >= 1:
        def _deriv(a, b, c):
            a, b, c = _check_abc(a, b, c)
            return n * n * (a * b) ** (n - 1) * _j_eval(n - 1, c) / two_pi
    else:
        _deriv = None  # a.e. derivative is 0; the d/dc identity does not apply

    kappa = (lambda t: _j_eval(1, np.clip(np.asarray(t, float), -1, 1)) / two_pi) if n == 1 else None
    return DualActivation("rectified_monomial", _eval, _deriv, n == 1, kappa, (n,))


_MONOMIAL_CLOSED = {
    0: (lambda a, b, c: np.ones(np.broadcast_shapes(a.shape, b.shape, c.shape))),
    1: (lambda a, b, c: a * b * c),
    2: (lambda a, b, c: a**2 * b**2 * (2.0 * c**2 + 1.0)),
    3: (lambda a, b, c: 3.0 * a**3 * b**3 * c * (2.0 * c**2 + 3.0)),
    4: (lambda a, b, c: 3.0 * a**4 * b**4 * (8.0 * c**4 + 24.0 * c**2 + 3.0)),
    5: (lambda a, b, c: 15.0 * a**5 * b**5 * c * (8.0 * c**4 + 40.0 * c**2 + 15.0)),
}


def _monomial_raw(n: int):
    """Unvalidated monomial dual: closed form for n <= 5, radial series above."""
    if n in _MONOMIAL_CLOSED:
        return _MONOMIAL_CLOSED[n]
    unit = np.zeros(n + 1)
    unit[n] = 1.0
    return lambda a, b, c: series.dual_kernel_poly(unit, a, b, c)


def _monomial_dual(n: int) -> DualActivation:
    n = int(n)
    if not 0 <= n <= 60:
        raise BadParams(f"monomial degree must be in [0, 60], got {n}")
    body = _monomial_raw(n)

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return body(a, b, c)

    if n == 0:
        def _deriv(a, b, c):
            a, b, c = _check_abc(a, b, c)
            return np.zeros(np.broadcast_shapes(a.shape, b.shape, c.shape))
    else:
        dbody = _monomial_raw(n - 1)

        def _deriv(a, b, c):
            a, b, c = _check_abc(a, b, c)
            return float(n * n) * dbody(a, b, c)

    kappa = (lambda t: np.clip(np.asarray(t, float), -1.0, 1.0)) if n == 1 else None
    return DualActivation("monomial", _eval, _deriv, n == 1, kappa, (n,))


def _polynomial_dual(coeffs) -> DualActivation:
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.ndim != 1 or coeffs.size == 0 or not np.all(np.isfinite(coeffs)):
        raise BadParams("polynomial requires a nonempty 1-D float coefficient sequence")

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return series.dual_kernel_poly(coeffs, a, b, c)

    if coeffs.size >= 2:
        dcoeffs = coeffs[1:] * np.arange(1, coeffs.size)

        def _deriv(a, b, c):
            a, b, c = _check_abc(a, b, c)
            return series.dual_kernel_poly(dcoeffs, a, b, c)
    else:
        def _deriv(a, b, c):
            a, b, c = _check_abc(a, b, c)
            return np.zeros(np.broadcast_shapes(a.shape, b.shape, c.shape))

    return DualActivation("polynomial", _eval, _deriv, False, None, (tuple(coeffs),))


def _erf_dual() -> DualActivation:
    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return (2.0 / math.pi) * np.arcsin(2.0 * a * b * c / np.sqrt((1.0 + 2.0 * a**2) * (1.0 + 2.0 * b**2)))

    def _deriv(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return (4.0 / math.pi) / np.sqrt((1.0 + 2.0 * a**2) * (1.0 + 2.0 * b**2) - 4.0 * (a * b * c) ** 2)

    return DualActivation("erf", _eval, _deriv, False, None)


def _sinusoidal_dual(amp: float, freq: float, phase: float, name: str, params: tuple) -> DualActivation:
    # sigma(t) = amp * sin(freq*t + phase)
    _finite_params(amp, freq, phase)
    cos2p = math.cos(2.0 * phase)
    f2 = freq * freq

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        damp = np.exp(-f2 * (a**2 + b**2) / 2.0)
        return 0.5 * amp**2 * damp * (np.exp(a * b * c * f2) - cos2p * np.exp(-a * b * c * f2))

    def _deriv(a, b, c):
        a, b, c = _check_abc(a, b, c)
        damp = np.exp(-f2 * (a**2 + b**2) / 2.0)
        return 0.5 * amp**2 * f2 * damp * (np.exp(a * b * c * f2) + cos2p * np.exp(-a * b * c * f2))

    return DualActivation(name, _eval, _deriv, False, None, params)


def _gaussian_dual(aa: float) -> DualActivation:
    # sigma(t) = exp(-aa * t^2)
    _finite_params(aa)
    if aa <= 0:
        raise BadParams(f"gaussian requires a positive width parameter, got {aa}")

    def _den(a, b, c):
        return (2.0 * aa * a**2 + 1.0) * (2.0 * aa * b**2 + 1.0) - (2.0 * aa * a * b * c) ** 2

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return 1.0 / np.sqrt(_den(a, b, c))

    def _deriv(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return 4.0 * aa**2 * a * b * c / _den(a, b, c) ** 1.5

    return DualActivation("gaussian", _eval, _deriv, False, None, (aa,))


def _exponential_dual(aa: float) -> DualActivation:
    # sigma(t) = exp(aa * t)
    _finite_params(aa)

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return np.exp(0.5 * aa**2 * (a**2 + b**2 + 2.0 * a * b * c))

    def _deriv(a, b, c):
        return aa**2 * _eval(a, b, c)

    return DualActivation("exponential", _eval, _deriv, False, None, (aa,))


def _gelu_dual() -> DualActivation:
    # sigma(t) = t/2 (1 + erf(t/sqrt2)); formulas organized around
    # D = 1 + a^2 + b^2 + a^2 b^2 (1 - c^2) to avoid 0/0 at degenerate inputs
    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        ab, abc = a * b, a * b * c
        d = 1.0 + a**2 + b**2 + ab**2 * (1.0 - c**2)
        sqd = np.sqrt(d)
        out = abc / 4.0
        out = out + abc / (2.0 * math.pi) * np.arctan(abc / sqd)
        out = out + ab**2 * (c**2 + d) / (2.0 * math.pi * (1.0 + a**2) * (1.0 + b**2) * sqd)
        return out

    def _deriv(a, b, c):
        a, b, c = _check_abc(a, b, c)
        ab, abc = a * b, a * b * c
        d = 1.0 + a**2 + b**2 + ab**2 * (1.0 - c**2)
        sqd = np.sqrt(d)
        pp = (1.0 + a**2) * (1.0 + b**2)
        out = 0.25 + ((2.0 - ab**2) * abc * pp + (ab**2 - 1.0) * abc**3) / (2.0 * math.pi * pp * d * sqd)
        out = out + np.arctan(abc / sqd) / (2.0 * math.pi)
        out = out + abc / (2.0 * math.pi * sqd)
        return out

    return DualActivation("gelu", _eval, _deriv, False, None)


def _gabor_dual() -> DualActivation:
    # sigma(t) = exp(-t^2) sin(t). With rho = abc,
    # Q = (1+2a^2)(1+2b^2) - 4 rho^2 and W = a^2 + b^2 + 4 a^2 b^2 - 4 rho^2:
    #   k = sinh(rho/Q) exp(-W/(2Q)) / sqrt(Q)
    # and differentiating in rho (the d/dc rule, Q - W = 1 + a^2 + b^2):
    #   k' = exp(-W/(2Q))/sqrt(Q) [ (Q+8rho^2)/Q^2 cosh(rho/Q)
    #                               + 4 rho (Q+1+a^2+b^2)/Q^2 sinh(rho/Q) ]
    def _parts(a, b, c):
        rho = a * b * c
        q = (1.0 + 2.0 * a**2) * (1.0 + 2.0 * b**2) - 4.0 * rho**2
        w = a**2 + b**2 + 4.0 * (a * b) ** 2 - 4.0 * rho**2
        return rho, q, w

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        rho, q, w = _parts(a, b, c)
        return np.sinh(rho / q) * np.exp(-w / (2.0 * q)) / np.sqrt(q)

    def _deriv(a, b, c):
        a, b, c = _check_abc(a, b, c)
        rho, q, w = _parts(a, b, c)
        damp = np.exp(-w / (2.0 * q)) / np.sqrt(q)
        term = (q + 8.0 * rho**2) / q**2 * np.cosh(rho / q)
        term = term + 4.0 * rho * (q + 1.0 + a**2 + b**2) / q**2 * np.sinh(rho / q)
        return damp * term

    return DualActivation("gabor", _eval, _deriv, False, None)


def _normalized_gaussian_dual() -> DualActivation:
    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return a * b * np.exp(c - 1.0)

    def _deriv(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return np.exp(c - 1.0)

    return DualActivation(
        "normalized_gaussian", _eval, _deriv, True, lambda t: np.exp(np.asarray(t, float) - 1.0)
    )


def _rbf_dual(aa: float) -> DualActivation:
    # sigma(t) = sqrt2 sin(sqrt(2 aa) t + pi/4); stationary kernel exp(-aa|x-y|^2)
    _finite_params(aa)
    if aa <= 0:
        raise BadParams(f"rbf requires a positive width parameter, got {aa}")

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return np.exp(-aa * (a**2 + b**2 - 2.0 * a * b * c))

    def _deriv(a, b, c):
        return 2.0 * aa * _eval(a, b, c)

    return DualActivation("rbf", _eval, _deriv, False, None, (aa,))


def _sign_dual() -> DualActivation:
    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        return (2.0 / math.pi) * np.arcsin(c)

    # the a.e. derivative of sign is 0, but the d/dc identity would give a
    # nonzero distributional value; neither is shipped as deriv_eval
    return DualActivation("sign", _eval, None, False, None)


# ---------------------------------------------------------------------------
# scalar activation registry


def _scalar_registry(name: str, params: tuple) -> ActivationSpec:
    inv_sqrt2pi = 1.0 / math.sqrt(2.0 * math.pi)
    if name == "relu":
        return ActivationSpec("relu", lambda t: np.maximum(t, 0.0), lambda t: np.where(t > 0, 1.0, 0.0))
    if name == "abrelu":
        neg, pos = params
        return ActivationSpec(
            "abrelu",
            lambda t: neg * np.minimum(t, 0.0) + pos * np.maximum(t, 0.0),
            lambda t: np.where(t > 0, pos, neg),
        )
    if name == "leaky_relu":
        (neg,) = params
        return ActivationSpec(
            "leaky_relu",
            lambda t: neg * np.minimum(t, 0.0) + np.maximum(t, 0.0),
            lambda t: np.where(t > 0, 1.0, neg),
        )
    if name == "abs":
        return ActivationSpec("abs", np.abs, np.sign)
    if name == "rectified_monomial":
        (n,) = params
        n = int(n)
        fn = lambda t: np.where(t >= 0, t, 0.0) ** n if n else np.where(t >= 0, 1.0, 0.0)
        dfn = (lambda t: float(n) * np.where(t >= 0, t, 0.0) ** (n - 1)) if n >= 1 else None
        return ActivationSpec("rectified_monomial", fn, dfn)
    if name == "erf":
        return ActivationSpec("erf", _sp_erf, lambda t: 2.0 / math.sqrt(math.pi) * np.exp(-(t**2)))
    if name == "sin":
        return ActivationSpec("sin", np.sin, np.cos)
    if name == "cos":
        return ActivationSpec("cos", np.cos, lambda t: -np.sin(t))
    if name == "sinusoidal":
        amp, freq, phase = params
        return ActivationSpec(
            "sinusoidal",
            lambda t: amp * np.sin(freq * t + phase),
            lambda t: amp * freq * np.cos(freq * t + phase),
        )
    if name == "gaussian":
        (aa,) = params
        return ActivationSpec(
            "gaussian", lambda t: np.exp(-aa * t**2), lambda t: -2.0 * aa * t * np.exp(-aa * t**2)
        )
    if name == "exponential":
        (aa,) = params
        return ActivationSpec("exponential", lambda t: np.exp(aa * t), lambda t: aa * np.exp(aa * t))
    if name == "gelu":
        return ActivationSpec(
            "gelu",
            lambda t: 0.5 * t * (1.0 + _sp_erf(t / math.sqrt(2.0))),
            lambda t: 0.5 * (1.0 + _sp_erf(t / math.sqrt(2.0))) + t * inv_sqrt2pi * np.exp(-0.5 * t**2),
        )
    if name == "gabor":
        return ActivationSpec(
            "gabor",
            lambda t: np.exp(-(t**2)) * np.sin(t),
            lambda t: np.exp(-(t**2)) * (np.cos(t) - 2.0 * t * np.sin(t)),
        )
    if name == "monomial":
        (n,) = params
        n = int(n)
        dfn = (lambda t: float(n) * t ** (n - 1)) if n >= 1 else (lambda t: np.zeros_like(np.asarray(t, float)))
        return ActivationSpec("monomial", lambda t: np.asarray(t, float) ** n, dfn)
    if name == "polynomial":
        (coeffs,) = params
        coeffs = np.asarray(coeffs, dtype=float)
        dcoeffs = coeffs[1:] * np.arange(1, coeffs.size) if coeffs.size > 1 else np.zeros(1)
        return ActivationSpec(
            "polynomial",
            lambda t: _P.polyval(t, coeffs),
            lambda t: _P.polyval(t, dcoeffs),
        )
    if name == "rbf":
        (aa,) = params
        freq = math.sqrt(2.0 * aa)
        return ActivationSpec(
            "rbf",
            lambda t: math.sqrt(2.0) * np.sin(freq * t + math.pi / 4.0),
            lambda t: math.sqrt(2.0) * freq * np.cos(freq * t + math.pi / 4.0),
        )
    if name == "sign":
        return ActivationSpec("sign", np.sign, None)
    if name == "step":
        return ActivationSpec("step", lambda t: np.where(t >= 0, 1.0, 0.0), None)
    if name == "sigmoid_like":
        s = _SIGMOID_SCALE
        return ActivationSpec(
            "sigmoid_like",
            lambda t: 0.5 * (_sp_erf(t / s) + 1.0),
            lambda t: np.exp(-((t / s) ** 2)) / (s * math.sqrt(math.pi)),
        )
    if name == "elu":
        (alpha,) = params if params else (1.0,)
        return ActivationSpec(
            "elu",
            lambda t: np.where(t > 0, t, alpha * np.expm1(np.minimum(t, 0.0))),
            lambda t: np.where(t > 0, 1.0, alpha * np.exp(np.minimum(t, 0.0))),
        )
    if name == "normalized_gaussian":
        raise UnknownActivation(
            "normalized_gaussian is defined by its dual kernel only; no scalar activation is known"
        )
    raise UnknownActivation(f"no scalar activation named {name!r}")


# ---------------------------------------------------------------------------
# public lookups


_DEFAULT_PARAMS = {
    "leaky_relu": (0.01,),
    "gaussian": (1.0,),
    "exponential": (1.0,),
    "rbf": (1.0,),
    "sinusoidal": (1.0, 1.0, 0.0),
    "elu": (1.0,),
}

_REQUIRED_ARITY = {
    "abrelu": 2,
    "leaky_relu": 1,
    "rectified_monomial": 1,
    "monomial": 1,
    "polynomial": 1,
    "sinusoidal": 3,
    "gaussian": 1,
    "exponential": 1,
    "rbf": 1,
    "elu": 1,
}

_CATALOG = (
    "relu",
    "abrelu",
    "leaky_relu",
    "abs",
    "rectified_monomial",
    "erf",
    "sin",
    "cos",
    "sinusoidal",
    "gaussian",
    "exponential",
    "gelu",
    "gabor",
    "monomial",
    "polynomial",
    "normalized_gaussian",
    "rbf",
    "sign",
    "step",
    "sigmoid_like",
)


def catalog_names() -> tuple:
    """Names accepted by catalog_lookup."""
    return _CATALOG


def _norm_params(name: str, params) -> tuple:
    if params is None:
        params = ()
    if not isinstance(params, tuple):
        params = (params,)
    if not params and name in _DEFAULT_PARAMS:
        params = _DEFAULT_PARAMS[name]
    arity = _REQUIRED_ARITY.get(name, 0)
    if len(params) != arity:
        raise BadParams(f"{name} takes {arity} parameter(s), got {len(params)}")
    if name not in ("polynomial",):
        _finite_params(*params)
    return params


def catalog_lookup(name: str, params=()) -> DualActivation:
    """Closed-form dual kernel pair for a named activation.

    Raises UnknownActivation for names outside the catalog and BadParams for
    malformed parameters. Parameter conventions: abrelu(neg_slope, pos_slope),
    leaky_relu(neg_slope), rectified_monomial(n), monomial(n),
    polynomial(coeffs), sinusoidal(amp, freq, phase), gaussian(width),
    exponential(rate), rbf(width).
    """
    if name not in _CATALOG:
        if name == "elu":
            raise UnknownActivation(
                "elu has no closed-form dual here; use activation_lookup('elu') with quadrature"
            )
        raise UnknownActivation(f"no catalog entry named {name!r}")
    params = _norm_params(name, params)
    if name == "relu":
        d = _rectified_dual(1)
        return replace(d, name="relu", params=())
    if name == "abrelu":
        return _abrelu_dual(params[0], params[1], "abrelu", params)
    if name == "leaky_relu":
        return _abrelu_dual(params[0], 1.0, "leaky_relu", params)
    if name == "abs":
        return _abrelu_dual(-1.0, 1.0, "abs", ())
    if name == "rectified_monomial":
        return _rectified_dual(int(params[0]))
    if name == "erf":
        return _erf_dual()
    if name == "sin":
        return _sinusoidal_dual(1.0, 1.0, 0.0, "sin", ())
    if name == "cos":
        return _sinusoidal_dual(1.0, 1.0, math.pi / 2.0, "cos", ())
    if name == "sinusoidal":
        return _sinusoidal_dual(params[0], params[1], params[2], "sinusoidal", params)
    if name == "gaussian":
        return _gaussian_dual(params[0])
    if name == "exponential":
        return _exponential_dual(params[0])
    if name == "gelu":
        return _gelu_dual()
    if name == "gabor":
        return _gabor_dual()
    if name == "monomial":
        return _monomial_dual(int(params[0]))
    if name == "polynomial":
        return _polynomial_dual(params[0])
    if name == "normalized_gaussian":
        return _normalized_gaussian_dual()
    if name == "rbf":
        return _rbf_dual(params[0])
    if name == "sign":
        return _sign_dual()
    if name == "step":
        return replace(_rectified_dual(0), name="step", params=())
    if name == "sigmoid_like":
        half = 0.5
        scaled = affine_dual(_erf_dual(), lambda s: 0.0, half, 1.0 / _SIGMOID_SCALE, half)
        return replace(scaled, name="sigmoid_like", params=())
    raise UnknownActivation(f"no catalog entry named {name!r}")  # pragma: no cover


def activation_lookup(name: str, params=()) -> ActivationSpec:
    """Scalar activation (and derivative when defined) for quadrature/sampling."""
    if name != "elu" and name not in _CATALOG:
        raise UnknownActivation(f"no scalar activation named {name!r}")
    params = _norm_params(name, params)
    return _scalar_registry(name, params)


# ---------------------------------------------------------------------------
# quadrature, numeric derivative, transformations


@lru_cache(maxsize=32)
def _leggauss_cached(n: int):
    return np.polynomial.legendre.leggauss(n)


def _sector_angles(psi: float, n_per_arc: int):
    """Composite Gauss-Legendre angles/weights for [0, 2pi), split at the rays
    where cos(phi) or cos(phi - psi) changes sign."""
    two_pi = 2.0 * math.pi
    brk = sorted(
        {
            math.pi / 2.0,
            3.0 * math.pi / 2.0,
            (psi + math.pi / 2.0) % two_pi,
            (psi + 3.0 * math.pi / 2.0) % two_pi,
        }
    )
    xg, wg = _leggauss_cached(n_per_arc)
    bounds = brk + [brk[0] + two_pi]
    phi = []
    wphi = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        mid, halfw = 0.5 * (lo + hi), 0.5 * (hi - lo)
        if halfw <= 0.0:
            continue
        phi.append(mid + halfw * xg)
        wphi.append(halfw * wg)
    return np.concatenate(phi), np.concatenate(wphi)


def gauss_hermite_dual(spec, a, b, c, q: int = 40, method: str = "sector") -> float:
    """Dual kernel by Gauss quadrature of the defining bivariate expectation.

    spec may be an ActivationSpec or a bare scalar callable.

    method="sector" (default) integrates in polar coordinates: a q-node Gauss
    rule for the radial weight r*exp(-r^2) times per-sector Gauss-Legendre in
    the angle, with sector boundaries on the rays where either sigma argument
    changes sign. Activations that are smooth away from the origin (the whole
    catalog, kinked ones included) are then smooth on every sector, so the
    error decays spectrally; a plain tensor rule stalls at ~1e-2 for
    discontinuous sigma regardless of q.

    method="tensor" is that plain rule,
    (1/pi) sum_ij w_i w_j sigma(sqrt2 a x_i) sigma(sqrt2 b (c x_i + sqrt(1-c^2) x_j)),
    kept for reference and cross-checks.
    """
    q = int(q)
    if q < 2:
        raise DomainError(f"quadrature order must be >= 2, got {q}")
    a_arr, b_arr, c_arr = _check_abc(a, b, c)
    if a_arr.ndim or b_arr.ndim or c_arr.ndim:
        raise DomainError("gauss_hermite_dual takes scalar (a, b, c)")
    a, b, c = float(a_arr), float(b_arr), float(c_arr)
    fn = spec.scalar_fn if hasattr(spec, "scalar_fn") else spec
    if method == "tensor":
        rule = gauss_hermite_rule(q)
        x, w = rule.nodes, rule.weights
        s = math.sqrt(max(0.0, 1.0 - c * c))
        fu = np.asarray(fn(math.sqrt(2.0) * a * x), dtype=float)
        fv = np.asarray(fn(math.sqrt(2.0) * b * (c * x[:, None] + s * x[None, :])), dtype=float)
        if not (np.all(np.isfinite(fu)) and np.all(np.isfinite(fv))):
            raise NonFiniteActivation("activation returned non-finite values at quadrature nodes")
        return float((w * fu) @ fv @ w / math.pi)
    if method != "sector":
        raise BadParams(f"method must be 'sector' or 'tensor', got {method!r}")
    psi = math.acos(c)
    radial = half_gauss_rule(q, power=1)
    phi, wphi = _sector_angles(psi, max(32, q))
    ru = math.sqrt(2.0) * a * radial.nodes[:, None] * np.cos(phi)[None, :]
    rv = math.sqrt(2.0) * b * radial.nodes[:, None] * np.cos(phi - psi)[None, :]
    fu = np.asarray(fn(ru), dtype=float)
    fv = np.asarray(fn(rv), dtype=float)
    if not (np.all(np.isfinite(fu)) and np.all(np.isfinite(fv))):
        raise NonFiniteActivation("activation returned non-finite values at quadrature nodes")
    return float(radial.weights @ (fu * fv) @ wphi / math.pi)


def gauss_hermite_mean(fn, scale: float, q: int = 60) -> float:
    """E[sigma(scale * t)] for t ~ N(0,1), by half-range Gauss quadrature.

    The two half-lines are integrated separately so activations with a kink
    or jump at the origin converge at the same rate as smooth ones.
    """
    rule = half_gauss_rule(int(q), power=0)
    arg = math.sqrt(2.0) * float(scale) * rule.nodes
    pos = np.asarray(fn(arg), dtype=float)
    neg = np.asarray(fn(-arg), dtype=float)
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise NonFiniteActivation("activation returned non-finite values at quadrature nodes")
    return float(np.sum(rule.weights * (pos + neg)) / math.sqrt(math.pi))


def derivative_dual_numeric(k: DualActivation, a: float, b: float, c: float, h: float = 1e-5) -> float:
    """Numeric d/dc of k.eval divided by a*b (the derivative-dual identity).

    Central differences inside |c| <= 1-h, second-order one-sided stencils at
    the endpoints so evaluation never leaves [-1, 1].
    """
    h = float(h)
    if not 0.0 < h <= 1e-3:
        raise DomainError(f"step h must lie in (0, 1e-3], got {h}")
    a_arr, b_arr, c_arr = _check_abc(a, b, c)
    if a_arr.ndim or b_arr.ndim or c_arr.ndim:
        raise DomainError("derivative_dual_numeric takes scalar (a, b, c)")
    a, b, c = float(a_arr), float(b_arr), float(c_arr)

    def ev(cc: float) -> float:
        return float(k.eval(a, b, cc))

    if c >= 1.0 - h:
        d = (3.0 * ev(c) - 4.0 * ev(c - h) + ev(c - 2.0 * h)) / (2.0 * h)
    elif c <= -1.0 + h:
        d = (-3.0 * ev(c) + 4.0 * ev(c + h) - ev(c + 2.0 * h)) / (2.0 * h)
    else:
        d = (ev(c + h) - ev(c - h)) / (2.0 * h)
    return d / (a * b)


def affine_dual(k: DualActivation, mean_fn, scale: float, rate: float, shift: float) -> DualActivation:
    """Dual kernel of t -> scale * sigma(rate * t) + shift, given k = dual of sigma.

    mean_fn(s) must return E[sigma(s*t)] for t ~ N(0,1) (signed s); use
    gauss_hermite_mean when no closed form is at hand. The derivative dual
    picks up a factor scale^2 * rate^2.
    """
    _finite_params(scale, rate, shift)
    if rate == 0.0:
        raise BadParams("affine rate must be nonzero")
    r = abs(rate)

    def _eval(a, b, c):
        a, b, c = _check_abc(a, b, c)
        base = scale**2 * k.eval(r * a, r * b, c) + shift**2
        if shift != 0.0 and scale != 0.0:
            mx = np.vectorize(lambda s: float(mean_fn(s)))(rate * a)
            my = np.vectorize(lambda s: float(mean_fn(s)))(rate * b)
            base = base + scale * shift * (mx + my)
        return base

    if k.deriv_eval is not None:
        def _deriv(a, b, c):
            a, b, c = _check_abc(a, b, c)
            return scale**2 * rate**2 * k.deriv_eval(r * a, r * b, c)
    else:
        _deriv = None

    return DualActivation(f"affine({k.name})", _eval, _deriv, False, None, (scale, rate, shift))


def normalize_dual(k: DualActivation) -> DualActivation:
    """Rescale so eval(1, 1, 1) = 1, i.e. replace sigma by sigma / |sigma|_{N(0,1)}."""
    s2 = float(k.eval(1.0, 1.0, 1.0))
    if not (np.isfinite(s2) and s2 > 0.0):
        raise BadParams(f"cannot normalize {k.name}: eval(1,1,1) = {s2}")
    inv = 1.0 / s2
    ev = k.eval
    new_eval = lambda a, b, c: inv * ev(a, b, c)
    dv = k.deriv_eval
    new_deriv = (lambda a, b, c: inv * dv(a, b, c)) if dv is not None else None
    kp = k.kappa
    new_kappa = (lambda t: inv * kp(t)) if kp is not None else None
    return DualActivation(f"normalized({k.name})", new_eval, new_deriv, k.is_homogeneous, new_kappa, k.params)


def abrelu_fit_normalized_gaussian() -> tuple:
    """Slopes (neg, pos) whose abrelu profile matches exp(c-1) at c = +-1.

    kappa(1) = (pos-neg)^2/2 + neg*pos = 1 and kappa(-1) = -neg*pos = exp(-2)
    give pos - neg = sqrt(2 + 2 e^-2) and pos + neg = sqrt(2 - 2 e^-2).
    """
    diff = math.sqrt(2.0 * (1.0 + math.exp(-2.0)))
    summ = math.sqrt(2.0 * (1.0 - math.exp(-2.0)))
    return (summ - diff) / 2.0, (summ + diff) / 2.0

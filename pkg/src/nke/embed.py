"""Feature embeddings for homogeneous-dual NNGP and NTK kernels.

For a homogeneous dual with kappa expressed (or approximated) as a
polynomial with nonnegative coefficients, the depth-L kernels are
polynomials in the input cosine:

    K^(L)(x,y)     = |x||y| P(t),  P = kappa composed L times,
    Theta^(L)(x,y) = |x||y| R(t),  R = sum_h kappa^oh * prod_i kappa' o kappa^oi,

both with nonnegative coefficients. Sketching each tensor power of the unit
input with a shared PolySketch tree and concatenating the blocks

    phi(x) = |x| . (+)_j sqrt(b_j) Q^j (x/|x|)^(x)j

gives features whose inner products concentrate around the kernels, since
<phi(x), phi(y)> = |x||y| sum_j b_j <Q^j xhat^(x)j, Q^j yhat^(x)j> exactly.

One tree serves every degree: the degree-j sketch pads slots j+1..p with
the first basis vector, so sketches of different powers share all leaf and
full-subtree evaluations. That reuse makes the degree loop cost O(p log p)
tree nodes instead of O(p^2) and is the only respect in which degrees are
not independently seeded; each fixed degree matches polysketch_power on the
same tree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    BadParams,
    DegreeOverflow,
    ShapeMismatch,
    ZeroNormInput,
)
from .polysketch import polysketch_powers, polysketch_tree

__all__ = [
    "ComposedPoly",
    "EmbedConfig",
    "compose_poly",
    "ntk_poly",
    "taylor_normalized_gaussian",
    "feature_degrees",
    "embed_point",
    "embed_dataset",
]

_NEG_COEFF_TOL = -1e-14

# Rows are embedded in chunks bounded by this many float64 scratch elements,
# keeping the tree evaluation's working set far below the feature matrices.
_CHUNK_ELEMENTS = 1 << 24


@dataclass(frozen=True)
class ComposedPoly:
    """A truncated nonnegative-coefficient polynomial with its dropped mass.

    truncation_tail is the plain sum of dropped coefficients; since every
    coefficient is nonnegative and |c| <= 1, it bounds the pointwise gap to
    the untruncated polynomial on [-1, 1].
    """

    coeffs: np.ndarray
    degree: int
    truncation_tail: float

    def __call__(self, t):
        return npoly.polyval(t, self.coeffs)


def _clean_coeffs(c, what: str) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
        raise BadParams(f"{what} must be a finite 1-D coefficient vector")
    if np.any(c < _NEG_COEFF_TOL):
        raise BadParams(f"{what} has a negative coefficient: {c.min()}")
    c = np.maximum(c, 0.0)
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1] if nz.size else c[:1]


def _compose_once(outer: np.ndarray, inner: np.ndarray, cap: int) -> np.ndarray:
    """outer(inner(t)) by Horner on coefficient arrays."""
    acc = np.zeros(1)
    for coeff in outer[::-1]:
        acc = npoly.polyadd(npoly.polymul(acc, inner), [coeff])
        if acc.size - 1 > cap:
            raise DegreeOverflow(
                f"intermediate degree {acc.size - 1} exceeds the budget {cap}"
            )
    return acc


def _truncate(coeffs: np.ndarray, p_max: int, tail0: float = 0.0) -> ComposedPoly:
    if np.any(coeffs < _NEG_COEFF_TOL):
        raise BadParams(
            f"composed coefficient went negative ({coeffs.min()}); expected "
            "nonnegative inputs throughout"
        )
    coeffs = np.maximum(coeffs, 0.0)
    kept = coeffs[: p_max + 1]
    tail = float(coeffs[p_max + 1 :].sum()) + tail0
    kept = np.trim_zeros(kept, "b")
    if kept.size == 0:
        kept = np.zeros(1)
    return ComposedPoly(kept, int(kept.size - 1), tail)


def compose_poly(kappa, L: int, p_max: int) -> ComposedPoly:
    """kappa composed with itself L times, truncated to degree p_max.

    The composition is carried out in full (guarded at degree 10*p_max) and
    truncated once at the end, so the recorded tail is exactly the dropped
    coefficient mass of the true composition.
    """
    kappa = _clean_coeffs(kappa, "kappa")
    L = int(L)
    if L < 1:
        raise BadParams(f"L must be >= 1, got {L}")
    if p_max < 1:
        raise BadParams(f"p_max must be >= 1, got {p_max}")
    cap = 10 * p_max
    acc = np.array([0.0, 1.0])
    for _ in range(L):
        acc = _compose_once(kappa, acc, cap)
    return _truncate(acc, p_max)


def ntk_poly(cfg: "EmbedConfig") -> ComposedPoly:
    """The tangent-kernel polynomial R for cfg's kappa and depth.

    R(t) = sum_{h=0}^{L} kappa^oh(t) * prod_{i=h}^{L-1} kappa'(kappa^oi(t)),
    with kappa^o0(t) = t and the empty product equal to 1.
    """
    kappa = cfg.kappa_poly
    kprime = cfg.kappa_prime_poly
    L = cfg.depth
    cap = 10 * cfg.max_degree
    composed = [np.array([0.0, 1.0])]
    for _ in range(L):
        composed.append(_compose_once(kappa, composed[-1], cap))
    suffix = np.ones(1)
    total = composed[L].copy()
    for h in range(L - 1, -1, -1):
        suffix = npoly.polymul(suffix, _compose_once(kprime, composed[h], cap))
        if suffix.size - 1 > cap:
            raise DegreeOverflow(
                f"intermediate degree {suffix.size - 1} exceeds the budget {cap}"
            )
        term = npoly.polymul(composed[h], suffix)
        if term.size - 1 > cap:
            raise DegreeOverflow(
                f"intermediate degree {term.size - 1} exceeds the budget {cap}"
            )
        total = npoly.polyadd(total, term)
    return _truncate(total, cfg.max_degree)


def taylor_normalized_gaussian(q: int) -> Tuple[np.ndarray, np.ndarray]:
    """Degree-q Taylor weights of e^{t-1} and their formal derivative.

    Coefficients are 1/(e * j!); the derivative is the same sequence one
    degree shorter, e^{t-1} being its own derivative.
    """
    q = int(q)
    if q < 1:
        raise BadParams(f"q must be >= 1, got {q}")
    j = np.arange(q + 1)
    kappa = np.exp(-1.0 - np.cumsum(np.concatenate([[0.0], np.log(j[1:])])))
    return kappa, kappa[:-1].copy()


def _formal_derivative(c: np.ndarray) -> np.ndarray:
    if c.size <= 1:
        return np.zeros(1)
    return c[1:] * np.arange(1, c.size)


@dataclass(frozen=True)
class EmbedConfig:
    """Kernel polynomial, depth, and sketch sizes for the feature maps.

    kappa_prime_poly must be the formal derivative of kappa_poly; pass
    kappa_prime_poly=None to derive it.
    """

    kappa_poly: np.ndarray
    kappa_prime_poly: np.ndarray
    depth: int
    sketch_dim: int
    max_degree: int
    seed: int

    def __post_init__(self):
        kappa = _clean_coeffs(self.kappa_poly, "kappa_poly")
        derived = _formal_derivative(kappa)
        if self.kappa_prime_poly is None:
            kprime = derived
        else:
            kprime = _clean_coeffs(self.kappa_prime_poly, "kappa_prime_poly")
            a, b = np.zeros(max(kprime.size, derived.size)), np.zeros(
                max(kprime.size, derived.size)
            )
            a[: kprime.size] = kprime
            b[: derived.size] = derived
            if not np.allclose(a, b, rtol=1e-12, atol=1e-15):
                raise BadParams(
                    "kappa_prime_poly is not the formal derivative of kappa_poly"
                )
        object.__setattr__(self, "kappa_poly", kappa)
        object.__setattr__(self, "kappa_prime_poly", kprime)
        if not isinstance(self.depth, (int, np.integer)) or self.depth < 1:
            raise BadParams(f"depth must be a positive integer, got {self.depth!r}")
        if not isinstance(self.sketch_dim, (int, np.integer)) or self.sketch_dim < 1:
            raise BadParams(f"sketch_dim must be >= 1, got {self.sketch_dim!r}")
        if not isinstance(self.max_degree, (int, np.integer)) or self.max_degree < 1:
            raise BadParams(f"max_degree must be >= 1, got {self.max_degree!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise BadParams(f"seed must be a nonnegative integer, got {self.seed!r}")


def feature_degrees(cfg: EmbedConfig) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Retained tensor-power degrees for the NNGP and NTK feature blocks."""
    nngp = compose_poly(cfg.kappa_poly, cfg.depth, cfg.max_degree)
    ntk = ntk_poly(cfg)
    phi = tuple(int(j) for j in np.nonzero(nngp.coeffs)[0])
    psi = tuple(int(j) for j in np.nonzero(ntk.coeffs)[0])
    return phi, psi


def _validate_points(X) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeMismatch(f"X must be 2-D (points by features), got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise BadParams("X contains non-finite entries")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        idx = int(np.argmax(norms == 0.0))
        raise ZeroNormInput(f"row {idx} of X has zero norm")
    return X, norms


def embed_dataset(X, cfg: EmbedConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Feature matrices (Phi, Psi) with one column per row of X.

    <Phi[:, i], Phi[:, j]> approximates the depth-L NNGP kernel of rows i
    and j, and Psi likewise the NTK. Deterministic given cfg.seed.
    """
    X, norms = _validate_points(X)
    n, d = X.shape
    m = int(cfg.sketch_dim)
    nngp = compose_poly(cfg.kappa_poly, cfg.depth, cfg.max_degree)
    ntk = ntk_poly(cfg)
    deg_phi = [int(j) for j in np.nonzero(nngp.coeffs)[0]]
    deg_psi = [int(j) for j in np.nonzero(ntk.coeffs)[0]]
    needed = sorted({j for j in deg_phi + deg_psi if j >= 1})
    p_top = max(needed, default=0)

    tree = polysketch_tree(d, m, p_top, cfg.seed) if p_top >= 1 else None
    phi = np.empty((m * len(deg_phi), n))
    psi = np.empty((m * len(deg_psi), n))
    unit = np.zeros(m)
    unit[0] = 1.0

    chunk = max(1, _CHUNK_ELEMENTS // (m * max(1, 2 * p_top)))
    for start in range(0, n, chunk):
        rows = slice(start, min(n, start + chunk))
        xhat = X[rows] / norms[rows, None]
        sketches = polysketch_powers(tree, xhat, needed) if tree is not None else {}
        sketches[0] = np.broadcast_to(unit, (xhat.shape[0], m))
        for dest, degrees, poly in (
            (phi, deg_phi, nngp),
            (psi, deg_psi, ntk),
        ):
            for k, j in enumerate(degrees):
                block = math.sqrt(poly.coeffs[j]) * sketches[j] * norms[rows, None]
                dest[k * m : (k + 1) * m, rows] = block.T
    return phi, psi


def embed_point(x, cfg: EmbedConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Feature vectors (phi, psi) for a single input point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeMismatch(f"x must be a 1-D vector, got shape {x.shape}")
    phi, psi = embed_dataset(x[None, :], cfg)
    return phi[:, 0], psi[:, 0]

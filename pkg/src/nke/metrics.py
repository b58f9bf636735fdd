"""Monte Carlo dual baselines, error metrics, ridge regression, diagnostics.

The Monte Carlo estimator is the classical random-features baseline

    K_sigma(x, y) ~ (1/m) sum_s sigma(<w_s, x>) sigma(<w_s, y>),

with w_s standard Gaussian; it converges like m^(-1/2) and exists here to
be compared against the deterministic expansions. Ridge regression comes in
the two layouts the feature maps produce: a kernel matrix, solved as
(K + lambda I) alpha = Y, or a feature matrix with one column per sample,
solved in feature space as (F F^T + lambda I) w = F Y. Both factorizations
are Cholesky with jitter escalation (lambda, then 10 lambda, then 100
lambda) before giving up, and the effective regularizer actually used is
part of the result.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .duals import ActivationSpec
from .errors import (
    BadParams,
    NonFiniteActivation,
    NotSymmetric,
    ShapeMismatch,
    SingularSystem,
    ZeroDenominator,
)
from .fc_kernels import KernelMatrix

__all__ = [
    "RidgeResult",
    "lambda_grid",
    "monte_carlo_dual",
    "relative_frobenius_error",
    "ridge_regress",
    "statistical_dimension",
]


def _entries(k) -> np.ndarray:
    if isinstance(k, KernelMatrix):
        return np.asarray(k.entries, dtype=float)
    return np.asarray(k, dtype=float)


def lambda_grid() -> np.ndarray:
    """Twenty log-spaced ridge parameters, 1e-10 up to 1e+2."""
    return 10.0 ** (-10.0 + 12.0 * np.arange(20) / 19.0)


def monte_carlo_dual(
    spec: Union[ActivationSpec, Callable], X, m_samples: int, seed: int = 0
) -> KernelMatrix:
    """Random-features estimate of the dual kernel Gram matrix of X's rows.

    spec may be an ActivationSpec or a bare scalar callable. Deterministic
    given the seed; the estimate is unbiased with variance O(1/m_samples).
    """
    fn = spec.scalar_fn if isinstance(spec, ActivationSpec) else spec
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or min(X.shape) < 1:
        raise ShapeMismatch(f"X must be 2-D (points by features), got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise BadParams("X contains non-finite entries")
    if not isinstance(m_samples, (int, np.integer)) or m_samples < 1:
        raise BadParams(f"m_samples must be a positive integer, got {m_samples!r}")
    n, d = X.shape
    w = np.random.default_rng(seed).standard_normal((int(m_samples), d))
    feats = np.asarray(fn(X @ w.T), dtype=float)
    if feats.shape != (n, int(m_samples)):
        raise NonFiniteActivation(
            f"activation changed the sample shape: got {feats.shape}"
        )
    if not np.all(np.isfinite(feats)):
        raise NonFiniteActivation("activation produced non-finite sample values")
    gram = feats @ feats.T / float(m_samples)
    return KernelMatrix(n, 0.5 * (gram + gram.T))


def relative_frobenius_error(approx, exact) -> float:
    """||approx - exact||_F / ||exact||_F."""
    a = _entries(approx)
    e = _entries(exact)
    if a.shape != e.shape:
        raise ShapeMismatch(f"matrix shapes differ: {a.shape} vs {e.shape}")
    denom = float(np.linalg.norm(e))
    if denom == 0.0:
        raise ZeroDenominator("exact matrix has zero Frobenius norm")
    return float(np.linalg.norm(a - e) / denom)


def statistical_dimension(K, lam: float) -> float:
    """tr(K (K + lambda I)^(-1)) through the spectrum of a symmetric PSD K.

    Small negative eigenvalues (factorization noise) are clamped to zero,
    so the result is the PSD projection's statistical dimension.
    """
    k = _entries(K)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ShapeMismatch(f"K must be square, got shape {k.shape}")
    scale = max(1.0, float(np.abs(k).max()) if k.size else 0.0)
    if not np.allclose(k, k.T, rtol=1e-8, atol=1e-8 * scale):
        raise NotSymmetric("K is not symmetric within tolerance")
    if not (np.isfinite(lam) and lam > 0.0):
        raise BadParams(f"lambda must be positive and finite, got {lam!r}")
    eigs = np.linalg.eigvalsh(0.5 * (k + k.T))
    eigs = np.maximum(eigs, 0.0)
    return float(np.sum(eigs / (eigs + lam)))


class RidgeResult(NamedTuple):
    """Per-lambda test predictions with the held-out model selection."""

    lambdas: Tuple[float, ...]
    predictions: Tuple[np.ndarray, ...]
    scores: np.ndarray
    best_lambda: float
    best_index: int
    effective_lambdas: np.ndarray


def _check_labels(labels, rows: int, name: str) -> np.ndarray:
    y = np.asarray(labels, dtype=float)
    if y.ndim not in (1, 2) or y.shape[0] != rows:
        raise ShapeMismatch(
            f"{name} must have {rows} rows, got shape {y.shape}"
        )
    if not np.all(np.isfinite(y)):
        raise BadParams(f"{name} contains non-finite entries")
    return y


def _solve_spd(sys_matrix: np.ndarray, rhs: np.ndarray, lam: float):
    """Cholesky solve of (sys + eff I) x = rhs with jitter escalation."""
    eye = np.eye(sys_matrix.shape[0])
    for eff in (lam, 10.0 * lam, 100.0 * lam):
        try:
            factor = cho_factor(sys_matrix + eff * eye, lower=True)
        except np.linalg.LinAlgError:
            continue
        return cho_solve(factor, rhs), eff
    raise SingularSystem(
        f"system not positive definite even with jitter 100*lambda = {100 * lam:g}"
    )


def _score(pred: np.ndarray, truth: np.ndarray) -> float:
    if truth.ndim == 2 and truth.shape[1] > 1:
        return float(np.mean(np.argmax(pred, axis=1) == np.argmax(truth, axis=1)))
    return -float(np.mean((pred - truth) ** 2))


def ridge_regress(
    train,
    test,
    train_labels,
    test_labels,
    lambdas: Sequence[float],
    mode: str = "kernel",
) -> RidgeResult:
    """Ridge regression over a lambda grid with held-out selection.

    Kernel mode: train is the n x n training Gram matrix and test the
    n_test x n cross matrix; solves (K + lambda I) alpha = Y. Feature mode:
    train and test hold one column per sample (the embed layout); solves
    (F F^T + lambda I) w = F Y in feature space. One-hot labels (2-D, more
    than one column) are scored by argmax accuracy, anything else by
    negative mean squared error, and best_lambda maximizes the test score.
    """
    if mode not in ("kernel", "feature"):
        raise BadParams(f"mode must be 'kernel' or 'feature', got {mode!r}")
    lams = [float(v) for v in np.atleast_1d(np.asarray(lambdas, dtype=float))]
    if not lams:
        raise BadParams("lambdas must be a nonempty sequence")
    if any(not np.isfinite(v) or v <= 0.0 for v in lams):
        raise BadParams("every lambda must be positive and finite")
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float)
    if train.ndim != 2 or test.ndim != 2:
        raise ShapeMismatch("train and test must be 2-D arrays")

    if mode == "kernel":
        if train.shape[0] != train.shape[1]:
            raise ShapeMismatch(f"training kernel must be square, got {train.shape}")
        if test.shape[1] != train.shape[0]:
            raise ShapeMismatch(
                f"test kernel needs {train.shape[0]} columns, got {test.shape[1]}"
            )
        n_train = train.shape[0]
        sys_matrix = 0.5 * (train + train.T)
    else:
        if test.shape[0] != train.shape[0]:
            raise ShapeMismatch(
                f"feature dimensions differ: {train.shape[0]} vs {test.shape[0]}"
            )
        n_train = train.shape[1]
        sys_matrix = train @ train.T

    y_train = _check_labels(train_labels, n_train, "train_labels")
    y_test = _check_labels(test_labels, test.shape[1] if mode == "feature" else test.shape[0], "test_labels")

    rhs = y_train if mode == "kernel" else train @ y_train
    predictions = []
    scores = np.empty(len(lams))
    effective = np.empty(len(lams))
    for i, lam in enumerate(lams):
        coeff, eff = _solve_spd(sys_matrix, rhs, lam)
        pred = test @ coeff if mode == "kernel" else test.T @ coeff
        predictions.append(pred)
        scores[i] = _score(pred, y_test)
        effective[i] = eff
    best = int(np.argmax(scores))
    return RidgeResult(
        tuple(lams), tuple(predictions), scores, lams[best], best, effective
    )

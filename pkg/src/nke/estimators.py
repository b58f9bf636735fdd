"""Scikit-learn style wrappers around the kernel and feature-map routines.

NtkRidgeClassifier fits one-vs-rest ridge on the exact NTK Gram matrix or
on sketched NTK features, selecting nothing by itself: the regularizer is
a plain constructor parameter so the usual model-selection tools
(GridSearchCV and friends) compose with it. NtkFeatures is a stateless
transformer producing the sketched feature rows, handy inside pipelines.
Both follow the estimator protocol (get_params/set_params, fitted
attributes with trailing underscores), so cloning and cross-validation
work unchanged.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .duals import catalog_lookup
from .embed import EmbedConfig, embed_dataset, taylor_normalized_gaussian
from .errors import BadParams
from .fc_kernels import KernelConfig, kernel_matrix
from .metrics import _solve_spd

__all__ = ["NtkRidgeClassifier", "NtkFeatures"]


def _one_hot(y, classes: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(classes, y)
    onehot = np.zeros((len(y), classes.size))
    onehot[np.arange(len(y)), idx] = 1.0
    return onehot


def _embed_config(activation, degree, depth, sketch_dim, max_degree, seed) -> EmbedConfig:
    if activation != "normalized_gaussian":
        raise BadParams(
            f"embedding supports activation='normalized_gaussian', got {activation!r}"
        )
    kappa, kappa_prime = taylor_normalized_gaussian(
        max_degree if degree is None else degree
    )
    return EmbedConfig(kappa, kappa_prime, depth, sketch_dim, max_degree, seed)


class NtkRidgeClassifier(ClassifierMixin, BaseEstimator):
    """Ridge classifier on the depth-L NTK, exact or sketched.

    mode="exact" solves (K + lam I) alpha = Y on the training Gram matrix
    and needs the training set at prediction time; mode="embed" solves the
    feature-space system (F F^T + lam I) w = F Y with sketched features of
    dimension controlled by sketch_dim, so prediction only multiplies new
    features with w.
    """

    def __init__(
        self,
        activation: str = "normalized_gaussian",
        activation_params: tuple = (),
        depth: int = 2,
        lam: float = 1e-3,
        mode: str = "exact",
        which: str = "ntk",
        sketch_dim: int = 1024,
        max_degree: int = 8,
        degree: Optional[int] = None,
        seed: int = 0,
    ):
        self.activation = activation
        self.activation_params = activation_params
        self.depth = depth
        self.lam = lam
        self.mode = mode
        self.which = which
        self.sketch_dim = sketch_dim
        self.max_degree = max_degree
        self.degree = degree
        self.seed = seed

    def _validate(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise BadParams(f"X must be 2-D, got shape {X.shape}")
        if self.mode not in ("exact", "embed"):
            raise BadParams(f"mode must be 'exact' or 'embed', got {self.mode!r}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise BadParams(f"lam must be positive, got {self.lam!r}")
        if y is None:
            return X
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise BadParams(
                f"y must be 1-D with {X.shape[0]} entries, got shape {y.shape}"
            )
        return X, y

    def fit(self, X, y):
        X, y = self._validate(X, y)
        self.classes_ = np.unique(y)
        targets = _one_hot(y, self.classes_)
        if self.mode == "exact":
            dual = catalog_lookup(self.activation, tuple(self.activation_params))
            self._cfg_ = KernelConfig(self.depth, dual)
            self.X_train_ = X
            gram = kernel_matrix(X, self._cfg_, self.which).entries
            self.coef_, self.effective_lam_ = _solve_spd(gram, targets, float(self.lam))
        else:
            self._cfg_ = _embed_config(
                self.activation, self.degree, self.depth,
                self.sketch_dim, self.max_degree, self.seed,
            )
            self.input_dim_ = X.shape[1]
            feats = self._features(X)
            self.coef_, self.effective_lam_ = _solve_spd(
                feats @ feats.T, feats @ targets, float(self.lam)
            )
        return self

    def _features(self, X) -> np.ndarray:
        phi, psi = embed_dataset(X, self._cfg_)
        return psi if self.which == "ntk" else phi

    def decision_function(self, X) -> np.ndarray:
        if not hasattr(self, "coef_"):
            raise NotFittedError("fit must be called before predict")
        X = self._validate(X)
        if self.mode == "exact":
            stacked = np.vstack([self.X_train_, X])
            gram = kernel_matrix(stacked, self._cfg_, self.which).entries
            cross = gram[self.X_train_.shape[0]:, : self.X_train_.shape[0]]
            return cross @ self.coef_
        if X.shape[1] != self.input_dim_:
            raise BadParams(
                f"X has {X.shape[1]} features, the fit used {self.input_dim_}"
            )
        return self._features(X).T @ self.coef_

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


class NtkFeatures(TransformerMixin, BaseEstimator):
    """Transformer producing sketched NTK (or NNGP) feature rows.

    The map is fixed by the constructor arguments and the seed; fit only
    records the input dimension, and transform returns an (n, feature_dim)
    array whose inner products approximate the kernel.
    """

    def __init__(
        self,
        depth: int = 2,
        sketch_dim: int = 1024,
        max_degree: int = 8,
        degree: Optional[int] = None,
        which: str = "ntk",
        seed: int = 0,
    ):
        self.depth = depth
        self.sketch_dim = sketch_dim
        self.max_degree = max_degree
        self.degree = degree
        self.which = which
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise BadParams(f"X must be 2-D, got shape {X.shape}")
        self.cfg_ = _embed_config(
            "normalized_gaussian", self.degree, self.depth,
            self.sketch_dim, self.max_degree, self.seed,
        )
        self.input_dim_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "cfg_"):
            raise NotFittedError("fit must be called before transform")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim_:
            raise BadParams(
                f"X must be 2-D with {self.input_dim_} features, got shape {X.shape}"
            )
        phi, psi = embed_dataset(X, self.cfg_)
        return (psi if self.which == "ntk" else phi).T

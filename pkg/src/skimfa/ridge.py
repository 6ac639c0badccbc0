"""Kernel ridge regression and the explicit weight-space oracle.

``solve`` factors the regularized Gram system (K + sigma_noise^2 I) alpha = Y
once and keeps the training rows, so prediction is a cross-Gram product with
alpha.  ``WeightSpaceModel`` solves the same problem in the explicit
tensor-product feature expansion; the two must agree, which certifies the
kernel/Bayesian duality numerically.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import FeatureLibrary
from .kernel import SkimHyperParams, gram_matrix

__all__ = ["FittedModel", "solve", "predict", "WeightSpaceModel", "solve_linear_system"]


def _factor_regularized(K: np.ndarray, lam: float):
    """Cholesky factor of K + lam * I with a single jitter retry.

    Gram matrices are often numerically semidefinite; one jitter of
    1e-10 * trace / N is added (with a warning) before giving up.
    """
    n = K.shape[0]
    S = K + lam * np.eye(n)
    try:
        return scipy.linalg.cho_factor(S)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * np.trace(K) / max(n, 1)
    warnings.warn(
        f"Gram factorization failed at lambda={lam:.3e}; retrying with "
        f"jitter {jitter:.3e} on the diagonal",
        RuntimeWarning,
        stacklevel=3,
    )
    try:
        return scipy.linalg.cho_factor(S + jitter * np.eye(n))
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            "singular ridge system; use a positive sigma_noise so that the "
            "regularizer sigma_noise**2 makes the system definite"
        ) from err


def solve_linear_system(K: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (K + lam * I) alpha = Y for a symmetric PSD kernel matrix."""
    K = np.asarray(K, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return scipy.linalg.cho_solve(_factor_regularized(K, lam), Y)


@dataclass
class FittedModel:
    """Ridge weights plus everything needed to evaluate the fit.

    ``alpha`` solves (K + sigma_noise^2 I) alpha = Y on the training rows.
    The training covariates are retained because prediction and effect
    extraction are kernel sums over them.
    """

    alpha: np.ndarray
    train_X: np.ndarray
    hp: SkimHyperParams
    lib: FeatureLibrary
    Q: int

    @property
    def num_train(self) -> int:
        return self.alpha.size

    def to_json_dict(self) -> dict:
        return {
            "q": int(self.Q),
            "alpha": self.alpha.tolist(),
            "train_x": self.train_X.tolist(),
            "hyperparams": {
                "kappa": self.hp.kappa.tolist(),
                "eta": self.hp.eta.tolist(),
                "sigma_noise": float(self.hp.sigma_noise),
                "trunc_level": float(self.hp.trunc_level),
                "raw": self.hp.raw.tolist(),
            },
            "library": self.lib.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "FittedModel":
        hp = payload["hyperparams"]
        return cls(
            alpha=np.asarray(payload["alpha"], dtype=float),
            train_X=np.asarray(payload["train_x"], dtype=float),
            hp=SkimHyperParams(
                kappa=np.asarray(hp["kappa"], dtype=float),
                eta=np.asarray(hp["eta"], dtype=float),
                sigma_noise=hp["sigma_noise"],
                trunc_level=hp["trunc_level"],
                raw=np.asarray(hp["raw"], dtype=float),
            ),
            lib=FeatureLibrary.from_json_dict(payload["library"]),
            Q=int(payload["q"]),
        )


def solve(lib: FeatureLibrary, hp: SkimHyperParams, X, Y, Q: int) -> FittedModel:
    """Fit kernel ridge regression with regularizer sigma_noise**2.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the system stays singular after one jitter retry, which at
        sigma_noise = 0 means the Gram matrix itself is singular.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if X.shape[0] != Y.size:
        raise ValueError(f"got {X.shape[0]} rows of X but {Y.size} responses")
    if not np.all(np.isfinite(Y)):
        raise ValueError("responses must be finite")
    K = gram_matrix(lib, hp, X, X, Q)
    alpha = solve_linear_system(K, Y, hp.sigma_noise**2)
    return FittedModel(alpha=alpha, train_X=X, hp=hp, lib=lib, Q=Q)


def predict(model: FittedModel, X_new) -> np.ndarray:
    """Evaluate the fitted function: cross-Gram against training rows times alpha."""
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim == 1:
        X_new = X_new[None, :]
    K_star = gram_matrix(model.lib, model.hp, X_new, model.train_X, model.Q)
    return K_star @ model.alpha


class WeightSpaceModel:
    """Ridge regression in the explicit tensor-product feature expansion.

    For every subset V with |V| <= Q and theta_V > 0, the design contains the
    outer products of the covariates' standardized features, scaled by
    sqrt(theta_V).  Plain ridge with penalty sigma_noise**2 on these columns
    is then exactly the subset-weighted penalty sum_V ||Theta_V||^2 / theta_V,
    with theta_V = 0 subsets pinned to zero, so predictions must coincide
    with the kernel-space fit.  Test oracle; feasible for small total feature
    counts only.
    """

    def __init__(self, lib: FeatureLibrary, hp: SkimHyperParams, X, Y, Q: int):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float).ravel()
        p = lib.num_covariates
        self.lib = lib
        self.hp = hp
        self.Q = Q
        self._blocks = []  # (subset, scale)
        for q in range(0, Q + 1):
            for subset in itertools.combinations(range(p), q):
                theta = hp.theta(subset)
                if theta > 0.0:
                    self._blocks.append((subset, np.sqrt(theta)))
        Z = self._design(X)
        lam = hp.sigma_noise**2
        if lam == 0.0:
            self.weights, *_ = np.linalg.lstsq(Z, Y, rcond=None)
        else:
            G = Z.T @ Z + lam * np.eye(Z.shape[1])
            self.weights = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), Z.T @ Y)

    @property
    def feature_dim(self) -> int:
        dim = 0
        sizes = self.lib.basis_sizes
        for subset, _ in self._blocks:
            d = 1
            for i in subset:
                d *= sizes[i]
            dim += d
        return dim

    def _design(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        cols = []
        for subset, scale in self._blocks:
            if not subset:
                cols.append(scale * np.ones((n, 1)))
                continue
            blocks = [self.lib.feature_block(i, X[:, i]) for i in subset]
            prod = blocks[0]
            for blk in blocks[1:]:
                prod = (prod[:, :, None] * blk[:, None, :]).reshape(n, -1)
            cols.append(scale * prod)
        return np.hstack(cols)

    def predict(self, X_new) -> np.ndarray:
        X_new = np.asarray(X_new, dtype=float)
        if X_new.ndim == 1:
            X_new = X_new[None, :]
        return self._design(X_new) @ self.weights

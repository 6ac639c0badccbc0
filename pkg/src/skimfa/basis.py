"""Per-covariate basis construction and zero-mean one-dimensional kernels.

Each covariate gets a finite, linearly independent set of basis functions
``phi_{i1}, ..., phi_{iB_i}``.  On the training sample every function is
standardized to empirical mean zero and variance one, and the standardized
feature map ``Phi_i`` induces the one-dimensional kernel

    k_i(x, y) = Phi_i(x) . Phi_i(y),

whose sections average to zero over the training column.  Downstream modules
rely on this zero-mean property: it is what makes the tensor-product kernels
reproduce mutually orthogonal effect spaces under the product measure.

Standardization constants are frozen at construction time and applied
identically to new data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "BasisError",
    "SplineSpec",
    "PolynomialSpec",
    "OneHotSpec",
    "BasisSpec",
    "FeatureLibrary",
    "build_library",
    "eval_k1",
]


class BasisError(ValueError):
    """Raised for degenerate basis constructions (zero variance, rank loss)."""


@dataclass(frozen=True)
class SplineSpec:
    """Natural cubic spline basis with knots at empirical quantiles.

    ``num_knots`` distinct knots produce ``num_knots - 1`` basis functions
    (the identity plus truncated-cubic differences).  The basis is linear
    beyond the boundary knots.
    """

    num_knots: int = 5

    def __post_init__(self) -> None:
        if self.num_knots < 2:
            raise BasisError(f"spline needs num_knots >= 2, got {self.num_knots}")


@dataclass(frozen=True)
class PolynomialSpec:
    """Monomial basis x, x^2, ..., x^degree."""

    degree: int = 3

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise BasisError(f"polynomial needs degree >= 1, got {self.degree}")


@dataclass(frozen=True)
class OneHotSpec:
    """Indicator basis over the distinct values of a categorical column.

    No category is dropped; each indicator is centered by standardization.
    """


BasisSpec = Union[SplineSpec, PolynomialSpec, OneHotSpec]


class _NaturalSplineBasis:
    """Raw natural cubic spline features for a fixed ascending knot vector."""

    kind = "natural-cubic-spline"

    def __init__(self, knots: np.ndarray):
        self.knots = np.asarray(knots, dtype=float)

    @property
    def size(self) -> int:
        return len(self.knots) - 1

    def raw(self, values: np.ndarray) -> np.ndarray:
        x = np.asarray(values, dtype=float).ravel()
        out = np.empty((x.size, self.size))
        out[:, 0] = x
        if self.size > 1:
            knots = self.knots
            t = np.maximum(x[:, None] - knots[None, :], 0.0) ** 3
            # d_k(x) = [(x - k_k)_+^3 - (x - k_last)_+^3] / (k_last - k_k)
            d = (t[:, :-1] - t[:, -1:]) / (knots[-1] - knots[:-1])
            out[:, 1:] = d[:, :-1] - d[:, -1:]
        return out

    def params(self) -> dict:
        return {"knots": self.knots.tolist()}


class _PolynomialBasis:
    kind = "polynomial"

    def __init__(self, degree: int):
        self.degree = int(degree)

    @property
    def size(self) -> int:
        return self.degree

    def raw(self, values: np.ndarray) -> np.ndarray:
        x = np.asarray(values, dtype=float).ravel()
        return x[:, None] ** np.arange(1, self.degree + 1)

    def params(self) -> dict:
        return {"degree": self.degree}


class _OneHotBasis:
    kind = "one-hot"

    def __init__(self, categories: np.ndarray):
        self.categories = np.asarray(categories, dtype=float)

    @property
    def size(self) -> int:
        return len(self.categories)

    def raw(self, values: np.ndarray) -> np.ndarray:
        x = np.asarray(values, dtype=float).ravel()
        return (x[:, None] == self.categories[None, :]).astype(float)

    def params(self) -> dict:
        return {"categories": self.categories.tolist()}


@dataclass
class FeatureLibrary:
    """Standardized per-covariate feature maps and their induced 1-D kernels.

    Attributes
    ----------
    bases : list
        Fitted raw basis per covariate (spline / polynomial / one-hot).
    means, stds : list of ndarray
        Per-feature empirical standardization constants, frozen at build time.
        Variances are the biased (1/N) kind.
    """

    bases: list
    means: list
    stds: list

    @property
    def num_covariates(self) -> int:
        return len(self.bases)

    @property
    def basis_sizes(self) -> list:
        return [b.size for b in self.bases]

    @property
    def feature_dim(self) -> int:
        return sum(self.basis_sizes)

    def column_groups(self) -> list:
        """Column slice of each covariate inside the stacked feature matrix."""
        groups, start = [], 0
        for b in self.bases:
            groups.append(slice(start, start + b.size))
            start += b.size
        return groups

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.num_covariates:
            raise IndexError(f"covariate index {i} out of range [0, {self.num_covariates})")

    def raw_block(self, i: int, values) -> np.ndarray:
        self._check_index(i)
        return self.bases[i].raw(values)

    def feature_block(self, i: int, values) -> np.ndarray:
        """Standardized features of covariate ``i`` at ``values``, shape (n, B_i)."""
        self._check_index(i)
        return (self.bases[i].raw(values) - self.means[i]) / self.stds[i]

    def feature_matrix(self, X: np.ndarray) -> np.ndarray:
        """Stacked standardized features for all covariates, shape (n, sum B_i)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.num_covariates:
            raise ValueError(
                f"expected (n, {self.num_covariates}) covariate matrix, got {X.shape}"
            )
        return np.hstack([self.feature_block(i, X[:, i]) for i in range(self.num_covariates)])

    def gram_1d(self, i: int, a_values, b_values) -> np.ndarray:
        """Cross Gram matrix of the 1-D kernel k_i, shape (len(a), len(b))."""
        return self.feature_block(i, a_values) @ self.feature_block(i, b_values).T

    def eval_k1(self, i: int, x_i: float, y_i: float) -> float:
        """One-dimensional kernel value k_i(x_i, y_i)."""
        return float(self.gram_1d(i, [x_i], [y_i])[0, 0])

    def k1_vector(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """All p one-dimensional kernel values between two full covariate rows."""
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.size != self.num_covariates or y.size != self.num_covariates:
            raise ValueError(
                f"expected rows of length {self.num_covariates}, "
                f"got {x.size} and {y.size}"
            )
        out = np.empty(self.num_covariates)
        for i in range(self.num_covariates):
            fa = (self.bases[i].raw(x[i : i + 1]) - self.means[i]) / self.stds[i]
            fb = (self.bases[i].raw(y[i : i + 1]) - self.means[i]) / self.stds[i]
            out[i] = fa[0] @ fb[0]
        return out

    def to_json(self) -> str:
        """Serialize to JSON with exact float round trip."""
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def to_json_dict(self) -> dict:
        cov = []
        for b, m, s in zip(self.bases, self.means, self.stds):
            entry = {"kind": b.kind, "means": m.tolist(), "stds": s.tolist()}
            entry.update(b.params())
            cov.append(entry)
        return {"covariates": cov}

    @classmethod
    def from_json(cls, text: str) -> "FeatureLibrary":
        return cls.from_json_dict(json.loads(text))

    @classmethod
    def from_json_dict(cls, payload: dict) -> "FeatureLibrary":
        bases, means, stds = [], [], []
        for entry in payload["covariates"]:
            kind = entry["kind"]
            if kind == "natural-cubic-spline":
                bases.append(_NaturalSplineBasis(np.asarray(entry["knots"], dtype=float)))
            elif kind == "polynomial":
                bases.append(_PolynomialBasis(entry["degree"]))
            elif kind == "one-hot":
                bases.append(_OneHotBasis(np.asarray(entry["categories"], dtype=float)))
            else:
                raise BasisError(f"unknown basis kind {kind!r}")
            means.append(np.asarray(entry["means"], dtype=float))
            stds.append(np.asarray(entry["stds"], dtype=float))
        return cls(bases=bases, means=means, stds=stds)


def _resolve_specs(p: int, spec) -> list:
    if spec is None:
        return [SplineSpec()] * p
    if isinstance(spec, (SplineSpec, PolynomialSpec, OneHotSpec)):
        return [spec] * p
    specs = list(spec)
    if len(specs) != p:
        raise ValueError(f"got {len(specs)} basis specs for {p} covariates")
    return specs


def _fit_raw_basis(col: np.ndarray, spec, i: int):
    if isinstance(spec, SplineSpec):
        if np.ptp(col) == 0.0:
            raise BasisError(f"zero variance: covariate {i} is constant")
        knots = np.unique(np.quantile(col, np.linspace(0.0, 1.0, spec.num_knots)))
        if len(knots) < 2:
            raise BasisError(
                f"covariate {i}: fewer than 2 distinct quantile knots "
                f"(requested {spec.num_knots})"
            )
        return _NaturalSplineBasis(knots)
    if isinstance(spec, PolynomialSpec):
        if np.ptp(col) == 0.0:
            raise BasisError(f"zero variance: covariate {i} is constant")
        return _PolynomialBasis(spec.degree)
    if isinstance(spec, OneHotSpec):
        return _OneHotBasis(np.unique(col))
    raise TypeError(f"unknown basis spec {spec!r}")


def build_library(X: np.ndarray, spec=None) -> FeatureLibrary:
    """Build a standardized feature library from training covariates.

    Parameters
    ----------
    X : ndarray, shape (N, p)
        Training covariates, N >= 2.
    spec : BasisSpec or sequence of BasisSpec, optional
        Basis choice, either shared by all covariates or given per covariate.
        Defaults to a natural cubic spline with 5 quantile knots.

    Returns
    -------
    FeatureLibrary

    Raises
    ------
    BasisError
        If a raw feature has zero empirical variance or a covariate's raw
        design block is rank deficient on the training sample.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected 2-D covariate matrix, got shape {X.shape}")
    n, p = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 training rows, got {n}")
    specs = _resolve_specs(p, spec)

    bases, means, stds = [], [], []
    for i in range(p):
        basis = _fit_raw_basis(X[:, i], specs[i], i)
        block = basis.raw(X[:, i])
        m = block.mean(axis=0)
        # Biased variance: mean(phi^2) - mean(phi)^2.
        var = block.var(axis=0)
        for b, v in enumerate(var):
            if v == 0.0 or not np.isfinite(v):
                raise BasisError(f"zero variance: covariate {i}, basis function {b}")
        if np.linalg.matrix_rank(block) < basis.size:
            raise BasisError(
                f"rank deficient design block for covariate {i}: "
                f"{basis.size} basis functions on {n} rows"
            )
        bases.append(basis)
        means.append(m)
        stds.append(np.sqrt(var))
    return FeatureLibrary(bases=bases, means=means, stds=stds)


def eval_k1(lib: FeatureLibrary, i: int, x_i: float, y_i: float) -> float:
    """One-dimensional zero-mean kernel of covariate ``i`` at two scalars."""
    return lib.eval_k1(i, x_i, y_i)

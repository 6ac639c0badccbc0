"""Functional ANOVA reporting: selection, effects, measures, variance shares.

A fitted kernel model decomposes exactly into orthogonal effects under the
product of the empirical covariate marginals: the effect of subset V is

    f_V(x_V) = theta_V * sum_n alpha_n * prod_{i in V} k_i(x_i^{(n)}, x_i),

and the intercept is eta_0^2 * sum_n alpha_n.  Summing the intercept and all
effects reproduces the model prediction pointwise.

When covariates are dependent, the product-measure decomposition can be
misleading, so ``change_basis`` re-expresses a pairwise (Q = 2) decomposition
with respect to an arbitrary row measure: each pair effect is regressed onto
the additive span {1, Phi_i, Phi_j} on a Monte Carlo sample from that
measure, the fitted additive shadow moves into the main effects and
intercept, and the sum identity is preserved exactly.

``empirical_product_anova`` applies the same style of reporting to an
arbitrary black-box predictor by pinning columns of a reference data matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .kernel import SkimHyperParams
from .ridge import FittedModel

__all__ = [
    "AnovaDecomposition",
    "ChangeOfBasisCoefficients",
    "VarianceSummary",
    "select",
    "extract_effect",
    "decompose",
    "variance_decomposition",
    "change_basis",
    "empirical_product_anova",
    "empirical_joint_sampler",
    "empirical_product_sampler",
]

_CHUNK_TARGET = 2_000_000


def select(hp: SkimHyperParams) -> Tuple[int, ...]:
    """Indices (0-based) of covariates with kappa_i != 0, ascending."""
    return tuple(int(i) for i in np.nonzero(hp.kappa)[0])


def _as_subset_values(values, size: int) -> np.ndarray:
    vals = np.asarray(values, dtype=float)
    if size == 1:
        return vals.reshape(-1, 1)
    if vals.ndim != 2 or vals.shape[1] != size:
        raise ValueError(f"expected values of shape (m, {size}), got {vals.shape}")
    return vals


def _zero_effect(size: int) -> Callable:
    def effect(values) -> np.ndarray:
        vals = _as_subset_values(values, size)
        return np.zeros(vals.shape[0])

    return effect


def extract_effect(model: FittedModel, subset) -> Callable:
    """Effect function f_V of the fit, orthogonal under the product measure.

    Returns a callable mapping an (m, |V|) array of covariate values (or a
    1-D array for singleton subsets) to effect values.  Subsets containing a
    covariate with kappa_i = 0 give the identically zero function.
    """
    V = tuple(sorted(int(i) for i in subset))
    if len(V) == 0:
        raise ValueError("use the decomposition intercept for the empty subset")
    if len(V) > model.Q:
        raise ValueError(f"subset {V} exceeds the model's interaction order {model.Q}")
    if len(set(V)) != len(V):
        raise ValueError(f"subset {V} has repeated covariates")
    theta = model.hp.theta(V)
    if theta == 0.0:
        return _zero_effect(len(V))
    lib = model.lib
    train_cols = [np.ascontiguousarray(model.train_X[:, i]) for i in V]
    alpha = model.alpha

    def effect(values) -> np.ndarray:
        vals = _as_subset_values(values, len(V))
        m = vals.shape[0]
        out = np.empty(m)
        chunk = max(1, _CHUNK_TARGET // max(alpha.size, 1))
        for start in range(0, m, chunk):
            stop = min(start + chunk, m)
            cross = lib.gram_1d(V[0], vals[start:stop, 0], train_cols[0])
            for k in range(1, len(V)):
                cross *= lib.gram_1d(V[k], vals[start:stop, k], train_cols[k])
            out[start:stop] = theta * (cross @ alpha)
        return out

    return effect


@dataclass
class ChangeOfBasisCoefficients:
    """Least-squares projection of one pair effect onto its additive span."""

    psi_i: np.ndarray
    psi_j: np.ndarray
    psi_0: float
    num_samples: int
    normal_eq_residual: float


@dataclass
class AnovaDecomposition:
    """Intercept plus a map from covariate subsets to effect callables.

    ``measure`` records the reference measure of the orthogonality
    constraints: "product" for the product of marginals, "joint" after a
    change of basis.  ``predict`` sums intercept and effects, which must
    reproduce the source model pointwise.
    """

    measure: str
    intercept: float
    effects: Dict[Tuple[int, ...], Callable]
    provenance: Optional[str] = None
    pair_projections: Optional[Dict[Tuple[int, int], ChangeOfBasisCoefficients]] = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        out = np.full(X.shape[0], self.intercept)
        for subset, effect in self.effects.items():
            out += effect(X[:, list(subset)])
        return out


def decompose(model: FittedModel, subsets=None) -> AnovaDecomposition:
    """Full product-measure decomposition of a fitted model.

    By default includes every subset of the selected covariates with
    1 <= |V| <= Q and theta_V != 0.
    """
    if subsets is None:
        chosen = select(model.hp)
        subsets = []
        for q in range(1, model.Q + 1):
            if model.hp.eta[q] == 0.0:
                continue
            subsets.extend(itertools.combinations(chosen, q))
    effects = {}
    for subset in subsets:
        V = tuple(sorted(int(i) for i in subset))
        effects[V] = extract_effect(model, V)
    intercept = float(model.hp.eta[0] ** 2 * model.alpha.sum())
    return AnovaDecomposition(
        measure="product", intercept=intercept, effects=effects, provenance="fitted-model"
    )


@dataclass
class VarianceSummary:
    """Monte Carlo effect variances, their sum, and the variance of the sum."""

    variances: Dict[Tuple[int, ...], float]
    sum_of_variances: float
    variance_of_sum: float
    shares: Dict[Tuple[int, ...], float]


def variance_decomposition(decomp: AnovaDecomposition, sample) -> VarianceSummary:
    """Estimate var(f_V) for every effect over the given sample rows.

    Under the product measure the effects are orthogonal, so the variance of
    the sum matches the sum of variances; both are reported so the caller can
    check the gap.  With a joint-measure sample the output is only an
    approximation of a variance split.
    """
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 2 or sample.shape[0] == 0:
        raise ValueError("need a nonempty 2-D sample of covariate rows")
    variances = {}
    total = np.zeros(sample.shape[0])
    for subset, effect in decomp.effects.items():
        vals = effect(sample[:, list(subset)])
        variances[subset] = float(np.var(vals))
        total += vals
    sum_var = float(sum(variances.values()))
    shares = {
        V: (v / sum_var if sum_var > 0 else 0.0) for V, v in variances.items()
    }
    return VarianceSummary(
        variances=variances,
        sum_of_variances=sum_var,
        variance_of_sum=float(np.var(total)),
        shares=shares,
    )


def empirical_joint_sampler(X, rng) -> Callable:
    """Resample whole rows of ``X`` with replacement (empirical joint law)."""
    X = np.asarray(X, dtype=float)

    def sampler(size: int) -> np.ndarray:
        return X[rng.integers(0, X.shape[0], size=size)]

    return sampler


def empirical_product_sampler(X, rng) -> Callable:
    """Resample each column of ``X`` independently (empirical product law)."""
    X = np.asarray(X, dtype=float)

    def sampler(size: int) -> np.ndarray:
        idx = rng.integers(0, X.shape[0], size=(size, X.shape[1]))
        return X[idx, np.arange(X.shape[1])]

    return sampler


def change_basis(
    model: FittedModel,
    decomp: AnovaDecomposition,
    mu_sampler: Callable,
    num_samples: int,
) -> AnovaDecomposition:
    """Re-express a pairwise product-measure decomposition under a new measure.

    Draws ``num_samples`` rows from ``mu_sampler``, regresses every nonzero
    pair effect onto [1, Phi_i, Phi_j] by least squares, subtracts the fitted
    additive part from the pair effect and adds it to the main effects and
    intercept.  The sum of all components is unchanged, so the re-expressed
    decomposition still reproduces the model predictions exactly.

    Requires Q = 2 and a product-tagged decomposition.  Raises ValueError if
    ``num_samples`` is smaller than the regression width plus one or if a
    pair's design is rank deficient.
    """
    if model.Q != 2:
        raise ValueError(f"change of basis is defined for Q = 2, model has Q = {model.Q}")
    if decomp.measure != "product":
        raise ValueError("change_basis expects a product-measure decomposition")
    lib = model.lib
    sizes = lib.basis_sizes
    pairs = [V for V in decomp.effects if len(V) == 2]
    mains = {V[0]: f for V, f in decomp.effects.items() if len(V) == 1}

    max_width = max((1 + sizes[i] + sizes[j] for i, j in pairs), default=1)
    if num_samples < max_width + 1:
        raise ValueError(
            f"need at least {max_width + 1} Monte Carlo samples for the pair "
            f"regressions, got {num_samples}"
        )
    rows = np.asarray(mu_sampler(num_samples), dtype=float)
    if rows.ndim != 2 or rows.shape[1] != lib.num_covariates:
        raise ValueError(
            f"mu_sampler must return rows of {lib.num_covariates} covariates, "
            f"got shape {rows.shape}"
        )

    projections: Dict[Tuple[int, int], ChangeOfBasisCoefficients] = {}
    linear_shift = {}  # covariate -> accumulated coefficient vector on Phi_i
    intercept_shift = 0.0
    new_effects: Dict[Tuple[int, ...], Callable] = {}

    for i, j in pairs:
        phi_i = lib.feature_block(i, rows[:, i])
        phi_j = lib.feature_block(j, rows[:, j])
        design = np.hstack([np.ones((num_samples, 1)), phi_i, phi_j])
        target = decomp.effects[(i, j)](rows[:, [i, j]])
        coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
        if rank < design.shape[1]:
            raise ValueError(
                f"rank-deficient change-of-basis design for pair ({i}, {j}): "
                f"rank {rank} < {design.shape[1]} columns"
            )
        resid = design.T @ (design @ coef - target)
        scale = max(1.0, float(np.linalg.norm(design.T @ target)))
        psi_0 = float(coef[0])
        psi_i = coef[1 : 1 + sizes[i]]
        psi_j = coef[1 + sizes[i] :]
        projections[(i, j)] = ChangeOfBasisCoefficients(
            psi_i=psi_i,
            psi_j=psi_j,
            psi_0=psi_0,
            num_samples=num_samples,
            normal_eq_residual=float(np.linalg.norm(resid) / scale),
        )
        intercept_shift += psi_0
        linear_shift[i] = linear_shift.get(i, np.zeros(sizes[i])) + psi_i
        linear_shift[j] = linear_shift.get(j, np.zeros(sizes[j])) + psi_j

        def pair_effect(values, _old=decomp.effects[(i, j)], _i=i, _j=j,
                        _pi=psi_i, _pj=psi_j, _p0=psi_0):
            vals = _as_subset_values(values, 2)
            add = (
                lib.feature_block(_i, vals[:, 0]) @ _pi
                + lib.feature_block(_j, vals[:, 1]) @ _pj
                + _p0
            )
            return _old(vals) - add

        new_effects[(i, j)] = pair_effect

    touched = set(mains) | set(linear_shift)
    for i in sorted(touched):
        old = mains.get(i, _zero_effect(1))
        shift = linear_shift.get(i)
        if shift is None:
            new_effects[(i,)] = old
            continue

        def main_effect(values, _old=old, _i=i, _shift=shift):
            vals = _as_subset_values(values, 1)
            return _old(vals) + lib.feature_block(_i, vals[:, 0]) @ _shift

        new_effects[(i,)] = main_effect

    return AnovaDecomposition(
        measure="joint",
        intercept=decomp.intercept + intercept_shift,
        effects=new_effects,
        provenance=decomp.provenance,
        pair_projections=projections,
    )


def empirical_product_anova(predictor: Callable, X, order: int = 2, subsets=None) -> AnovaDecomposition:
    """Product-measure style decomposition of an arbitrary predictor.

    The intercept is the average of the fitted values over the reference
    rows; the main effect at x_i averages predictions with column i pinned to
    x_i; pair effects pin two columns and subtract the lower-order terms.
    The sum identity holds exactly whenever the predictor contains no
    interactions above ``order``.

    Parameters
    ----------
    predictor : callable
        Maps an (m, p) array to m predictions.
    X : ndarray, shape (N, p)
        Reference data defining the empirical marginals.
    order : int
        1 for main effects only, 2 to include pair effects.
    subsets : iterable of tuples, optional
        Restrict the reported effects; defaults to all singletons (and all
        pairs when order is 2).
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    intercept = float(np.mean(predictor(X)))
    chunk = max(1, 200_000 // max(n, 1))

    def pinned_mean(vals: np.ndarray, columns) -> np.ndarray:
        m = vals.shape[0]
        out = np.empty(m)
        for start in range(0, m, chunk):
            stop = min(start + chunk, m)
            block = np.repeat(X[None, :, :], stop - start, axis=0)
            for k, col in enumerate(columns):
                block[:, :, col] = vals[start:stop, k, None]
            preds = np.asarray(predictor(block.reshape(-1, p)), dtype=float)
            out[start:stop] = preds.reshape(stop - start, n).mean(axis=1)
        return out

    def main_effect_fn(i: int) -> Callable:
        def effect(values) -> np.ndarray:
            vals = _as_subset_values(values, 1)
            return pinned_mean(vals, (i,)) - intercept

        return effect

    main_fns: Dict[int, Callable] = {}

    def get_main(i: int) -> Callable:
        if i not in main_fns:
            main_fns[i] = main_effect_fn(i)
        return main_fns[i]

    def pair_effect_fn(i: int, j: int) -> Callable:
        f_i, f_j = get_main(i), get_main(j)

        def effect(values) -> np.ndarray:
            vals = _as_subset_values(values, 2)
            both = pinned_mean(vals, (i, j))
            return both - f_i(vals[:, 0]) - f_j(vals[:, 1]) - intercept

        return effect

    if subsets is None:
        subsets = [(i,) for i in range(p)]
        if order == 2:
            subsets += list(itertools.combinations(range(p), 2))
    effects: Dict[Tuple[int, ...], Callable] = {}
    for subset in subsets:
        V = tuple(sorted(int(i) for i in subset))
        if len(V) == 1:
            effects[V] = get_main(V[0])
        elif len(V) == 2 and order == 2:
            effects[V] = pair_effect_fn(*V)
        else:
            raise ValueError(f"subset {V} not supported at order {order}")
    return AnovaDecomposition(
        measure="product", intercept=intercept, effects=effects,
        provenance="empirical-product",
    )

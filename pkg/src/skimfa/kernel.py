"""SKIM-FA kernel evaluation in O(p*Q) per pair, plus a brute-force oracle.

The kernel is a sum over covariate subsets V with |V| <= Q,

    k(x, y) = sum_V eta_{|V|}^2 * prod_{i in V} kappa_i^2 * k_i(x_i, y_i),

where k_i are the library's one-dimensional zero-mean kernels.  Because the
subset weights factorize, the sum over all O(p^Q) subsets collapses to
elementary symmetric polynomials of the p values z_i = kappa_i^2 k_i(x_i, y_i),
which the Newton-identity recursion builds from Q power sums in O(p*Q) time:

    ebar_0 = 1,
    ebar_q = (1/q) * sum_{s=1}^{q} (-1)^{s+1} ebar_{q-s} * psum_s,
    psum_s = sum_i z_i^s.

``eval_skim_bruteforce`` enumerates subsets directly and serves as the test
oracle for the recursion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .basis import FeatureLibrary

__all__ = [
    "SkimHyperParams",
    "elementary_symmetric",
    "skim_kernel_from_k1",
    "bruteforce_from_k1",
    "eval_skim",
    "eval_skim_bruteforce",
    "gram_matrix",
]

_BRUTEFORCE_MAX_P = 20


@dataclass(frozen=True)
class SkimHyperParams:
    """Kernel hyperparameters with the sparsity reparameterization.

    ``kappa`` is derived from the unconstrained vector ``raw`` through

        U_i = raw_i^2 / (raw_i^2 + 1),    kappa_i = max(U_i - c, 0),

    where ``c = trunc_level`` is the truncation level.  ``kappa`` is stored as
    given and squared only at use, so exact zeros survive.  The ridge
    regularizer is always ``sigma_noise**2``.
    """

    kappa: np.ndarray
    eta: np.ndarray
    sigma_noise: float
    trunc_level: float = 0.0
    raw: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "sigma_noise", float(self.sigma_noise))
        object.__setattr__(self, "trunc_level", float(self.trunc_level))
        if not 0.0 <= self.trunc_level < 1.0:
            raise ValueError(f"trunc_level must lie in [0, 1), got {self.trunc_level}")
        if np.any(kappa < 0):
            raise ValueError("kappa must be nonnegative")
        if eta.size < 1:
            raise ValueError("eta must contain at least the intercept scale")
        if self.raw is None:
            object.__setattr__(self, "raw", self._raw_from_kappa(kappa, self.trunc_level))
        else:
            raw = np.atleast_1d(np.asarray(self.raw, dtype=float))
            object.__setattr__(self, "raw", raw)
        if self.raw.shape != kappa.shape:
            raise ValueError("raw and kappa must have the same length")
        derived = np.maximum(self.raw**2 / (self.raw**2 + 1.0) - self.trunc_level, 0.0)
        if not np.allclose(derived, kappa, rtol=0.0, atol=1e-12):
            raise ValueError("kappa is inconsistent with raw and trunc_level")

    @staticmethod
    def _raw_from_kappa(kappa: np.ndarray, c: float) -> np.ndarray:
        u = kappa + c
        if np.any(u >= 1.0):
            raise ValueError(
                "kappa + trunc_level must stay below 1 to admit an unconstrained "
                "representation"
            )
        return np.sqrt(u / (1.0 - u))

    @classmethod
    def from_raw(cls, raw, eta, sigma_noise, trunc_level=0.0) -> "SkimHyperParams":
        raw = np.atleast_1d(np.asarray(raw, dtype=float))
        u = raw**2 / (raw**2 + 1.0)
        kappa = np.maximum(u - trunc_level, 0.0)
        return cls(kappa=kappa, eta=eta, sigma_noise=sigma_noise,
                   trunc_level=trunc_level, raw=raw)

    @classmethod
    def from_kappa(cls, kappa, eta, sigma_noise, trunc_level=0.0) -> "SkimHyperParams":
        return cls(kappa=np.asarray(kappa, dtype=float), eta=eta,
                   sigma_noise=sigma_noise, trunc_level=trunc_level)

    @property
    def num_covariates(self) -> int:
        return self.kappa.size

    @property
    def max_order(self) -> int:
        return self.eta.size - 1

    def theta(self, subset) -> float:
        """Effect weight theta_V = eta_{|V|}^2 * prod_{i in V} kappa_i^2."""
        subset = tuple(subset)
        if len(subset) > self.max_order:
            raise ValueError(f"subset {subset} exceeds interaction order {self.max_order}")
        w = self.eta[len(subset)] ** 2
        for i in subset:
            w *= self.kappa[i] ** 2
        return float(w)


def elementary_symmetric(power_sums, q_max: int):
    """Elementary symmetric values e_1..e_q_max from power sums p_1..p_q_max.

    Works elementwise: the entries of ``power_sums`` may be scalars or arrays
    of a common shape.  Returns the list [e_0, e_1, ..., e_q_max] with e_0 = 1.
    """
    if len(power_sums) < q_max:
        raise ValueError(f"need {q_max} power sums, got {len(power_sums)}")
    first = np.asarray(power_sums[0], dtype=float)
    e = [np.ones_like(first)]
    for q in range(1, q_max + 1):
        acc = np.zeros_like(first)
        for s in range(1, q + 1):
            term = e[q - s] * np.asarray(power_sums[s - 1], dtype=float)
            if s % 2 == 1:
                acc += term
            else:
                acc -= term
        e.append(acc / q)
    return e


def skim_kernel_from_k1(k1_values, kappa, eta, Q: int) -> float:
    """Kernel value from precomputed 1-D kernel values, via the recursion."""
    k1 = np.asarray(k1_values, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    eta = np.asarray(eta, dtype=float)
    z = kappa**2 * k1
    power_sums = [float(np.sum(z**s)) for s in range(1, Q + 1)]
    e = elementary_symmetric(power_sums, Q)
    total = eta[0] ** 2
    for q in range(1, Q + 1):
        total += eta[q] ** 2 * float(e[q])
    return float(total)


def bruteforce_from_k1(k1_values, kappa, eta, Q: int) -> float:
    """Kernel value by explicit enumeration of all subsets with |V| <= Q."""
    k1 = np.asarray(k1_values, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    eta = np.asarray(eta, dtype=float)
    p = k1.size
    if p > _BRUTEFORCE_MAX_P:
        raise ValueError(f"brute-force oracle is limited to p <= {_BRUTEFORCE_MAX_P}, got {p}")
    total = eta[0] ** 2
    for q in range(1, Q + 1):
        for subset in itertools.combinations(range(p), q):
            term = eta[q] ** 2
            for i in subset:
                term *= kappa[i] ** 2 * k1[i]
            total += term
    return float(total)


def _check_pair_args(lib: FeatureLibrary, hp: SkimHyperParams, Q: int) -> None:
    p = lib.num_covariates
    if hp.num_covariates != p:
        raise ValueError(
            f"hyperparameters cover {hp.num_covariates} covariates, library has {p}"
        )
    if not 1 <= Q < p:
        raise ValueError(f"interaction order must satisfy 1 <= Q < p, got Q={Q}, p={p}")
    if hp.max_order < Q:
        raise ValueError(f"eta has {hp.eta.size} entries, need Q + 1 = {Q + 1}")


def eval_skim(lib: FeatureLibrary, hp: SkimHyperParams, x, y, Q: int) -> float:
    """Evaluate the kernel on a pair of covariate rows in O(p*Q) time."""
    _check_pair_args(lib, hp, Q)
    return skim_kernel_from_k1(lib.k1_vector(x, y), hp.kappa, hp.eta, Q)


def eval_skim_bruteforce(lib: FeatureLibrary, hp: SkimHyperParams, x, y, Q: int) -> float:
    """Subset-enumeration oracle for ``eval_skim``; enforced p <= 20."""
    p = lib.num_covariates
    if p > _BRUTEFORCE_MAX_P:
        raise ValueError(f"brute-force oracle is limited to p <= {_BRUTEFORCE_MAX_P}, got {p}")
    if hp.num_covariates != p:
        raise ValueError(
            f"hyperparameters cover {hp.num_covariates} covariates, library has {p}"
        )
    return bruteforce_from_k1(lib.k1_vector(x, y), hp.kappa, hp.eta, Q)


def _kr2_matrix(F: np.ndarray, groups):
    """Order-2 symmetric product features.

    Returns (H, groups2) such that for each covariate block F_i the squared
    1-D Gram satisfies (F_i F_i^T)**2 = H_i H_i^T.  Off-diagonal products get
    a sqrt(2) weight to account for symmetry.
    """
    cols = []
    groups2 = []
    start = 0
    root2 = np.sqrt(2.0)
    for g in groups:
        block = F[:, g]
        b = block.shape[1]
        for a in range(b):
            cols.append(block[:, a] * block[:, a])
            for c in range(a + 1, b):
                cols.append(root2 * block[:, a] * block[:, c])
        size = b * (b + 1) // 2
        groups2.append(slice(start, start + size))
        start += size
    H = np.column_stack(cols) if cols else np.zeros((F.shape[0], 0))
    return H, groups2


def _expand_column_weights(weights: np.ndarray, groups) -> np.ndarray:
    out = np.empty(sum(g.stop - g.start for g in groups))
    for w, g in zip(weights, groups):
        out[g] = w
    return out


def _power_grams(Fa: np.ndarray, Fb: np.ndarray, groups, kappa: np.ndarray, Q: int):
    """Cross Gram matrices of the weighted power-sum kernels, s = 1..Q.

    S_s = sum_i kappa_i^(2s) * (Fa_i Fb_i^T)**s, evaluated with stacked
    feature products for s <= 2 and a per-covariate loop otherwise.
    """
    na, nb = Fa.shape[0], Fb.shape[0]
    if Fa.shape[1] == 0:
        return [np.zeros((na, nb)) for _ in range(Q)]
    if Q <= 2:
        w1 = _expand_column_weights(kappa, groups)
        Ga = Fa * w1
        Gb = Fb * w1
        out = [Ga @ Gb.T]
        if Q == 2:
            Ha, groups2 = _kr2_matrix(Fa, groups)
            Hb, _ = _kr2_matrix(Fb, groups)
            w2 = _expand_column_weights(kappa**2, groups2)
            out.append((Ha * w2) @ (Hb * w2).T)
        return out
    out = [np.zeros((na, nb)) for _ in range(Q)]
    for k, g in zip(kappa, groups):
        A = Fa[:, g] @ Fb[:, g].T
        As = A.copy()
        for s in range(1, Q + 1):
            if s > 1:
                As *= A
            out[s - 1] += k ** (2 * s) * As
    return out


def _gram_from_features(Fa, Fb, groups, hp: SkimHyperParams, Q: int):
    """Kernel Gram matrix plus the intermediate power/ESP Gram lists."""
    psums = _power_grams(Fa, Fb, groups, hp.kappa, Q)
    e = elementary_symmetric(psums, Q)
    K = np.full((Fa.shape[0], Fb.shape[0]), hp.eta[0] ** 2)
    for q in range(1, Q + 1):
        K += hp.eta[q] ** 2 * e[q]
    return K, psums, e


def gram_matrix(lib: FeatureLibrary, hp: SkimHyperParams, X_a, X_b, Q: int) -> np.ndarray:
    """Pairwise kernel matrix between the rows of ``X_a`` and ``X_b``.

    When the two inputs coincide the result is symmetric positive
    semidefinite up to numerical tolerance.
    """
    _check_pair_args(lib, hp, Q)
    X_a = np.asarray(X_a, dtype=float)
    X_b = np.asarray(X_b, dtype=float)
    if X_a.ndim != 2 or X_b.ndim != 2:
        raise ValueError("gram_matrix expects 2-D row matrices")
    if X_a.shape[1] != lib.num_covariates or X_b.shape[1] != lib.num_covariates:
        raise ValueError(
            f"row length mismatch: library has {lib.num_covariates} covariates, "
            f"inputs have {X_a.shape[1]} and {X_b.shape[1]}"
        )
    groups = lib.column_groups()
    Fa = lib.feature_matrix(X_a)
    Fb = Fa if X_b is X_a else lib.feature_matrix(X_b)
    K, _, _ = _gram_from_features(Fa, Fb, groups, hp, Q)
    return K

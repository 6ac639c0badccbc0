"""Hyperparameter learning by gradient descent on a Monte Carlo CV loss.

Each iteration draws a fresh random training subset of size N - M, fits
kernel ridge on it, and measures squared prediction error on the M held-out
rows.  That single-split error is an unbiased estimate of the exact
leave-M-out cross-validation loss, so its gradient is an unbiased stochastic
gradient.  Gradients are exact for the drawn split: reverse mode through the
Cholesky solve uses the adjoint identity d(alpha) = -S^{-1} dS alpha, and the
kernel derivative with respect to each kappa_i contracts the cotangent
against the elementary-symmetric downdate (the ESP of the remaining
covariates), so coordinates with kappa_i = 0 get an exact zero.

Sparsity comes from the truncation schedule: kappa_i = max(U_i - c_t, 0)
with c_t = 0 during warmup, jumping to a quantile of U at the warmup
iteration and growing geometrically to a cap afterwards.  Because the
subgradient at the kink is taken as zero and c_t never decreases, a covariate
that hits zero stays at zero for the rest of the run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from . import ridge
from .basis import FeatureLibrary, build_library
from .kernel import SkimHyperParams, _power_grams, _kr2_matrix, elementary_symmetric

__all__ = [
    "TrainConfig",
    "TrainTrace",
    "TrainGradient",
    "trunc_schedule",
    "mc_cv_loss",
    "cv_loss_grad",
    "fit",
]


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent and truncation-schedule settings.

    ``holdout_size`` defaults to round(0.2 * N) at fit time and
    ``warmup_iters`` to round(num_iters / 4), so short runs still truncate.
    """

    num_iters: int = 2000
    learning_rate: float = 0.1
    holdout_size: Optional[int] = None
    warmup_iters: Optional[int] = None
    initial_drop_quantile: float = 0.25
    growth: float = 0.01
    cap: float = 0.75
    seed: int = 0
    trace_path: Optional[str] = None

    def __post_init__(self):
        if self.num_iters < 1:
            raise ValueError("num_iters must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.cap < 1.0:
            raise ValueError("cap must lie in (0, 1)")
        if self.growth <= 0:
            raise ValueError("growth must be positive")
        if not 0.0 <= self.initial_drop_quantile <= 1.0:
            raise ValueError("initial_drop_quantile must lie in [0, 1]")
        if self.warmup_iters is not None and self.warmup_iters < 1:
            raise ValueError("warmup_iters must be at least 1")

    def resolved_holdout(self, n: int) -> int:
        m = self.holdout_size if self.holdout_size is not None else int(round(0.2 * n))
        if not 0 < m < n:
            raise ValueError(f"holdout size must satisfy 0 < M < N, got M={m}, N={n}")
        return m

    def resolved_warmup(self) -> int:
        if self.warmup_iters is not None:
            return self.warmup_iters
        return max(1, int(round(self.num_iters / 4)))


@dataclass
class TrainTrace:
    """Per-iteration observability: loss, truncation level, sparsity, scales.

    ``active_mask[t, i]`` records whether kappa_i was nonzero at iteration t;
    once a covariate drops out it must never reappear.
    """

    loss: np.ndarray
    trunc_level: np.ndarray
    active_size: np.ndarray
    sigma_noise: np.ndarray
    eta: np.ndarray
    active_mask: np.ndarray

    def __len__(self) -> int:
        return self.loss.size

    def to_csv(self, path) -> None:
        q_plus_1 = self.eta.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["t", "loss", "trunc_level", "active", "sigma_noise"]
                + [f"eta_{q}" for q in range(q_plus_1)]
            )
            for t in range(len(self)):
                writer.writerow(
                    [
                        t + 1,
                        repr(float(self.loss[t])),
                        repr(float(self.trunc_level[t])),
                        int(self.active_size[t]),
                        repr(float(self.sigma_noise[t])),
                    ]
                    + [repr(float(v)) for v in self.eta[t]]
                )


@dataclass(frozen=True)
class TrainGradient:
    """Exact gradient of the single-split CV loss."""

    raw: np.ndarray
    eta: np.ndarray
    sigma_noise: float


def trunc_schedule(U: np.ndarray, c_prev: float, t: int, config: TrainConfig) -> float:
    """Truncation level for iteration ``t`` (1-based).

    Zero during warmup; the ``initial_drop_quantile`` empirical quantile of U
    at the warmup iteration; afterwards grows by a factor (1 + growth) per
    iteration, saturating at ``cap`` and never decreasing.
    """
    if t < 1:
        raise ValueError("iteration index is 1-based")
    warmup = config.resolved_warmup()
    if t < warmup:
        return 0.0
    if t == warmup:
        return float(np.quantile(np.asarray(U, dtype=float), config.initial_drop_quantile))
    return max(min((1.0 + config.growth) * c_prev, config.cap), c_prev)


def _split_complement(n: int, train_rows) -> tuple:
    train_idx = np.asarray(train_rows, dtype=int)
    if train_idx.size == 0:
        raise ValueError("training split is empty")
    mask = np.ones(n, dtype=bool)
    mask[train_idx] = False
    hold_idx = np.nonzero(mask)[0]
    if hold_idx.size == 0:
        raise ValueError("holdout split is empty")
    return train_idx, hold_idx


def mc_cv_loss(lib: FeatureLibrary, hp: SkimHyperParams, X, Y, Q: int, train_rows) -> float:
    """Squared prediction error of the ridge fit on ``train_rows``.

    Fits on the given size N - M subset and averages squared residuals over
    the complement.  Averaged over uniformly drawn subsets this is unbiased
    for the exact leave-M-out loss.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    train_idx, hold_idx = _split_complement(X.shape[0], train_rows)
    model = ridge.solve(lib, hp, X[train_idx], Y[train_idx], Q)
    resid = Y[hold_idx] - ridge.predict(model, X[hold_idx])
    return float(np.mean(resid**2))


def _group_sums(per_column: np.ndarray, starts: np.ndarray) -> np.ndarray:
    return np.add.reduceat(per_column, starts)


def _kappa_grad_block(u, v, Fa, Fb, starts, groups, kap, eta, psums, e_list, Q):
    """Contraction u^T (dK/dkappa) v for one Gram block with cotangent u v^T.

    dK/dkappa_i = 2 kappa_i * sum_{j=0}^{Q-1} (-1)^j kappa_i^(2j)
                  * Ebar_j (.*) k_i^(j+1),
    where Ebar_j collects eta_q^2 e_{q-1-j} over q > j and (.*) is the
    elementwise product.  The Q = 2 case is fully vectorized; general Q falls
    back to a per-covariate loop over materialized 1-D Gram blocks.
    """
    if kap.size == 0:
        return np.zeros(0)
    if Q == 2:
        eta1_sq, eta2_sq = eta[1] ** 2, eta[2] ** 2
        cu = Fa.T @ u
        cv = Fb.T @ v
        su = _group_sums(cu * cv, starts)
        P = psums[0] @ (Fb * v[:, None])
        t = _group_sums(((Fa * u[:, None]) * P).sum(axis=0), starts)
        Ha, groups2 = _kr2_matrix(Fa, groups)
        Hb = Ha if Fb is Fa else _kr2_matrix(Fb, groups)[0]
        starts2 = np.array([g.start for g in groups2])
        h = _group_sums((Ha.T @ u) * (Hb.T @ v), starts2)
        return 2.0 * kap * (eta1_sq * su + eta2_sq * t) - 2.0 * eta2_sq * kap**3 * h
    out = np.empty(kap.size)
    for idx, (k_i, g) in enumerate(zip(kap, groups)):
        A = Fa[:, g] @ Fb[:, g].T
        z = (k_i**2) * A
        m = np.ones_like(A)
        W = (eta[1] ** 2) * m
        for q in range(2, Q + 1):
            m = e_list[q - 1] - z * m
            W = W + (eta[q] ** 2) * m
        out[idx] = 2.0 * k_i * (u @ ((W * A) @ v))
    return out


def _active_columns(groups, active_mask):
    cols, new_groups, starts = [], [], []
    pos = 0
    for keep, g in zip(active_mask, groups):
        if keep:
            size = g.stop - g.start
            cols.append(np.arange(g.start, g.stop))
            new_groups.append(slice(pos, pos + size))
            starts.append(pos)
            pos += size
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
    return cols, new_groups, np.asarray(starts, dtype=int)


def _cv_forward_backward(F, groups, kappa, eta, sigma, Y, train_idx, hold_idx, Q):
    """Loss of one CV split and its exact gradient over (kappa, eta, sigma).

    Only columns of active covariates (kappa > 0) enter; inactive gradients
    are exactly zero, matching the subgradient convention at the truncation
    kink.
    """
    n_hold = hold_idx.size
    active = kappa > 0.0
    cols, groups_a, starts = _active_columns(groups, active)
    Ft = F[np.ix_(train_idx, cols)]
    Fh = F[np.ix_(hold_idx, cols)]
    kap = kappa[active]

    psums_tt = _power_grams(Ft, Ft, groups_a, kap, Q)
    psums_ht = _power_grams(Fh, Ft, groups_a, kap, Q)
    e_tt = elementary_symmetric(psums_tt, Q)
    e_ht = elementary_symmetric(psums_ht, Q)
    K_tt = np.full((train_idx.size, train_idx.size), eta[0] ** 2)
    K_ht = np.full((n_hold, train_idx.size), eta[0] ** 2)
    for q in range(1, Q + 1):
        K_tt += eta[q] ** 2 * e_tt[q]
        K_ht += eta[q] ** 2 * e_ht[q]

    factor = ridge._factor_regularized(K_tt, sigma**2)
    alpha = scipy.linalg.cho_solve(factor, Y[train_idx])
    resid = K_ht @ alpha - Y[hold_idx]
    loss = float(resid @ resid) / n_hold

    r = (2.0 / n_hold) * resid
    w = scipy.linalg.cho_solve(factor, K_ht.T @ r)

    g_sigma = -2.0 * sigma * float(w @ alpha)
    g_eta = np.zeros_like(eta)
    g_eta[0] = 2.0 * eta[0] * float(alpha.sum()) * float(r.sum() - w.sum())
    for q in range(1, Q + 1):
        g_eta[q] = 2.0 * eta[q] * (float(r @ (e_ht[q] @ alpha)) - float(w @ (e_tt[q] @ alpha)))

    g_kap_active = _kappa_grad_block(
        r, alpha, Fh, Ft, starts, groups_a, kap, eta, psums_ht, e_ht, Q
    ) - _kappa_grad_block(
        w, alpha, Ft, Ft, starts, groups_a, kap, eta, psums_tt, e_tt, Q
    )
    g_kappa = np.zeros_like(kappa)
    g_kappa[active] = g_kap_active
    return loss, g_kappa, g_eta, g_sigma


def _raw_chain(g_kappa, raw, trunc_level):
    u = raw**2 / (raw**2 + 1.0)
    du_draw = 2.0 * raw / (raw**2 + 1.0) ** 2
    return g_kappa * (u > trunc_level) * du_draw


def cv_loss_grad(lib: FeatureLibrary, hp: SkimHyperParams, X, Y, Q: int, train_rows):
    """Loss of the fixed split plus its exact gradient over (raw, eta, sigma).

    The derivative of max(U - c, 0) at U <= c is taken as 0, so components
    with kappa_i = 0 receive an exactly zero gradient.

    Raises
    ------
    FloatingPointError
        If the loss or any gradient entry is non-finite; the message carries
        a snapshot of the offending parameters.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    train_idx, hold_idx = _split_complement(X.shape[0], train_rows)
    F = lib.feature_matrix(X)
    loss, g_kappa, g_eta, g_sigma = _cv_forward_backward(
        F, lib.column_groups(), hp.kappa, hp.eta, hp.sigma_noise,
        Y, train_idx, hold_idx, Q,
    )
    grad = TrainGradient(
        raw=_raw_chain(g_kappa, hp.raw, hp.trunc_level),
        eta=g_eta,
        sigma_noise=g_sigma,
    )
    _check_finite(loss, grad, hp.raw, hp.eta, hp.sigma_noise, hp.trunc_level, t=None)
    return loss, grad


def _check_finite(loss, grad, raw, eta, sigma, c, t):
    values = np.concatenate([[loss], grad.raw, grad.eta, [grad.sigma_noise]])
    if np.all(np.isfinite(values)):
        return
    where = f" at iteration {t}" if t is not None else ""
    raise FloatingPointError(
        f"non-finite loss or gradient{where}; parameter snapshot: "
        f"raw={np.array2string(raw, threshold=16)}, "
        f"eta={np.array2string(eta, threshold=16)}, sigma={sigma!r}, c={c!r}"
    )


def fit(X, Y, spec=None, Q: int = 2, config: Optional[TrainConfig] = None):
    """Learn hyperparameters and ridge weights; return (model, trace).

    Initializes raw = 1 (so U = 1/2 and, at c = 0, kappa = 1/2), eta = 1 and
    sigma_noise = sqrt(0.5 * var(Y)), runs ``config.num_iters`` gradient
    steps each on a fresh uniformly drawn training subset, then solves the
    full-data ridge system with the learned hyperparameters.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != Y.size:
        raise ValueError(f"inconsistent shapes: X {X.shape}, Y {Y.shape}")
    if Q < 1:
        raise ValueError("interaction order Q must be at least 1")
    config = config or TrainConfig()
    n = X.shape[0]
    m_hold = config.resolved_holdout(n)
    lib = build_library(X, spec)
    F = lib.feature_matrix(X)
    groups = lib.column_groups()

    p = X.shape[1]
    raw = np.ones(p)
    eta = np.ones(Q + 1)
    sigma = float(np.sqrt(0.5 * np.var(Y)))
    rng = np.random.default_rng(config.seed)
    gamma = config.learning_rate
    T = config.num_iters

    trace = TrainTrace(
        loss=np.zeros(T),
        trunc_level=np.zeros(T),
        active_size=np.zeros(T, dtype=int),
        sigma_noise=np.zeros(T),
        eta=np.zeros((T, Q + 1)),
        active_mask=np.zeros((T, p), dtype=bool),
    )

    c = 0.0
    for t in range(1, T + 1):
        train_idx = np.sort(rng.choice(n, size=n - m_hold, replace=False))
        mask = np.ones(n, dtype=bool)
        mask[train_idx] = False
        hold_idx = np.nonzero(mask)[0]

        u = raw**2 / (raw**2 + 1.0)
        c = trunc_schedule(u, c, t, config)
        if c >= 1.0:
            # Only reachable when raw overflowed and U saturated at 1.0.
            raise FloatingPointError(
                f"truncation level reached {c!r} at iteration {t}: importance "
                f"weights saturated, the optimization diverged (consider a "
                f"smaller learning_rate); raw snapshot: "
                f"{np.array2string(raw, threshold=16)}"
            )
        kappa = np.maximum(u - c, 0.0)

        loss, g_kappa, g_eta, g_sigma = _cv_forward_backward(
            F, groups, kappa, eta, sigma, Y, train_idx, hold_idx, Q
        )
        g_raw = _raw_chain(g_kappa, raw, c)
        _check_finite(loss, TrainGradient(g_raw, g_eta, g_sigma), raw, eta, sigma, c, t)

        k = t - 1
        trace.loss[k] = loss
        trace.trunc_level[k] = c
        trace.active_mask[k] = kappa > 0.0
        trace.active_size[k] = int(np.count_nonzero(kappa))
        trace.sigma_noise[k] = abs(sigma)
        trace.eta[k] = np.abs(eta)

        raw = raw - gamma * g_raw
        eta = eta - gamma * g_eta
        sigma = sigma - gamma * g_sigma

    hp = SkimHyperParams.from_raw(raw, eta, sigma, trunc_level=c)
    model = ridge.solve(lib, hp, X, Y, Q)
    if config.trace_path is not None:
        trace.to_csv(config.trace_path)
    return model, trace

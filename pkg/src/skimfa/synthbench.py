"""Synthetic regression scenarios and selection/estimation metrics.

Covariates are iid Uniform[-1, 1]; the response depends on the first five
through five trend shapes (linear, sine, logistic, quadratic, exponential)
and their pairwise products.  Main effects are the centered trends and pair
effects the products of centered trends, so the ground truth is itself a
valid functional ANOVA decomposition under the product measure, with every
per-effect variance set exactly (by Gauss-Legendre quadrature) to the
regime's share of the signal variance.  Noise is calibrated so that
R^2 = signal / (signal + noise) hits the target, 0.8 by default.

Evaluation mirrors the usual selection counts plus six estimation buckets:
squared error norms of correctly selected effects, squared norms of missed
true effects, and squared norms of spuriously selected effects, split by
main and pair, all estimated with fresh Monte Carlo draws.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from .anova import AnovaDecomposition

__all__ = ["TREND_NAMES", "Scenario", "GroundTruth", "EvalReport", "generate", "evaluate"]

TRENDS: Dict[str, Callable] = {
    "linear": lambda x: x,
    "sine": lambda x: np.sin(2.0 * np.pi * x),
    "logistic": lambda x: 1.0 / (1.0 + np.exp(-5.0 * x)),
    "quadratic": lambda x: x**2,
    "exponential": lambda x: np.exp(x),
}
TREND_NAMES = tuple(TRENDS)

_REGIMES = ("weak-main", "equal", "main-only")

_QUAD_NODES, _QUAD_WEIGHTS = np.polynomial.legendre.leggauss(80)


def _quad_mean(fn: Callable) -> float:
    # Uniform[-1, 1] density is 1/2.
    return float(np.sum(_QUAD_WEIGHTS * fn(_QUAD_NODES)) / 2.0)


@dataclass(frozen=True)
class Scenario:
    """One synthetic regime: dimensions, effect shares, noise level, seed.

    ``signal_variance = 0`` gives the null scenario (pure unit-variance
    noise, nothing to select), a negative control for the benchmark.
    """

    p: int
    N: int
    regime: str
    r_squared: float = 0.8
    signal_variance: float = 1.0
    seed: int = 0
    trends: Tuple[str, ...] = TREND_NAMES

    def __post_init__(self):
        if self.p < 5:
            raise ValueError(f"scenarios use 5 active covariates, need p >= 5, got {self.p}")
        if self.regime not in _REGIMES:
            raise ValueError(f"regime must be one of {_REGIMES}, got {self.regime!r}")
        if not 0.0 < self.r_squared < 1.0:
            raise ValueError("r_squared must lie in (0, 1)")
        if self.signal_variance < 0:
            raise ValueError("signal_variance must be nonnegative")
        if len(self.trends) != 5:
            raise ValueError("exactly five trend names are required")

    @property
    def active(self) -> Tuple[int, ...]:
        return (0, 1, 2, 3, 4)

    def shares(self) -> Tuple[float, float]:
        """Per-effect signal variance of each main and each pair."""
        sv = self.signal_variance
        if self.regime == "weak-main":
            return 0.01 * sv / 5.0, 0.99 * sv / 10.0
        if self.regime == "equal":
            return 0.5 * sv / 5.0, 0.5 * sv / 10.0
        return sv / 5.0, 0.0

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "N": self.N,
            "regime": self.regime,
            "r_squared": self.r_squared,
            "signal_variance": self.signal_variance,
            "seed": self.seed,
            "trends": list(self.trends),
        }


@dataclass
class GroundTruth:
    """True effect callables with exact quadrature variances."""

    main_effects: Dict[int, Callable]
    pair_effects: Dict[Tuple[int, int], Callable]
    main_variances: Dict[int, float]
    pair_variances: Dict[Tuple[int, int], float]
    signal_variance: float
    noise_variance: float

    @property
    def active(self) -> Tuple[int, ...]:
        idx = set(self.main_effects)
        for pair in self.pair_effects:
            idx.update(pair)
        return tuple(sorted(idx))

    def signal(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0])
        for i, fn in self.main_effects.items():
            out += fn(X[:, i])
        for (i, j), fn in self.pair_effects.items():
            out += fn(X[:, i], X[:, j])
        return out


def generate(scenario: Scenario):
    """Draw (X, Y, truth) for one scenario, deterministically per seed."""
    main_share, pair_share = scenario.shares()
    trends = [TRENDS[name] for name in scenario.trends]
    centered = []
    for fn in trends:
        m = _quad_mean(fn)
        centered.append(lambda x, _fn=fn, _m=m: _fn(x) - _m)
    variances = [_quad_mean(lambda x, _g=g: _g(x) ** 2) for g in centered]

    main_effects, main_variances = {}, {}
    for i, (g, v) in enumerate(zip(centered, variances)):
        main_variances[i] = main_share
        if main_share == 0.0:
            continue
        amp = np.sqrt(main_share / v)
        main_effects[i] = lambda x, _g=g, _a=amp: _a * _g(x)

    pair_effects, pair_variances = {}, {}
    for i, j in itertools.combinations(range(5), 2):
        if pair_share == 0.0:
            pair_variances[(i, j)] = 0.0
            continue
        amp = np.sqrt(pair_share / (variances[i] * variances[j]))
        pair_effects[(i, j)] = (
            lambda xi, xj, _gi=centered[i], _gj=centered[j], _a=amp: _a * _gi(xi) * _gj(xj)
        )
        pair_variances[(i, j)] = pair_share

    if scenario.signal_variance == 0.0:
        noise_variance = 1.0
    else:
        noise_variance = scenario.signal_variance * (1.0 / scenario.r_squared - 1.0)
    truth = GroundTruth(
        main_effects=main_effects,
        pair_effects=pair_effects,
        main_variances=main_variances,
        pair_variances=pair_variances,
        signal_variance=scenario.signal_variance,
        noise_variance=noise_variance,
    )

    cov_seed, noise_seed = np.random.SeedSequence(scenario.seed).spawn(2)
    X = np.random.default_rng(cov_seed).uniform(-1.0, 1.0, size=(scenario.N, scenario.p))
    noise = np.random.default_rng(noise_seed).normal(
        0.0, np.sqrt(noise_variance), size=scenario.N
    )
    Y = truth.signal(X) + noise
    return X, Y, truth


@dataclass
class EvalReport:
    """Selection counts plus the six squared-error buckets."""

    correct_selected: int
    wrong_selected: int
    correct_not_selected: int
    correct_selected_sse_main: float
    correct_not_selected_sse_main: float
    wrong_selected_sse_main: float
    correct_selected_sse_pair: float
    correct_not_selected_sse_pair: float
    wrong_selected_sse_pair: float
    total_sse: float = field(init=False)
    total_sse_over_signal: float = field(init=False)
    signal_variance: float = 0.0

    def __post_init__(self):
        self.total_sse = (
            self.correct_selected_sse_main
            + self.correct_not_selected_sse_main
            + self.wrong_selected_sse_main
            + self.correct_selected_sse_pair
            + self.correct_not_selected_sse_pair
            + self.wrong_selected_sse_pair
        )
        self.total_sse_over_signal = (
            self.total_sse / self.signal_variance if self.signal_variance > 0 else float("nan")
        )

    def to_dict(self) -> dict:
        return {
            "correct_selected": self.correct_selected,
            "wrong_selected": self.wrong_selected,
            "correct_not_selected": self.correct_not_selected,
            "correct_selected_sse_main": self.correct_selected_sse_main,
            "correct_not_selected_sse_main": self.correct_not_selected_sse_main,
            "wrong_selected_sse_main": self.wrong_selected_sse_main,
            "correct_selected_sse_pair": self.correct_selected_sse_pair,
            "correct_not_selected_sse_pair": self.correct_not_selected_sse_pair,
            "wrong_selected_sse_pair": self.wrong_selected_sse_pair,
            "total_sse": self.total_sse,
            "total_sse_over_signal": self.total_sse_over_signal,
            "signal_variance": self.signal_variance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    CSV_FIELDS = (
        "correct_selected",
        "wrong_selected",
        "correct_not_selected",
        "correct_selected_sse_main",
        "correct_not_selected_sse_main",
        "wrong_selected_sse_main",
        "correct_selected_sse_pair",
        "correct_not_selected_sse_pair",
        "wrong_selected_sse_pair",
        "total_sse",
        "total_sse_over_signal",
    )

    def csv_row(self) -> list:
        d = self.to_dict()
        return [d[k] for k in self.CSV_FIELDS]


def evaluate(
    decomp: AnovaDecomposition,
    truth: GroundTruth,
    selected,
    mc_points: int = 100_000,
    rng=None,
) -> EvalReport:
    """Score a decomposition against the ground truth.

    Norms are Monte Carlo estimates over ``mc_points`` fresh Uniform[-1, 1]
    draws, matching the independent covariate law of the scenarios.  Pair
    buckets treat a pair as selected when both endpoints are selected and as
    a true pair when its ground-truth variance is nonzero.
    """
    rng = np.random.default_rng(rng)
    selected = set(int(i) for i in selected)
    true_mains = {i for i, v in truth.main_variances.items() if v > 0}
    true_pairs = {V for V, v in truth.pair_variances.items() if v > 0}
    active = set(truth.active)

    n_correct = len(selected & active)
    n_wrong = len(selected - active)
    n_missed = len(active - selected)

    def sq_norm_main(fn: Callable) -> float:
        x = rng.uniform(-1.0, 1.0, size=mc_points)
        return float(np.mean(fn(x) ** 2))

    def sq_err_main(fa: Callable, fb: Callable) -> float:
        x = rng.uniform(-1.0, 1.0, size=mc_points)
        return float(np.mean((fa(x) - fb(x)) ** 2))

    def sq_norm_pair(fn: Callable) -> float:
        xy = rng.uniform(-1.0, 1.0, size=(mc_points, 2))
        return float(np.mean(fn(xy) ** 2))

    def sq_err_pair(est: Callable, true_fn: Callable) -> float:
        xy = rng.uniform(-1.0, 1.0, size=(mc_points, 2))
        return float(np.mean((est(xy) - true_fn(xy[:, 0], xy[:, 1])) ** 2))

    cs_main = cns_main = ws_main = 0.0
    for i in sorted(true_mains):
        true_fn = truth.main_effects[i]
        if i in selected:
            est = decomp.effects.get((i,), _zero_main)
            cs_main += sq_err_main(lambda v, _e=est: _as_main(_e, v), true_fn)
        else:
            cns_main += sq_norm_main(true_fn)
    for i in sorted(selected - active):
        est = decomp.effects.get((i,))
        if est is not None:
            ws_main += sq_norm_main(lambda v, _e=est: _as_main(_e, v))

    cs_pair = cns_pair = ws_pair = 0.0
    for i, j in sorted(true_pairs):
        if i in selected and j in selected:
            est = decomp.effects.get((i, j), _zero_pair)
            cs_pair += sq_err_pair(est, truth.pair_effects[(i, j)])
        else:
            true_fn = truth.pair_effects[(i, j)]
            cns_pair += sq_norm_pair(lambda xy, _f=true_fn: _f(xy[:, 0], xy[:, 1]))
    for i, j in itertools.combinations(sorted(selected), 2):
        if (i, j) in true_pairs:
            continue
        est = decomp.effects.get((i, j))
        if est is not None:
            ws_pair += sq_norm_pair(est)

    return EvalReport(
        correct_selected=n_correct,
        wrong_selected=n_wrong,
        correct_not_selected=n_missed,
        correct_selected_sse_main=cs_main,
        correct_not_selected_sse_main=cns_main,
        wrong_selected_sse_main=ws_main,
        correct_selected_sse_pair=cs_pair,
        correct_not_selected_sse_pair=cns_pair,
        wrong_selected_sse_pair=ws_pair,
        signal_variance=truth.signal_variance,
    )


def _zero_main(values):
    return np.zeros(np.atleast_1d(np.asarray(values, dtype=float)).shape[0])


def _zero_pair(values):
    vals = np.asarray(values, dtype=float)
    return np.zeros(vals.shape[0])


def _as_main(effect: Callable, values) -> np.ndarray:
    return effect(np.atleast_1d(np.asarray(values, dtype=float)))

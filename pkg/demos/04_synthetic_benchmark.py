"""Desk-scale benchmark: selection counts and estimation-error buckets.

Runs the three synthetic regimes at a reduced size (p = 60, N = 800) and
reports the standard metrics: how many covariates were selected correctly,
wrongly, or missed, and the six squared-error buckets split by main and pair
effects.  The full-scale setting from the acceptance suite uses p = 250,
N = 1000 with 2000 iterations.
"""

import time

import numpy as np

from skimfa import Scenario, TrainConfig, decompose, evaluate, fit, generate, select

COLUMNS = ("regime", "correct", "wrong", "missed", "tsse/signal", "minutes")
print(("{:>12}" * len(COLUMNS)).format(*COLUMNS))

for regime in ("weak-main", "equal", "main-only"):
    scenario = Scenario(p=60, N=800, regime=regime, seed=1)
    X, Y, truth = generate(scenario)
    start = time.perf_counter()
    model, _ = fit(X, Y, Q=2, config=TrainConfig(num_iters=800, seed=1))
    minutes = (time.perf_counter() - start) / 60.0
    chosen = select(model.hp)
    report = evaluate(
        decompose(model), truth, chosen, mc_points=50_000,
        rng=np.random.default_rng(1),
    )
    print(
        "{:>12}{:>12d}{:>12d}{:>12d}{:>12.3f}{:>12.1f}".format(
            regime,
            report.correct_selected,
            report.wrong_selected,
            report.correct_not_selected,
            report.total_sse_over_signal,
            minutes,
        )
    )

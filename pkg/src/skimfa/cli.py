"""Batch command-line front end.

Subcommands: fit, predict, select, decompose, bench, generate.  Every run
writes a manifest (config, seed, package fingerprint) next to its outputs so
it can be replayed; reruns with the same inputs are byte-identical.  Exit
codes: 0 success, 2 user or config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, anova, ridge, synthbench, trainer
from .basis import BasisError, PolynomialSpec, SplineSpec
from .ridge import FittedModel


class UserError(Exception):
    """Invalid input or configuration; maps to exit code 2."""


def _read_numeric_csv(path: str, target):
    """Parse a CSV with header into covariates and (optional) response.

    ``target`` names the response column; pass None to treat every column as
    a covariate.  Raises UserError with row/column diagnostics for
    non-numeric cells or a non-finite response.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise UserError(f"{path}: empty file") from None
            rows = list(reader)
    except OSError as err:
        raise UserError(f"cannot read {path}: {err}") from err
    header = [h.strip() for h in header]
    t_col = None
    if target is not None:
        if target not in header:
            raise UserError(f"{path}: target column {target!r} not in header {header}")
        t_col = header.index(target)
    if not rows:
        raise UserError(f"{path}: no data rows")
    data = np.empty((len(rows), len(header)))
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise UserError(
                f"{path}: row {r + 2} has {len(row)} cells, header has {len(header)}"
            )
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise UserError(
                    f"{path}: non-numeric cell at row {r + 2}, column {header[c]!r}: "
                    f"{cell!r}"
                ) from None
    if t_col is None:
        return data, None, header
    Y = data[:, t_col]
    if not np.all(np.isfinite(Y)):
        r = int(np.nonzero(~np.isfinite(Y))[0][0])
        raise UserError(f"{path}: non-finite response at row {r + 2}")
    keep = [c for c in range(len(header)) if c != t_col]
    return data[:, keep], Y, [header[c] for c in keep]


def _json_bytes(payload: dict) -> bytes:
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()


def _write_manifest(out_dir: Path, command: str, config: dict, outputs: list,
                    self_check: dict | None = None) -> None:
    manifest = {
        "command": command,
        "config": config,
        "outputs": sorted(outputs),
        "package": {"name": "skimfa", "version": __version__},
    }
    if self_check is not None:
        manifest["self_check"] = self_check
    (out_dir / "manifest.json").write_bytes(_json_bytes(manifest))


def _basis_from_args(args) -> object:
    if args.basis == "spline":
        return SplineSpec(num_knots=args.knots)
    if args.basis.startswith("poly:"):
        return PolynomialSpec(degree=int(args.basis.split(":", 1)[1]))
    raise UserError(f"unknown basis {args.basis!r}; use 'spline' or 'poly:<degree>'")


def _train_config(args, n: int) -> trainer.TrainConfig:
    m = int(round(args.holdout_frac * n))
    return trainer.TrainConfig(
        num_iters=args.iters,
        learning_rate=args.lr,
        holdout_size=m,
        seed=args.seed,
    )


def _load_model(path: str) -> FittedModel:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise UserError(f"cannot load model {path}: {err}") from err
    try:
        return FittedModel.from_json_dict(payload)
    except (KeyError, ValueError) as err:
        raise UserError(f"malformed model file {path}: {err}") from err


def _cmd_fit(args) -> int:
    X, Y, columns = _read_numeric_csv(args.input, args.target)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = _basis_from_args(args)
    config = _train_config(args, X.shape[0])
    model, trace = trainer.fit(X, Y, spec=spec, Q=args.q, config=config)

    payload = model.to_json_dict()
    payload["columns"] = columns
    (out_dir / "model.json").write_bytes(_json_bytes(payload))
    chosen = anova.select(model.hp)
    (out_dir / "selected.json").write_bytes(
        _json_bytes({"indices": list(chosen), "columns": [columns[i] for i in chosen]})
    )
    trace.to_csv(out_dir / "trace.csv")
    _write_manifest(
        out_dir,
        "fit",
        {
            "input": args.input,
            "target": args.target,
            "q": args.q,
            "basis": args.basis,
            "knots": args.knots,
            "iters": args.iters,
            "lr": args.lr,
            "holdout_frac": args.holdout_frac,
            "seed": args.seed,
        },
        ["model.json", "selected.json", "trace.csv"],
    )
    print(f"fit: {X.shape[0]} rows, {X.shape[1]} covariates; selected {len(chosen)}")
    return 0


def _cmd_predict(args) -> int:
    model = _load_model(args.model)
    X, _, _ = _read_numeric_csv(args.input, args.target)
    if X.shape[1] != model.train_X.shape[1]:
        raise UserError(
            f"model expects {model.train_X.shape[1]} covariates, input has {X.shape[1]}"
        )
    preds = ridge.predict(model, X)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prediction"])
        for v in preds:
            writer.writerow([repr(float(v))])
    print(f"predict: wrote {preds.size} predictions to {out}")
    return 0


def _cmd_select(args) -> int:
    model = _load_model(args.model)
    chosen = anova.select(model.hp)
    for i in chosen:
        print(i)
    if args.out:
        Path(args.out).write_bytes(_json_bytes({"indices": list(chosen)}))
    return 0


def _grid(lo: float, hi: float, num: int) -> np.ndarray:
    return np.linspace(lo, hi, num)


def _cmd_decompose(args) -> int:
    model = _load_model(args.model)
    if args.measure == "joint" and model.Q != 2:
        raise UserError(f"joint measure requires Q = 2, model has Q = {model.Q}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    decomp = anova.decompose(model)
    rng = np.random.default_rng(args.seed)
    if args.measure == "joint":
        sampler = anova.empirical_joint_sampler(model.train_X, rng)
        decomp = anova.change_basis(model, decomp, sampler, args.mc_samples)

    outputs = []
    for subset, effect in sorted(decomp.effects.items()):
        cols = [model.train_X[:, i] for i in subset]
        if len(subset) == 1:
            xs = _grid(cols[0].min(), cols[0].max(), args.grid)
            name = f"effect_main_{subset[0]}.csv"
            with open(out_dir / name, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"x{subset[0]}", "effect"])
                for x, v in zip(xs, effect(xs)):
                    writer.writerow([repr(float(x)), repr(float(v))])
        else:
            i, j = subset
            xi = _grid(cols[0].min(), cols[0].max(), args.grid)
            xj = _grid(cols[1].min(), cols[1].max(), args.grid)
            grid = np.array([[a, b] for a in xi for b in xj])
            vals = effect(grid)
            name = f"effect_pair_{i}_{j}.csv"
            with open(out_dir / name, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"x{i}", f"x{j}", "effect"])
                for (a, b), v in zip(grid, vals):
                    writer.writerow([repr(float(a)), repr(float(b)), repr(float(v))])
        outputs.append(name)

    if args.measure == "joint":
        share_rows = anova.empirical_joint_sampler(model.train_X, rng)(args.mc_samples)
    else:
        share_rows = anova.empirical_product_sampler(model.train_X, rng)(args.mc_samples)
    shares = anova.variance_decomposition(decomp, share_rows)
    share_payload = {
        "measure": decomp.measure,
        "intercept": decomp.intercept,
        "variances": {"+".join(map(str, V)): v for V, v in shares.variances.items()},
        "shares": {"+".join(map(str, V)): v for V, v in shares.shares.items()},
        "sum_of_variances": shares.sum_of_variances,
        "variance_of_sum": shares.variance_of_sum,
    }
    (out_dir / "variance_shares.json").write_bytes(_json_bytes(share_payload))
    outputs.append("variance_shares.json")

    check_rows = model.train_X[: min(100, model.train_X.shape[0])]
    gap = float(
        np.max(np.abs(decomp.predict(check_rows) - ridge.predict(model, check_rows)))
    ) if check_rows.size else 0.0
    _write_manifest(
        out_dir,
        "decompose",
        {
            "model": args.model,
            "measure": args.measure,
            "mc_samples": args.mc_samples,
            "grid": args.grid,
            "seed": args.seed,
        },
        outputs,
        self_check={"sum_identity_max_abs_gap": gap},
    )
    print(f"decompose: {len(decomp.effects)} effects ({decomp.measure} measure), "
          f"sum-identity gap {gap:.3e}")
    return 0


def _load_scenario_config(path: str) -> dict:
    p = Path(path)
    try:
        if p.suffix == ".toml":
            try:
                import tomllib  # py311+
            except ModuleNotFoundError:
                import tomli as tomllib
            payload = tomllib.loads(p.read_text())
        else:
            payload = json.loads(p.read_text())
    except (OSError, ValueError) as err:
        raise UserError(f"cannot parse scenario config {path}: {err}") from err
    if not isinstance(payload, dict):
        raise UserError(f"{path}: scenario config must be a table/object")
    return payload


def _scenario_from_config(cfg: dict) -> synthbench.Scenario:
    try:
        return synthbench.Scenario(
            p=int(cfg["p"]),
            N=int(cfg["N"]),
            regime=cfg["regime"],
            r_squared=float(cfg.get("r_squared", 0.8)),
            signal_variance=float(cfg.get("signal_variance", 1.0)),
            seed=int(cfg.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise UserError(f"bad scenario config: {err}") from err


def _cmd_generate(args) -> int:
    cfg = _load_scenario_config(args.scenario)
    scenario = _scenario_from_config(cfg)
    X, Y, truth = synthbench.generate(scenario)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "data.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(scenario.p)] + ["y"])
        for row, y in zip(X, Y):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])
    (out_dir / "truth.json").write_bytes(
        _json_bytes(
            {
                "scenario": scenario.to_dict(),
                "main_variances": {str(i): v for i, v in truth.main_variances.items()},
                "pair_variances": {f"{i}+{j}": v for (i, j), v in truth.pair_variances.items()},
                "noise_variance": truth.noise_variance,
            }
        )
    )
    _write_manifest(out_dir, "generate", {"scenario": cfg}, ["data.csv", "truth.json"])
    print(f"generate: wrote {scenario.N} rows, {scenario.p} covariates")
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_scenario_config(args.scenario)
    scenario = _scenario_from_config(cfg)
    X, Y, truth = synthbench.generate(scenario)
    config = _train_config(args, scenario.N)
    model, trace = trainer.fit(X, Y, spec=_basis_from_args(args), Q=args.q, config=config)
    chosen = anova.select(model.hp)
    decomp = anova.decompose(model)
    report = synthbench.evaluate(
        decomp, truth, chosen, mc_points=args.mc_samples,
        rng=np.random.default_rng(args.seed),
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_bytes(_json_bytes(report.to_dict()))
    with open(out_dir / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("regime", "p", "N", "seed") + report.CSV_FIELDS)
        writer.writerow(
            [scenario.regime, scenario.p, scenario.N, scenario.seed] + report.csv_row()
        )
    trace.to_csv(out_dir / "trace.csv")
    _write_manifest(
        out_dir,
        "bench",
        {
            "scenario": cfg,
            "q": args.q,
            "knots": args.knots,
            "iters": args.iters,
            "lr": args.lr,
            "holdout_frac": args.holdout_frac,
            "seed": args.seed,
            "mc_samples": args.mc_samples,
        },
        ["report.json", "report.csv", "trace.csv"],
    )
    print(
        f"bench[{scenario.regime}]: correct={report.correct_selected} "
        f"wrong={report.wrong_selected} missed={report.correct_not_selected} "
        f"total_sse/signal={report.total_sse_over_signal:.3f}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skimfa",
        description="Sparse nonlinear regression with interactions and "
        "functional ANOVA reporting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_train_flags(p):
        p.add_argument("--q", type=int, default=2, help="max interaction order")
        p.add_argument("--basis", default="spline", help="'spline' or 'poly:<degree>'")
        p.add_argument("--knots", type=int, default=5, help="spline knots per covariate")
        p.add_argument("--iters", type=int, default=2000, help="gradient steps")
        p.add_argument("--lr", type=float, default=0.1, help="learning rate")
        p.add_argument("--holdout-frac", type=float, default=0.2,
                       help="fraction of rows held out per CV split")
        p.add_argument("--seed", type=int, default=0)

    p_fit = sub.add_parser("fit", help="fit a model from a CSV file")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--target", required=True, help="response column name")
    add_train_flags(p_fit)
    p_fit.add_argument("--out", required=True, help="output directory")
    p_fit.set_defaults(func=_cmd_fit)

    p_pred = sub.add_parser("predict", help="predict with a saved model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--input", required=True)
    p_pred.add_argument("--target", default=None,
                        help="response column to drop from the input CSV, if any")
    p_pred.add_argument("--out", required=True, help="output CSV path")
    p_pred.set_defaults(func=_cmd_predict)

    p_sel = sub.add_parser("select", help="print selected covariates of a model")
    p_sel.add_argument("--model", required=True)
    p_sel.add_argument("--out", default=None)
    p_sel.set_defaults(func=_cmd_select)

    p_dec = sub.add_parser("decompose", help="export effect grids and variance shares")
    p_dec.add_argument("--model", required=True)
    p_dec.add_argument("--measure", choices=("product", "joint"), default="product")
    p_dec.add_argument("--mc-samples", type=int, default=100_000)
    p_dec.add_argument("--grid", type=int, default=101, help="grid points per axis")
    p_dec.add_argument("--seed", type=int, default=0)
    p_dec.add_argument("--out", required=True)
    p_dec.set_defaults(func=_cmd_decompose)

    p_gen = sub.add_parser("generate", help="write a synthetic scenario to CSV")
    p_gen.add_argument("--scenario", required=True, help="JSON or TOML scenario config")
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_generate)

    p_bench = sub.add_parser("bench", help="run one synthetic benchmark end to end")
    p_bench.add_argument("--scenario", required=True)
    add_train_flags(p_bench)
    p_bench.add_argument("--mc-samples", type=int, default=100_000)
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UserError, BasisError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line surface: CSV ingestion, config handling and the four commands.

Commands: ``qut``, ``fit``, ``predict``, ``simulate``.  All machine-readable
results go to files (or standard output) as JSON; sweep rows additionally as
CSV.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .activations import ActivationSpec
from .errors import ConfigError, DataError, NumericalError, SparseAnnError
from .network import Dataset, NetworkShape, Theta, forward, predict_class
from .qut import QutConfig, compute_qut
from .simulate import SimConfig, run_sweep
from .solver import FitResult, SolverConfig, fit

_CONFIG_SECTIONS = {"task", "shape", "qut", "solver", "io", "seed"}
_SHAPE_KEYS = {"hidden", "link", "activation"}
_QUT_KEYS = {"alpha", "mc_samples", "seed"}
_SOLVER_KEYS = {"lr_descent", "descent_epochs", "prox_max_iter", "prox_tol",
                "init_scale", "seed"}
_IO_KEYS = {"data", "response", "out"}


def _reject_unknown(d: dict, allowed: set, where: str):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_run_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(cfg, _CONFIG_SECTIONS, "config")
    for key, allowed in (
        ("shape", _SHAPE_KEYS),
        ("qut", _QUT_KEYS),
        ("solver", _SOLVER_KEYS),
        ("io", _IO_KEYS),
    ):
        if key in cfg:
            if not isinstance(cfg[key], dict):
                raise ConfigError(f"config section {key!r} must be an object")
            _reject_unknown(cfg[key], allowed, f"config.{key}")
    if "task" in cfg and cfg["task"] not in ("regression", "classification"):
        raise ConfigError(f"unknown task {cfg['task']!r}")
    return cfg


def load_csv(path, response: str, task: str) -> Dataset:
    """Read an RFC-4180 CSV with a header row into a Dataset.

    ``response`` names the response column (regression) or the label column
    (classification; labels map to one-hot in first-appearance order).
    Every other column is a numeric feature, kept in header order.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file")
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read data file: {exc}")
    if response not in header:
        raise DataError(f"response column {response!r} not found in header")
    y_idx = header.index(response)
    feature_names = [h for i, h in enumerate(header) if i != y_idx]
    if not rows:
        raise DataError(f"{path}: no data rows")

    n = len(rows)
    X = np.empty((n, len(feature_names)))
    y_raw = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r + 2} has {len(row)} cells, "
                            f"expected {len(header)}")
        col = 0
        for i, cell in enumerate(row):
            if i == y_idx:
                y_raw.append(cell.strip())
                continue
            cell = cell.strip()
            if cell == "":
                raise DataError(f"{path}: missing value at row {r + 2}, "
                                f"column {header[i]!r}")
            try:
                X[r, col] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell {cell!r} at "
                                f"row {r + 2}, column {header[i]!r}")
            col += 1

    if task == "regression":
        try:
            Y = np.array([[float(v)] for v in y_raw])
        except ValueError:
            raise DataError(f"regression response column {response!r} must be numeric")
        return Dataset(X=X, Y=Y, task="regression", feature_names=feature_names)

    labels = []
    for v in y_raw:
        if v == "":
            raise DataError(f"missing label in column {response!r}")
        if v not in labels:
            labels.append(v)
    Y = np.zeros((n, len(labels)))
    for r, v in enumerate(y_raw):
        Y[r, labels.index(v)] = 1.0
    return Dataset(X=X, Y=Y, task="classification",
                   feature_names=feature_names, class_labels=labels)


def _shape_from_config(cfg: dict, p1: int, m: int, task: str) -> NetworkShape:
    shape_cfg = cfg.get("shape", {})
    hidden = shape_cfg.get("hidden", [20])
    if not hidden or any(int(h) < 1 for h in hidden):
        raise ConfigError("shape.hidden must be a nonempty list of positive widths")
    link = shape_cfg.get("link")
    if link is None:
        link = "identity" if task == "regression" else "softmax"
    act_cfg = shape_cfg.get("activation")
    if act_cfg is None:
        activation = ActivationSpec()
    elif isinstance(act_cfg, list):
        activation = tuple(ActivationSpec.from_dict(a) for a in act_cfg)
    else:
        activation = ActivationSpec.from_dict(act_cfg)
    try:
        return NetworkShape.make((p1, *[int(h) for h in hidden], m), link, activation)
    except ValueError as exc:
        raise ConfigError(str(exc))


def _qut_config(cfg: dict, args) -> QutConfig:
    qcfg = dict(cfg.get("qut", {}))
    if args.alpha is not None:
        qcfg["alpha"] = args.alpha
    if args.mc_samples is not None:
        qcfg["mc_samples"] = args.mc_samples
    qcfg.setdefault("seed", _seed_of(cfg, args))
    try:
        return QutConfig(**qcfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid qut config: {exc}")


def _solver_config(cfg: dict, args) -> SolverConfig:
    scfg = dict(cfg.get("solver", {}))
    scfg.setdefault("seed", _seed_of(cfg, args))
    try:
        return SolverConfig(**scfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver config: {exc}")


def _seed_of(cfg: dict, args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return int(cfg.get("seed", 0))


def _resolve_io(cfg: dict, args, need_data=True):
    io = cfg.get("io", {})
    data = args.data or io.get("data")
    response = args.response or io.get("response")
    out = args.out or io.get("out")
    if need_data:
        if not data:
            raise ConfigError("no data file given (--data or io.data)")
        if not response:
            raise ConfigError("no response column given (--response or io.response)")
    return data, response, out


def _task_of(cfg: dict, args) -> str:
    task = getattr(args, "task", None) or cfg.get("task")
    if task is None:
        raise ConfigError("no task given (--task or config task)")
    return task


def _emit(payload: dict, out):
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_qut(args) -> int:
    cfg = load_run_config(args.config) if args.config else {}
    task = _task_of(cfg, args)
    data, response, out = _resolve_io(cfg, args)
    dataset = load_csv(data, response, task)
    shape = _shape_from_config(cfg, dataset.n_features, dataset.n_outputs, task)
    result = compute_qut(dataset, shape, _qut_config(cfg, args))
    _emit(result.to_dict(), out)
    return 0


def cmd_fit(args) -> int:
    cfg = load_run_config(args.config) if args.config else {}
    task = _task_of(cfg, args)
    data, response, out = _resolve_io(cfg, args)
    dataset = load_csv(data, response, task)
    shape = _shape_from_config(cfg, dataset.n_features, dataset.n_outputs, task)
    if args.lam is not None:
        lam = args.lam
        qut_info = None
    else:
        qut = compute_qut(dataset, shape, _qut_config(cfg, args))
        lam = qut.lambda_qut
        qut_info = {"lambda_qut": qut.lambda_qut, "alpha": qut.alpha,
                    "mc_samples": qut.mc_samples, "seed": qut.seed}
    result = fit(shape, dataset, lam, _solver_config(cfg, args))
    payload = result.to_dict(shape)
    payload["task"] = task
    payload["qut"] = qut_info
    payload["feature_names"] = dataset.feature_names
    payload["class_labels"] = dataset.class_labels
    # 1-based indices with original header names for human consumption
    payload["support"] = [j + 1 for j in result.support]
    payload["support_features"] = [dataset.feature_names[j] for j in result.support]
    _emit(payload, out)
    return 0


def cmd_predict(args) -> int:
    if not args.model:
        raise ConfigError("predict needs --model (a saved fit result)")
    try:
        with open(args.model) as fh:
            saved = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model file: {exc}")
    shape = NetworkShape.from_dict(saved["shape"])
    theta = Theta.from_dict(saved["theta"])
    task = saved.get("task", "regression")
    feature_names = saved.get("feature_names")
    if not args.data:
        raise ConfigError("predict needs --data")

    X, used_names = _load_feature_csv(args.data, feature_names,
                                      drop=args.response)
    mu = forward(shape, theta, X)
    payload = {"predictions": mu.tolist(), "feature_names": used_names}
    if task == "classification":
        idx = predict_class(shape, theta, X)
        labels = saved.get("class_labels")
        payload["class_index"] = [int(i) for i in idx]
        if labels:
            payload["class_label"] = [labels[i] for i in idx]
    _emit(payload, args.out)
    return 0


def _load_feature_csv(path, feature_names, drop=None):
    """Feature matrix from a CSV, selecting the model's columns by name."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file")
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read data file: {exc}")
    if feature_names:
        missing = [f for f in feature_names if f not in header]
        if missing:
            raise DataError(f"{path}: missing feature columns {missing}")
        idxs = [header.index(f) for f in feature_names]
        names = list(feature_names)
    else:
        idxs = [i for i, h in enumerate(header) if h != drop]
        names = [header[i] for i in idxs]
    X = np.empty((len(rows), len(idxs)))
    for r, row in enumerate(rows):
        for c, i in enumerate(idxs):
            cell = row[i].strip() if i < len(row) else ""
            if cell == "":
                raise DataError(f"{path}: missing value at row {r + 2}, "
                                f"column {header[i]!r}")
            try:
                X[r, c] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell {cell!r} at "
                                f"row {r + 2}, column {header[i]!r}")
    return X, names


def cmd_simulate(args) -> int:
    cfg = load_run_config(args.config) if args.config else {}
    seed = _seed_of(cfg, args)
    kind = args.sim_kind or "linear"
    if args.s_grid:
        try:
            s_values = tuple(int(s) for s in args.s_grid.split(","))
        except ValueError:
            raise ConfigError(f"bad --s-grid {args.s_grid!r}")
    else:
        s_values = (0,)
    kw = {"s_values": s_values, "repetitions": args.reps or 100, "seed": seed}
    if args.n is not None:
        kw["n"] = args.n
    if args.p1 is not None:
        kw["p1"] = args.p1
    sim = SimConfig.linear(**kw) if kind == "linear" else SimConfig.absdiff(**kw)

    def shape_for(p1):
        return _shape_from_config(cfg, p1, 1, "regression")

    report = run_sweep(sim, shape_for, _qut_config(cfg, args),
                       _solver_config(cfg, args))
    out = args.out or (cfg.get("io", {}) or {}).get("out")
    if out:
        base = Path(out)
        json_path = base if base.suffix == ".json" else base.with_suffix(".json")
        csv_path = json_path.with_suffix(".csv")
        report.write_json(json_path)
        report.write_csv(csv_path)
    else:
        print(json.dumps(report.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparseann",
        description="Sparse-input neural networks with quantile-threshold "
                    "penalty selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_data=True):
        p.add_argument("--config", help="JSON run-config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--mc-samples", dest="mc_samples", type=int, default=None)
        p.add_argument("--out", default=None, help="output file (default stdout)")
        if with_data:
            p.add_argument("--data", default=None, help="CSV data file")
            p.add_argument("--response", default=None, help="response/label column")
            p.add_argument("--task", choices=("regression", "classification"),
                           default=None)

    p_qut = sub.add_parser("qut", help="compute the penalty threshold")
    common(p_qut)
    p_qut.set_defaults(func=cmd_qut)

    p_fit = sub.add_parser("fit", help="select the penalty and fit")
    common(p_fit)
    p_fit.add_argument("--lambda", dest="lam", type=float, default=None,
                       help="skip threshold selection and use this penalty")
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="apply a saved fit to new data")
    p_pred.add_argument("--model", required=True, help="saved fit JSON")
    p_pred.add_argument("--data", required=True, help="CSV with feature columns")
    p_pred.add_argument("--response", default=None,
                        help="column to ignore if present")
    p_pred.add_argument("--out", default=None)
    p_pred.set_defaults(func=cmd_predict)

    p_sim = sub.add_parser("simulate", help="run a support-recovery sweep")
    common(p_sim, with_data=False)
    p_sim.add_argument("--sim-kind", choices=("linear", "absdiff"), default=None)
    p_sim.add_argument("--s-grid", default=None, help="comma-separated sparsities")
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--p1", type=int, default=None)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, SparseAnnError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

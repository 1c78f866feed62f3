"""Configuration-driven command line entry point.

Every command reads one flat JSON document (kebab-case keys), resolves
defaults, echoes the resolved configuration into its outputs for
provenance, and writes deterministic CSV/JSON/SVG files.  Unknown
configuration keys are rejected.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, datagen, svgplot
from .circuits import build_template
from .dropout import DropoutConfig, max_drop_params, rescale_params
from .training import (GRID_CSV_HEADER, TrainConfig, evaluate_params,
                       grid_csv_rows, grid_search, multi_run, train)


class ConfigError(ValueError):
    pass


_COMMON_KEYS = {
    "task", "layers", "epochs", "learning-rate", "strategy", "p-l", "p-r",
    "p-e", "rescale-k", "base-seed", "n-runs", "data-seed", "split-seed",
}
_ALLOWED_KEYS = {
    "train": _COMMON_KEYS,
    "gridsearch": _COMMON_KEYS | {"p-l-grid", "p-r-grid", "p-e-grid"},
    "analyze": {"kind", "family", "task", "layers", "layer-min", "layer-max",
                "n-theta", "n-param-vectors", "n-bins", "n-data", "strategy",
                "p-l", "p-r", "p-e", "seed", "data-seed", "split-seed"},
    "rescale-eval": _COMMON_KEYS | {"k-grid"},
    "plot": {"inputs", "mode", "x-column", "columns", "label-column",
             "mean-column", "std-column", "output"},
}


def _load_config(path: str, command: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _ALLOWED_KEYS[command]
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return doc


def _parse_k(value):
    if value is None:
        return None
    if value == "inf":
        return math.inf
    return float(value)


def _dropout_from(doc: dict) -> DropoutConfig:
    return DropoutConfig(strategy=doc.get("strategy", "none"),
                         p_L=float(doc.get("p-l", 0.0)),
                         p_R=float(doc.get("p-r", 0.0)),
                         p_E=float(doc.get("p-e", 0.0)))


def _train_config(doc: dict, seeds_override=None) -> TrainConfig:
    cfg = TrainConfig(
        task=doc.get("task", "sin"),
        n_layers=doc.get("layers"),
        learning_rate=float(doc.get("learning-rate", 0.01)),
        epochs=doc.get("epochs"),
        dropout=_dropout_from(doc),
        rescale_k=_parse_k(doc.get("rescale-k")),
        base_seed=int(doc.get("base-seed", 0)),
        n_runs=int(doc.get("n-runs", 10)),
    )
    if seeds_override:
        cfg.base_seed = seeds_override[0]
        cfg.n_runs = len(seeds_override)
    return cfg


def _dataset_for(doc: dict, task: str) -> datagen.PreparedDataset:
    return datagen.prepare(task, data_seed=int(doc.get("data-seed", 0)),
                           split_seed=int(doc.get("split-seed", 1)))


def _resolved(doc: dict, command: str, extra: dict | None = None) -> dict:
    resolved = {"command": command}
    resolved.update(doc)
    if extra:
        resolved.update(extra)
    return resolved


def _write(path: Path, text: str, dry_run: bool):
    if dry_run:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _parse_seeds(arg):
    if not arg:
        return None
    return [int(s) for s in arg.split(",") if s]


def cmd_train(args) -> int:
    doc = _load_config(args.config, "train")
    seeds = _parse_seeds(args.seeds)
    cfg = _train_config(doc, seeds)
    dataset = _dataset_for(doc, cfg.task)
    resolved = _resolved(doc, "train", {
        "resolved-layers": cfg.n_layers, "resolved-epochs": cfg.epochs,
        "seeds": seeds or [cfg.base_seed + i for i in range(cfg.n_runs)]})
    if args.dry_run:
        print(json.dumps(resolved, indent=2))
        return 0
    out = Path(args.out)
    run_seeds = seeds or [cfg.base_seed + i for i in range(cfg.n_runs)]
    for seed in run_seeds:
        mask_log = [] if args.audit_masks else None
        run = train(cfg, dataset, seed, mask_log=mask_log)
        payload = json.loads(run.to_json())
        payload["resolved_config"] = resolved
        _write(out / f"run_{seed}.json", json.dumps(payload, indent=2), False)
        rows = ["epoch,train_loss,test_loss"]
        for i, (tr, te) in enumerate(zip(run.train_loss, run.test_loss)):
            rows.append(f"{i},{tr:.10g},{te:.10g}")
        _write(out / f"curve_{seed}.csv", "\n".join(rows) + "\n", False)
        if mask_log is not None:
            lines = [json.dumps(entry) for entry in mask_log]
            _write(out / f"masks_{seed}.jsonl", "\n".join(lines) + "\n", False)
        print(f"seed {seed}: final train {run.final_train_loss:.4g} "
              f"test {run.final_test_loss:.4g}")
    return 0


def cmd_gridsearch(args) -> int:
    doc = _load_config(args.config, "gridsearch")
    seeds = _parse_seeds(args.seeds)
    cfg = _train_config(doc, seeds)
    p_l = doc.get("p-l-grid")
    if not p_l:
        raise ConfigError("gridsearch needs a non-empty p-l-grid")
    p_r = doc.get("p-r-grid")
    p_e = doc.get("p-e-grid")
    resolved = _resolved(doc, "gridsearch")
    if args.dry_run:
        print(json.dumps(resolved, indent=2))
        return 0
    dataset = _dataset_for(doc, cfg.task)
    cells = grid_search(cfg, dataset, p_l, p_r, p_e)
    out = Path(args.out)
    _write(out / "gridsearch.csv",
           "\n".join(grid_csv_rows(cells, cfg.rescale_k)) + "\n", False)
    best = cells[0]
    _write(out / "best.json", json.dumps({
        "resolved_config": resolved,
        "strategy": best.strategy, "p_L": best.p_L, "p_R": best.p_R,
        "p_E": best.p_E, "mean_test": best.aggregate.mean_test,
        "std_test": best.aggregate.std_test,
    }, indent=2), False)
    print(f"best cell: p_L={best.p_L} p_R={best.p_R} p_E={best.p_E} "
          f"mean test {best.aggregate.mean_test:.4g}")
    return 0


def cmd_analyze(args) -> int:
    doc = _load_config(args.config, "analyze")
    kind = doc.get("kind")
    if kind not in ("overparam", "expressibility", "entanglement"):
        raise ConfigError("analyze kind must be overparam, expressibility "
                          "or entanglement")
    task = doc.get("task", "sin")
    family = doc.get("family", "classification" if task == "moons"
                     else "regression")
    n_data = int(doc.get("n-data", analysis.DEFAULT_POOL_INPUTS))
    dataset = _dataset_for(doc, task)
    x_train, _ = dataset.train_arrays()
    inputs = x_train[:n_data]
    rng = np.random.default_rng(int(doc.get("seed", 0)))
    resolved = _resolved(doc, "analyze", {"family": family})
    if args.dry_run:
        print(json.dumps(resolved, indent=2))
        return 0
    out = Path(args.out)
    if kind == "overparam":
        if "layers" in doc:
            layer_range = list(doc["layers"])
        else:
            layer_range = list(range(int(doc.get("layer-min", 1)),
                                     int(doc.get("layer-max", 10)) + 1))
        curve = analysis.parameter_dimension_curve(
            family, layer_range, inputs,
            n_theta_samples=int(doc.get("n-theta", 10)), rng=rng)
        _write(out / "overparam.csv", "\n".join(curve.csv_rows()) + "\n", False)
        _write(out / "overparam.json", json.dumps({
            "resolved_config": resolved, "d_max": curve.d_max,
            "critical_layers": curve.critical_layers,
            "layers": curve.layers, "mean_D": curve.mean_dimension,
            "mean_R": curve.mean_redundancy}, indent=2), False)
        print(f"plateau D_max={curve.d_max} reached at layer "
              f"{curve.critical_layers}")
        return 0

    n_layers = int(doc.get("layers", 10))
    template = build_template(family, 5, n_layers)
    strategy = doc.get("strategy", "none")
    dropout = None if strategy == "none" else _dropout_from(doc)
    n_vec = int(doc.get("n-param-vectors", analysis.DEFAULT_PARAM_VECTORS))
    if kind == "expressibility":
        report = analysis.expressibility(
            template, dropout, inputs, n_param_vectors=n_vec,
            n_bins=int(doc.get("n-bins", analysis.DEFAULT_BINS)), rng=rng)
        _write(out / "expressibility.json", json.dumps({
            "resolved_config": resolved, "kl": report.kl_value,
            "bins": report.bins, "n_fidelities": report.n_fidelities,
            "histogram": report.histogram}, indent=2), False)
        print(f"expressibility KL = {report.kl_value:.5g}")
    else:
        report = analysis.ce_statistics(template, dropout, inputs,
                                        n_param_vectors=n_vec, rng=rng)
        _write(out / "entanglement.json", json.dumps({
            "resolved_config": resolved, "mean_ce": report.mean_ce,
            "var_ce": report.var_ce, "n_states": report.n_states,
            "haar_mean": report.haar_mean,
            "haar_var_order": report.haar_var_order,
            "party_band": report.party_band}, indent=2), False)
        print(f"mean CE = {report.mean_ce:.5g} (band {report.party_band})")
    return 0


def cmd_rescale_eval(args) -> int:
    doc = _load_config(args.config, "rescale-eval")
    k_grid = doc.get("k-grid")
    if not k_grid:
        raise ConfigError("rescale-eval needs a non-empty k-grid")
    seeds = _parse_seeds(args.seeds)
    cfg = _train_config(doc, seeds)
    if cfg.dropout.strategy == "none":
        raise ConfigError("rescale-eval needs a dropout strategy")
    resolved = _resolved(doc, "rescale-eval")
    if args.dry_run:
        print(json.dumps(resolved, indent=2))
        return 0
    dataset = _dataset_for(doc, cfg.task)
    run_seeds = seeds or [cfg.base_seed + i for i in range(cfg.n_runs)]
    runs = [train(cfg, dataset, s) for s in run_seeds]
    p = cfg.combined_drop_probability()
    rows = [GRID_CSV_HEADER]
    for k_raw in k_grid:
        k = _parse_k(k_raw)
        metrics = []
        for run in runs:
            params = rescale_params(np.asarray(run.final_params_unscaled), p, k)
            metrics.append(evaluate_params(cfg, dataset, params))
        tr = np.array([m["train_loss"] for m in metrics])
        te = np.array([m["test_loss"] for m in metrics])
        acc = ([m.get("test_acc") for m in metrics]
               if cfg.family == "classification" else None)
        rows.append(",".join([
            cfg.dropout.strategy, f"{cfg.dropout.p_L:g}",
            f"{cfg.dropout.p_R:g}", f"{cfg.dropout.p_E:g}",
            "inf" if k is not None and math.isinf(k) else f"{k:g}",
            f"{tr.mean():.10g}", f"{tr.std():.10g}",
            f"{te.mean():.10g}", f"{te.std():.10g}",
            "" if acc is None else f"{np.mean(acc):.10g}",
            "" if acc is None else f"{np.std(acc):.10g}",
            str(len(runs)),
        ]))
    out = Path(args.out)
    _write(out / "rescale_eval.csv", "\n".join(rows) + "\n", False)
    print(f"evaluated {len(k_grid)} k values over {len(runs)} runs")
    return 0


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if len(rows) < 2:
        raise ConfigError(f"{path} has no data rows")
    width = len(rows[0])
    for row in rows:
        if len(row) != width:
            raise ConfigError(f"{path}: inconsistent column count")
    return rows[0], rows[1:]


def cmd_plot(args) -> int:
    doc = _load_config(args.config, "plot")
    inputs = doc.get("inputs")
    if not inputs:
        raise ConfigError("plot needs at least one input CSV")
    mode = doc.get("mode", "lines")
    output = doc.get("output", "plot.svg")
    if args.dry_run:
        print(json.dumps(_resolved(doc, "plot"), indent=2))
        return 0
    out = Path(args.out) / output
    if mode == "lines":
        series: dict[str, list[float]] = {}
        x_vals = None
        for path in inputs:
            header, rows = _read_csv(path)
            xcol = doc.get("x-column", header[0])
            xi = header.index(xcol)
            cols = doc.get("columns") or [h for h in header if h != xcol]
            xs = [float(r[xi]) for r in rows]
            if x_vals is None:
                x_vals = xs
            elif xs != x_vals:
                raise ConfigError("input CSVs disagree on the x column")
            for col in cols:
                ci = header.index(col)
                label = col if len(inputs) == 1 else f"{Path(path).stem}:{col}"
                series[label] = [float(r[ci]) for r in rows]
        text = svgplot.line_chart(x_vals, series,
                                  xlabel=doc.get("x-column", "x"))
    elif mode == "bars":
        header, rows = _read_csv(inputs[0])
        label_col = doc.get("label-column", header[0])
        mean_col = doc.get("mean-column", "mean_test")
        std_col = doc.get("std-column", "std_test")
        li, mi = header.index(label_col), header.index(mean_col)
        si = header.index(std_col) if std_col in header else None
        labels = [r[li] for r in rows]
        means = [float(r[mi]) for r in rows]
        stds = [float(r[si]) for r in rows] if si is not None else None
        text = svgplot.bar_chart(labels, means, stds, ylabel=mean_col)
    else:
        raise ConfigError(f"unknown plot mode {mode!r}")
    _write(out, text, False)
    print(f"wrote {out}")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "gridsearch": cmd_gridsearch,
    "analyze": cmd_analyze,
    "rescale-eval": cmd_rescale_eval,
    "plot": cmd_plot,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdrop",
        description="Quantum-dropout QNN experiments and diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seeds", default=None,
                       help="comma-separated seed list override")
        p.add_argument("--dry-run", action="store_true",
                       help="print the resolved config and write nothing")
        p.add_argument("--audit-masks", action="store_true",
                       help="log sampled masks as JSON lines (train only)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

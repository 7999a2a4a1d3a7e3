"""Command-line surface for the contention pipeline.

Subcommands mirror the pipeline stages one-to-one: gen, ingest, graph,
train, eval, predict, sweep. Every command validates its entire config
before writing anything, prints human-readable tables to stdout, and maps
failures onto documented exit codes: 2 for config/usage problems, 3 for
data/shape problems, 4 for numeric failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from contention.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from contention.config import RunConfig, config_digest, load_run_config, resolve_out_dir
from contention.data import (
    CLASS_NAMES,
    MetricWindow,
    apply_norm,
    fit_norm,
    generate,
    read_dataset,
    write_dataset,
)
from contention.errors import (
    CacheMismatchError,
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
)
from contention.graph import build_graph, graph_stats, pearson_matrix
from contention.ingest import apply_weak_labels, ingest_csv
from contention.model import forward
from contention.pipeline import prepare, run_prepared
from contention.rng import RngStream
from contention.sweeps import (
    SweepSpec,
    sweep_batch,
    sweep_datasize,
    sweep_dim,
    write_sweep_csv,
)
from contention.train import METRIC_FIELDS, EvalMetrics, evaluate, write_history_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def git_blob_sha1(path: str | Path) -> str:
    """Content hash identical to `git hash-object` on the file."""
    data = Path(path).read_bytes()
    header = f"blob {len(data)}\x00".encode("ascii")
    return hashlib.sha1(header + data).hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg: RunConfig, seed,
                    inputs: list[Path], outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "config_digest": config_digest(cfg),
        "seed": seed,
        "inputs": [
            {"path": str(p), "git_sha1": git_blob_sha1(p)} for p in inputs if p.exists()
        ],
        "outputs": outputs,
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _print_metrics(title: str, metrics: EvalMetrics) -> None:
    print(title)
    width = max(len(m) for m in METRIC_FIELDS)
    for name in METRIC_FIELDS:
        print(f"  {name:<{width}}  {getattr(metrics, name):.4f}")


def _print_confusion(confusion: np.ndarray, class_names: tuple[str, ...]) -> None:
    cell = max(6, max(len(c) for c in class_names) + 1)
    print("confusion matrix (rows = true, cols = predicted)")
    print(" " * (cell + 5) + "".join(f"{c:>{cell}}" for c in class_names))
    for i, name in enumerate(class_names):
        row = "".join(f"{int(v):>{cell}}" for v in confusion[i])
        print(f"true {name:<{cell}}{row}")


def _class_histogram(windows: list[MetricWindow]) -> dict[str, int]:
    counts = {name: 0 for name in CLASS_NAMES}
    unlabeled = 0
    for w in windows:
        if w.label is None:
            unlabeled += 1
        else:
            counts[CLASS_NAMES[int(w.label)]] += 1
    if unlabeled:
        counts["unlabeled"] = unlabeled
    return counts


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    seed = args.seed if args.seed is not None else cfg.train.seed
    n = args.n if args.n is not None else cfg.n_windows
    if n < 1:
        raise ConfigError(f"--n must be >= 1, got {n}")
    out_dir = resolve_out_dir(args.out, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    windows = generate(cfg.scenario, n, RngStream(seed).substream(0))
    dataset_path = out_dir / "dataset.csv"
    write_dataset(dataset_path, windows, source=f"synthetic:{seed}")
    print(f"wrote {len(windows)} windows to {dataset_path}")
    for name, count in _class_histogram(windows).items():
        print(f"  {name:<10} {count}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    if cfg.schema is None:
        raise ConfigError("ingestion requires a 'schema' section in the config")
    out_dir = resolve_out_dir(args.out, cfg)
    result = ingest_csv(args.trace, cfg.schema, cfg.ingest)
    windows = result.windows
    dropped = 0
    if args.weak_label:
        windows, dropped = apply_weak_labels(windows, cfg.schema.group_map())
        if not windows:
            raise DataError("weak labeling left zero labeled windows")
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_path = out_dir / "dataset.csv"
    write_dataset(dataset_path, windows, source=f"trace:{Path(args.trace).name}")
    print(
        f"ingested {result.machines} machines -> {len(windows)} windows "
        f"({result.skipped_rows} rows skipped, {dropped} windows unlabeled/dropped)"
    )
    print(f"wrote {dataset_path}")
    return EXIT_OK


def cmd_graph(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    windows = read_dataset(args.data)
    graph = build_graph(pearson_matrix(windows), cfg.corr_threshold)
    stats = graph_stats(graph)
    print(f"metric graph over {graph.dim} metrics at |corr| >= {cfg.corr_threshold}")
    print(f"  edges     {stats.edges}")
    print(f"  density   {stats.density:.4f}")
    print(f"  isolated  {stats.isolated}")
    print("  degree histogram (degree: vertices)")
    for degree, count in enumerate(stats.degree_histogram):
        if count:
            print(f"    {degree:>3}: {count}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    seed = args.seed if args.seed is not None else cfg.train.seed
    train_cfg = replace(cfg.train, seed=seed)
    out_dir = resolve_out_dir(args.out, cfg)
    windows = read_dataset(args.data)
    prepared = prepare(
        windows, cfg.split_fractions, cfg.corr_threshold, RngStream(seed).substream(1)
    )
    result = run_prepared(prepared, cfg.model, train_cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = Checkpoint(
        model_cfg=cfg.model,
        params=result.params,
        graph=result.graph_used,
        norm=prepared.norm,
        class_names=CLASS_NAMES,
        metric_names=windows[0].metric_names,
        train_seed=seed,
        config_digest=config_digest(cfg),
    )
    ckpt_path = out_dir / "checkpoint.json"
    history_path = out_dir / "history.csv"
    save_checkpoint(ckpt, ckpt_path)
    write_history_csv(result.history, history_path)
    data_path = Path(args.data)
    _write_manifest(
        out_dir, "train", cfg, seed,
        inputs=[data_path, data_path.with_name(data_path.stem + ".manifest.json")],
        outputs=[ckpt_path.name, history_path.name],
    )
    best = result.history.best_epoch
    print(f"trained {len(result.history.records)} epochs; best epoch {best}")
    _print_metrics("validation metrics (best epoch)", result.val_metrics)
    print(f"wrote {ckpt_path} and {history_path}")
    return EXIT_OK


def _load_eval_inputs(args: argparse.Namespace):
    """Shared eval/predict plumbing: checkpoint plus normalized windows."""
    ckpt = load_checkpoint(args.checkpoint)
    windows = read_dataset(args.data)
    t = windows[0].window_len
    if t != ckpt.model_cfg.window_len:
        raise ShapeError(
            f"dataset windows have {t} timesteps, checkpoint expects "
            f"{ckpt.model_cfg.window_len}"
        )
    d = windows[0].metric_count
    if d == ckpt.graph.dim:
        norm, graph = ckpt.norm, ckpt.graph
        if ckpt.metric_names and ckpt.metric_names != windows[0].metric_names:
            print(
                "warning: dataset metric names differ from the ones the "
                "checkpoint was trained on",
                file=sys.stderr,
            )
    else:
        print(
            f"warning: dataset has {d} metrics, checkpoint graph covers "
            f"{ckpt.graph.dim}; refitting normalization and graph on the "
            "provided dataset",
            file=sys.stderr,
        )
        norm = fit_norm(windows)
        graph = build_graph(pearson_matrix([apply_norm(w, norm) for w in windows]),
                            ckpt.graph.threshold)
    normalized = [apply_norm(w, norm) for w in windows]
    return ckpt, normalized, graph


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt, windows, graph = _load_eval_inputs(args)
    metrics = evaluate(ckpt.params, graph, windows)
    _print_metrics(f"evaluation over {len(windows)} windows", metrics)
    _print_confusion(metrics.confusion, ckpt.class_names)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "metrics.csv").open("w", newline="") as fh:
            fh.write(",".join(METRIC_FIELDS) + "\n")
            fh.write(",".join(repr(getattr(metrics, m)) for m in METRIC_FIELDS) + "\n")
        with (out_dir / "confusion.csv").open("w", newline="") as fh:
            fh.write("true_class," + ",".join(ckpt.class_names) + "\n")
            for i, name in enumerate(ckpt.class_names):
                fh.write(name + "," + ",".join(str(int(v)) for v in metrics.confusion[i]) + "\n")
        print(f"wrote {out_dir / 'metrics.csv'} and {out_dir / 'confusion.csv'}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    ckpt, windows, graph = _load_eval_inputs(args)
    out_dir = Path(args.out) if args.out else None
    rows = []
    for wid, w in enumerate(windows):
        pred, _ = forward(w.values, graph, ckpt.params)
        rows.append((wid, pred))
    header = (
        ["window_id"]
        + [f"logit_{c}" for c in ckpt.class_names]
        + [f"p_{c}" for c in ckpt.class_names]
        + ["predicted_class"]
    )
    lines = [",".join(header)]
    for wid, pred in rows:
        cells = [str(wid)]
        cells += [repr(float(z)) for z in pred.logits]
        cells += [repr(float(p)) for p in pred.probabilities]
        cells.append(ckpt.class_names[pred.label])
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "predictions.csv").write_text(text)
        print(f"wrote {len(rows)} predictions to {out_dir / 'predictions.csv'}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    try:
        seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"--seeds must be comma-separated integers: {exc}") from exc
    if not seeds:
        raise ConfigError("--seeds must name at least one seed")
    out_dir = resolve_out_dir(args.out, cfg)
    spec = SweepSpec(
        scenario=cfg.scenario,
        n_windows=cfg.n_windows,
        model_cfg=cfg.model,
        train_cfg=cfg.train,
        fractions=cfg.split_fractions,
        corr_threshold=cfg.corr_threshold,
    )
    runner = {"batch": sweep_batch, "datasize": sweep_datasize, "dim": sweep_dim}[args.kind]
    table = runner(spec, seeds=seeds)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"sweep_{table.kind}.csv"
    write_sweep_csv(table, path)
    _write_manifest(out_dir, f"sweep:{args.kind}", cfg, list(seeds), inputs=[],
                    outputs=[path.name])
    print(f"{table.setting_name} sweep over seeds {list(table.seeds)}")
    for row in table.rows:
        cells = "  ".join(
            f"{m}={row.mean(m):.4f}+/-{row.std(m):.4f}" for m in METRIC_FIELDS
        )
        print(f"  {table.setting_name}={row.setting:g}: {cells}")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contention",
        description="Graph-structured multi-task contention classification pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False, checkpoint=False, config=True):
        if config:
            p.add_argument("--config", default=None, help="JSON run config path")
        if data:
            p.add_argument("--data", required=True, help="dataset CSV path")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="checkpoint JSON path")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("gen", help="generate a labeled synthetic dataset")
    common(p)
    p.add_argument("--n", type=int, default=None, help="window count")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", help="cut windows from a raw trace CSV")
    common(p)
    p.add_argument("--trace", required=True, help="raw trace CSV path")
    p.add_argument("--weak-label", action=argparse.BooleanOptionalAction, default=True,
                   help="assign heuristic labels and drop unlabeled windows")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("graph", help="build and describe the metric graph")
    common(p, data=True)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("train", help="train a model on a labeled dataset")
    common(p, data=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a labeled dataset")
    common(p, data=True, checkpoint=True, config=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="emit logits and probabilities per window")
    common(p, data=True, checkpoint=True, config=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="run a sensitivity sweep")
    common(p)
    p.add_argument("--kind", required=True, choices=("batch", "datasize", "dim"))
    p.add_argument("--seeds", default="0,1,2", help="comma-separated seed list")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, CacheMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

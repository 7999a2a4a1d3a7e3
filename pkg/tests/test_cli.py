"""End-to-end tests for the command-line surface.

Every test drives ``main(argv)`` in-process, which is exactly what the
installed console script calls, so exit codes, printed tables, and file
outputs are all exercised without spawning subprocesses (except one smoke
test for the module entry point).
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from contention import cli
from contention.checkpoint import load_checkpoint
from contention.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_NUMERIC,
    EXIT_OK,
    git_blob_sha1,
    main,
)
from contention.config import OUT_DIR_ENV, config_digest, load_run_config
from contention.data import CLASS_NAMES, MetricWindow, read_dataset, write_dataset
from contention.errors import (
    CacheMismatchError,
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
)
from contention.train import METRIC_FIELDS

# sha1("blob 6\0hello\n"), the id git itself assigns to that blob
GIT_HELLO_SHA = "ce013625030ba8dba906f756967f9e9ca394464a"


def write_config(path: Path, **overrides) -> Path:
    """Small, fast run config shared by the CLI tests."""
    data = {
        "scenario": {
            "metric_count": 4,
            "window_len": 8,
            "separation": 3.0,
            "noise_std": 0.1,
            "leak_lag": 2,
        },
        "model": {
            "window_len": 8,
            "num_classes": 5,
            "encoder_hidden": 8,
            "embed_width": 6,
            "propagation_width": 6,
            "head_hidden": 4,
        },
        "train": {
            "batch_size": 16,
            "max_epochs": 3,
            "learning_rate": 0.01,
            "seed": 0,
        },
        "n_windows": 48,
    }
    data.update(overrides)
    path.write_text(json.dumps(data, indent=2))
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One gen + train pass shared by the eval/predict/manifest tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "config.json")
    data_dir = root / "data"
    run_dir = root / "run"
    rc = main(["gen", "--config", str(cfg), "--out", str(data_dir),
               "--n", "80", "--seed", "1"])
    assert rc == EXIT_OK
    data = data_dir / "dataset.csv"
    rc = main(["train", "--config", str(cfg), "--data", str(data),
               "--out", str(run_dir), "--seed", "0"])
    assert rc == EXIT_OK
    return {
        "root": root,
        "cfg": cfg,
        "data": data,
        "run": run_dir,
        "ckpt": run_dir / "checkpoint.json",
    }


def test_git_blob_sha1_matches_git_semantics(tmp_path):
    path = tmp_path / "hello.txt"
    path.write_bytes(b"hello\n")
    assert git_blob_sha1(path) == GIT_HELLO_SHA


# ---------------------------------------------------------------- gen


def test_gen_writes_dataset_and_histogram(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "out"
    rc = main(["gen", "--config", str(cfg), "--out", str(out),
               "--n", "12", "--seed", "3"])
    assert rc == EXIT_OK
    windows = read_dataset(out / "dataset.csv")
    assert len(windows) == 12
    assert windows[0].window_len == 8
    assert windows[0].metric_count == 4
    assert all(w.label is not None for w in windows)
    assert all(w.source.startswith("synthetic:3") for w in windows)
    captured = capsys.readouterr().out
    assert f"wrote 12 windows to {out / 'dataset.csv'}" in captured
    shown = [name for name in CLASS_NAMES if name in captured]
    assert shown, "class histogram missing from output"


def test_gen_defaults_come_from_the_config(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    out = tmp_path / "out"
    assert main(["gen", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    windows = read_dataset(out / "dataset.csv")
    assert len(windows) == 48  # config n_windows
    # seed fell back to train.seed == 0
    explicit = tmp_path / "explicit"
    main(["gen", "--config", str(cfg), "--out", str(explicit),
          "--seed", "0"])
    assert (out / "dataset.csv").read_bytes() == (explicit / "dataset.csv").read_bytes()


def test_gen_is_deterministic_and_seed_sensitive(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    outs = [tmp_path / f"o{i}" for i in range(3)]
    for out, seed in zip(outs, ("5", "5", "6")):
        assert main(["gen", "--config", str(cfg), "--out", str(out),
                     "--n", "10", "--seed", seed]) == EXIT_OK
    a, b, c = (out.joinpath("dataset.csv").read_bytes() for out in outs)
    assert a == b
    assert a != c


def test_gen_rejects_nonpositive_count(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    rc = main(["gen", "--config", str(cfg), "--out", str(tmp_path / "o"),
               "--n", "0"])
    assert rc == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


# ------------------------------------------------------ out dir resolution


def test_out_dir_env_var_is_used_when_flag_absent(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "cfg.json")
    env_dir = tmp_path / "from_env"
    monkeypatch.setenv(OUT_DIR_ENV, str(env_dir))
    assert main(["gen", "--config", str(cfg), "--n", "4", "--seed", "0"]) == EXIT_OK
    assert (env_dir / "dataset.csv").exists()


def test_out_flag_beats_env_var(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "cfg.json")
    env_dir = tmp_path / "from_env"
    explicit = tmp_path / "explicit"
    monkeypatch.setenv(OUT_DIR_ENV, str(env_dir))
    assert main(["gen", "--config", str(cfg), "--out", str(explicit),
                 "--n", "4", "--seed", "0"]) == EXIT_OK
    assert (explicit / "dataset.csv").exists()
    assert not env_dir.exists()


def test_config_out_dir_is_the_last_resort(tmp_path, monkeypatch):
    monkeypatch.delenv(OUT_DIR_ENV, raising=False)
    target = tmp_path / "from_cfg"
    cfg = write_config(tmp_path / "cfg.json", out_dir=str(target))
    assert main(["gen", "--config", str(cfg), "--n", "4", "--seed", "0"]) == EXIT_OK
    assert (target / "dataset.csv").exists()


# ---------------------------------------------------------------- ingest


def _write_trace(path: Path, cpu: float) -> Path:
    """One machine, eight 60s buckets, two metric columns."""
    lines = ["machine,ts,cpu_util,mem_util"]
    for i in range(8):
        lines.append(f"m1,{i * 60},{cpu},0.2")
    path.write_text("\n".join(lines) + "\n")
    return path


def ingest_config(path: Path, **extra) -> Path:
    overrides = {
        "schema": {
            "machine_column": "machine",
            "timestamp_column": "ts",
            "metric_columns": {"cpu_util": "cpu", "mem_util": "mem"},
        },
        "ingest": {"window_len": 4, "resample_step": 60, "max_fill": 3},
    }
    overrides.update(extra)
    return write_config(path, **overrides)


def test_ingest_weak_labels_hot_cpu(tmp_path, capsys):
    cfg = ingest_config(tmp_path / "cfg.json")
    trace = _write_trace(tmp_path / "trace.csv", cpu=0.95)
    out = tmp_path / "out"
    rc = main(["ingest", "--config", str(cfg), "--trace", str(trace),
               "--out", str(out)])
    assert rc == EXIT_OK
    windows = read_dataset(out / "dataset.csv")
    assert len(windows) == 2
    assert all(int(w.label) == 0 for w in windows)  # CPU class
    captured = capsys.readouterr().out
    assert "ingested 1 machines -> 2 windows" in captured
    assert "0 rows skipped" in captured


def test_ingest_without_weak_labels_keeps_unlabeled_windows(tmp_path):
    cfg = ingest_config(tmp_path / "cfg.json")
    trace = _write_trace(tmp_path / "trace.csv", cpu=0.5)
    out = tmp_path / "out"
    rc = main(["ingest", "--config", str(cfg), "--trace", str(trace),
               "--out", str(out), "--no-weak-label"])
    assert rc == EXIT_OK
    windows = read_dataset(out / "dataset.csv")
    assert len(windows) == 2
    assert all(w.label is None for w in windows)


def test_ingest_with_nothing_hot_fails_loudly(tmp_path, capsys):
    cfg = ingest_config(tmp_path / "cfg.json")
    trace = _write_trace(tmp_path / "trace.csv", cpu=0.5)
    rc = main(["ingest", "--config", str(cfg), "--trace", str(trace),
               "--out", str(tmp_path / "out")])
    assert rc == EXIT_DATA
    assert "zero labeled windows" in capsys.readouterr().err


def test_ingest_requires_a_schema_section(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")  # no schema
    trace = _write_trace(tmp_path / "trace.csv", cpu=0.95)
    rc = main(["ingest", "--config", str(cfg), "--trace", str(trace),
               "--out", str(tmp_path / "out")])
    assert rc == EXIT_CONFIG
    assert "schema" in capsys.readouterr().err


def test_ingest_missing_trace_is_a_data_error(tmp_path, capsys):
    cfg = ingest_config(tmp_path / "cfg.json")
    rc = main(["ingest", "--config", str(cfg),
               "--trace", str(tmp_path / "nope.csv"),
               "--out", str(tmp_path / "out")])
    assert rc == EXIT_DATA
    assert "not found" in capsys.readouterr().err


# ---------------------------------------------------------------- graph


def test_graph_prints_structure_summary(workspace, capsys):
    rc = main(["graph", "--data", str(workspace["data"])])
    assert rc == EXIT_OK
    captured = capsys.readouterr().out
    assert "metric graph over 4 metrics" in captured
    assert "edges" in captured
    assert "density" in captured
    assert "isolated" in captured
    assert "degree histogram" in captured


def test_graph_missing_dataset_is_a_data_error(tmp_path, capsys):
    rc = main(["graph", "--data", str(tmp_path / "nope.csv")])
    assert rc == EXIT_DATA
    assert "not found" in capsys.readouterr().err


# ---------------------------------------------------------------- train


def test_train_writes_checkpoint_history_and_manifest(workspace):
    run = workspace["run"]
    assert (run / "checkpoint.json").exists()
    assert (run / "history.csv").exists()
    assert (run / "run_manifest.json").exists()


def test_train_manifest_records_inputs_and_digest(workspace):
    manifest = json.loads((workspace["run"] / "run_manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["seed"] == 0
    cfg = load_run_config(workspace["cfg"])
    assert manifest["config_digest"] == config_digest(cfg)
    assert manifest["outputs"] == ["checkpoint.json", "history.csv"]
    by_path = {entry["path"]: entry["git_sha1"] for entry in manifest["inputs"]}
    data = str(workspace["data"])
    assert data in by_path
    assert by_path[data] == git_blob_sha1(workspace["data"])
    sidecar = str(workspace["data"].with_name("dataset.manifest.json"))
    assert sidecar in by_path


def test_train_checkpoint_stores_dataset_metric_names(workspace):
    ckpt = load_checkpoint(workspace["ckpt"])
    windows = read_dataset(workspace["data"])
    assert ckpt.metric_names == windows[0].metric_names
    assert ckpt.class_names == CLASS_NAMES
    assert ckpt.train_seed == 0


def test_train_reruns_byte_identically(workspace, tmp_path):
    rerun = tmp_path / "rerun"
    rc = main(["train", "--config", str(workspace["cfg"]),
               "--data", str(workspace["data"]),
               "--out", str(rerun), "--seed", "0"])
    assert rc == EXIT_OK
    for name in ("checkpoint.json", "history.csv", "run_manifest.json"):
        assert (rerun / name).read_bytes() == (workspace["run"] / name).read_bytes()


def test_train_prints_progress_and_metrics(workspace, tmp_path, capsys):
    rc = main(["train", "--config", str(workspace["cfg"]),
               "--data", str(workspace["data"]),
               "--out", str(tmp_path / "o"), "--seed", "0"])
    assert rc == EXIT_OK
    captured = capsys.readouterr().out
    assert "best epoch" in captured
    assert "validation metrics (best epoch)" in captured
    for name in METRIC_FIELDS:
        assert name in captured


# ---------------------------------------------------------------- eval


def test_eval_prints_metrics_and_confusion(workspace, capsys):
    rc = main(["eval", "--checkpoint", str(workspace["ckpt"]),
               "--data", str(workspace["data"])])
    assert rc == EXIT_OK
    captured = capsys.readouterr().out
    assert "evaluation over 80 windows" in captured
    assert "confusion matrix (rows = true, cols = predicted)" in captured
    for name in CLASS_NAMES:
        assert name in captured


def test_eval_writes_metric_and_confusion_csv(workspace, tmp_path):
    out = tmp_path / "eval"
    rc = main(["eval", "--checkpoint", str(workspace["ckpt"]),
               "--data", str(workspace["data"]), "--out", str(out)])
    assert rc == EXIT_OK
    metric_lines = (out / "metrics.csv").read_text().splitlines()
    assert metric_lines[0] == ",".join(METRIC_FIELDS)
    values = [float(v) for v in metric_lines[1].split(",")]
    assert len(values) == len(METRIC_FIELDS)
    assert all(0.0 <= v <= 1.0 for v in values)
    confusion_lines = (out / "confusion.csv").read_text().splitlines()
    assert confusion_lines[0] == "true_class," + ",".join(CLASS_NAMES)
    assert len(confusion_lines) == 1 + len(CLASS_NAMES)
    total = sum(
        int(cell) for line in confusion_lines[1:] for cell in line.split(",")[1:]
    )
    assert total == 80


def test_eval_rejects_wrong_window_length(workspace, tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.json",
        scenario={"metric_count": 4, "window_len": 12, "separation": 3.0,
                  "noise_std": 0.1, "leak_lag": 2},
        model={"window_len": 12, "num_classes": 5, "encoder_hidden": 8,
               "embed_width": 6, "propagation_width": 6, "head_hidden": 4},
    )
    out = tmp_path / "long"
    assert main(["gen", "--config", str(cfg), "--out", str(out),
                 "--n", "6", "--seed", "0"]) == EXIT_OK
    rc = main(["eval", "--checkpoint", str(workspace["ckpt"]),
               "--data", str(out / "dataset.csv")])
    assert rc == EXIT_DATA
    assert "timesteps" in capsys.readouterr().err


def test_eval_refits_on_different_metric_count(workspace, tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.json",
        scenario={"metric_count": 8, "window_len": 8, "separation": 3.0,
                  "noise_std": 0.1, "leak_lag": 2},
    )
    out = tmp_path / "wide"
    assert main(["gen", "--config", str(cfg), "--out", str(out),
                 "--n", "20", "--seed", "0"]) == EXIT_OK
    rc = main(["eval", "--checkpoint", str(workspace["ckpt"]),
               "--data", str(out / "dataset.csv")])
    assert rc == EXIT_OK
    captured = capsys.readouterr()
    assert "refitting normalization" in captured.err
    assert "evaluation over 20 windows" in captured.out


def test_eval_warns_when_metric_names_differ(workspace, tmp_path, capsys):
    windows = read_dataset(workspace["data"])[:10]
    renamed = [
        MetricWindow(
            values=w.values,
            label=w.label,
            source=w.source,
            metric_names=tuple(f"x{i}" for i in range(w.metric_count)),
        )
        for w in windows
    ]
    path = tmp_path / "renamed.csv"
    write_dataset(path, renamed, source="renamed")
    rc = main(["eval", "--checkpoint", str(workspace["ckpt"]),
               "--data", str(path)])
    assert rc == EXIT_OK
    assert "metric names differ" in capsys.readouterr().err


# ---------------------------------------------------------------- predict


def test_predict_streams_csv_to_stdout(workspace, capsys):
    rc = main(["predict", "--checkpoint", str(workspace["ckpt"]),
               "--data", str(workspace["data"])])
    assert rc == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    header = (
        ["window_id"]
        + [f"logit_{c}" for c in CLASS_NAMES]
        + [f"p_{c}" for c in CLASS_NAMES]
        + ["predicted_class"]
    )
    assert lines[0] == ",".join(header)
    assert len(lines) == 1 + 80
    k = len(CLASS_NAMES)
    for row_id, line in enumerate(lines[1:]):
        cells = line.split(",")
        assert int(cells[0]) == row_id
        logits = np.array([float(v) for v in cells[1:1 + k]])
        probs = np.array([float(v) for v in cells[1 + k:1 + 2 * k]])
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert cells[-1] == CLASS_NAMES[int(np.argmax(logits))]


def test_predict_writes_file_with_out_flag(workspace, tmp_path, capsys):
    out = tmp_path / "pred"
    rc = main(["predict", "--checkpoint", str(workspace["ckpt"]),
               "--data", str(workspace["data"]), "--out", str(out)])
    assert rc == EXIT_OK
    path = out / "predictions.csv"
    assert path.exists()
    assert f"wrote 80 predictions to {path}" in capsys.readouterr().out
    assert len(path.read_text().splitlines()) == 81


# ---------------------------------------------------------------- sweep


def test_sweep_batch_writes_table_and_manifest(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json", n_windows=48)
    out = tmp_path / "sweep"
    rc = main(["sweep", "--config", str(cfg), "--kind", "batch",
               "--seeds", "0", "--out", str(out)])
    assert rc == EXIT_OK
    table_path = out / "sweep_batch.csv"
    assert table_path.exists()
    lines = table_path.read_text().splitlines()
    assert lines[0].endswith(
        "n_seeds,mean_accuracy,std_accuracy,mean_macro_precision,"
        "std_macro_precision,mean_macro_recall,std_macro_recall,"
        "mean_macro_f1,std_macro_f1"
    )
    assert len(lines) == 1 + 4  # one row per batch size in the default grid
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "sweep:batch"
    assert manifest["seed"] == [0]
    assert manifest["outputs"] == ["sweep_batch.csv"]
    captured = capsys.readouterr().out
    assert "sweep over seeds [0]" in captured
    assert f"wrote {table_path}" in captured


def test_sweep_rejects_malformed_seed_list(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    rc = main(["sweep", "--config", str(cfg), "--kind", "batch",
               "--seeds", "a,b", "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    assert "comma-separated integers" in capsys.readouterr().err


def test_sweep_rejects_empty_seed_list(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.json")
    rc = main(["sweep", "--config", str(cfg), "--kind", "batch",
               "--seeds", ",", "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    assert "at least one seed" in capsys.readouterr().err


def test_sweep_unknown_kind_is_a_usage_error(tmp_path):
    cfg = write_config(tmp_path / "cfg.json")
    with pytest.raises(SystemExit) as excinfo:
        main(["sweep", "--config", str(cfg), "--kind", "bogus"])
    assert excinfo.value.code == 2


# ------------------------------------------------------------ exit codes


@pytest.mark.parametrize(
    "exc, code",
    [
        (ConfigError("boom"), EXIT_CONFIG),
        (DataError("boom"), EXIT_DATA),
        (ShapeError("boom"), EXIT_DATA),
        (NumericError("boom"), EXIT_NUMERIC),
        (CacheMismatchError("boom"), EXIT_NUMERIC),
    ],
)
def test_error_classes_map_to_documented_exit_codes(monkeypatch, capsys, exc, code):
    def explode(path):
        raise exc

    monkeypatch.setattr(cli, "load_run_config", explode)
    assert main(["gen", "--n", "1"]) == code
    assert "error: boom" in capsys.readouterr().err


def test_missing_config_file_is_a_config_error(tmp_path, capsys):
    rc = main(["gen", "--config", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "o"), "--n", "1"])
    assert rc == EXIT_CONFIG
    assert "config file not found" in capsys.readouterr().err


def test_unknown_config_key_is_a_config_error(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"train": {"learning_rte": 0.1}}))
    rc = main(["gen", "--config", str(path), "--out", str(tmp_path / "o"),
               "--n", "1"])
    assert rc == EXIT_CONFIG
    assert "learning_rte" in capsys.readouterr().err


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_module_entry_point_prints_usage():
    proc = subprocess.run(
        [sys.executable, "-m", "contention.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "usage: contention" in proc.stdout
    for name in ("gen", "ingest", "graph", "train", "eval", "predict", "sweep"):
        assert name in proc.stdout

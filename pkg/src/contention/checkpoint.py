"""Checkpoint serialization: everything needed to reproduce predictions.

A checkpoint is one JSON file holding the model config, every weight array,
the metric graph (binary adjacency plus build threshold; the normalized
operator is recomputed on load), the normalization statistics, class names,
and provenance (training seed, config digest).

Floats are stored as decimal strings with 17 significant digits, which
round-trips IEEE doubles exactly: loading and saving again produces a
byte-identical file, and reloaded parameters yield bitwise-equal logits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from contention.data import CLASS_NAMES, NormStats
from contention.errors import DataError, SchemaError, ShapeError
from contention.graph import MetricGraph, normalize_adjacency
from contention.model import ModelConfig, ModelParams

CHECKPOINT_FORMAT_VERSION = 1


def _encode_floats(arr: np.ndarray):
    if arr.ndim == 1:
        return [f"{float(x):.17g}" for x in arr]
    return [_encode_floats(row) for row in arr]


def _decode_floats(payload, shape: tuple[int, ...], what: str) -> np.ndarray:
    try:
        arr = np.array(payload, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{what} is not a numeric array: {exc}") from exc
    if arr.shape != shape:
        raise ShapeError(f"{what} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{what} contains non-finite values")
    return arr


@dataclass
class Checkpoint:
    model_cfg: ModelConfig
    params: ModelParams
    graph: MetricGraph
    norm: NormStats
    class_names: tuple[str, ...] = CLASS_NAMES
    metric_names: tuple[str, ...] = ()  # from the training dataset, for mismatch warnings
    train_seed: int = 0
    config_digest: str = ""


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    cfg = ckpt.model_cfg
    ckpt.params.validate(cfg)
    if len(ckpt.class_names) != cfg.num_classes:
        raise ShapeError(
            f"{len(ckpt.class_names)} class names for {cfg.num_classes} classes"
        )
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model": {
            "window_len": cfg.window_len,
            "num_classes": cfg.num_classes,
            "encoder_hidden": cfg.encoder_hidden,
            "embed_width": cfg.embed_width,
            "propagation_width": cfg.propagation_width,
            "head_hidden": cfg.head_hidden,
        },
        "params": {
            name: _encode_floats(getattr(ckpt.params, name))
            for name in ModelParams._ORDER
        },
        "graph": {
            "dim": ckpt.graph.dim,
            "threshold": f"{float(ckpt.graph.threshold):.17g}",
            "adjacency": [[int(v) for v in row] for row in ckpt.graph.adjacency],
        },
        "normalization": {
            "mean": _encode_floats(ckpt.norm.mean),
            "std": _encode_floats(ckpt.norm.std),
        },
        "class_names": list(ckpt.class_names),
        "metric_names": list(ckpt.metric_names),
        "train_seed": int(ckpt.train_seed),
        "config_digest": ckpt.config_digest,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    for key in ("format_version", "model", "params", "graph", "normalization", "class_names"):
        if key not in payload:
            raise SchemaError(f"checkpoint {path} is missing key '{key}'")
    if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise SchemaError(
            f"checkpoint format version {payload['format_version']} unsupported "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    try:
        cfg = ModelConfig(**payload["model"])
    except TypeError as exc:
        raise SchemaError(f"bad model config in checkpoint: {exc}") from exc
    shapes = ModelParams.shapes(cfg)
    arrays = {}
    for name in ModelParams._ORDER:
        if name not in payload["params"]:
            raise SchemaError(f"checkpoint is missing parameter block '{name}'")
        arrays[name] = _decode_floats(payload["params"][name], shapes[name], f"parameter {name}")
    params = ModelParams(**arrays)

    g = payload["graph"]
    dim = int(g["dim"])
    adjacency = np.array(g["adjacency"], dtype=np.float64)
    if adjacency.shape != (dim, dim):
        raise ShapeError(f"adjacency has shape {adjacency.shape}, expected {(dim, dim)}")
    if not np.array_equal(adjacency, adjacency.T) or np.any(np.diag(adjacency) != 0):
        raise DataError("checkpoint adjacency must be symmetric with a zero diagonal")
    graph = MetricGraph(
        adjacency=adjacency,
        normalized=normalize_adjacency(adjacency),
        threshold=float(g["threshold"]),
    )

    norm = NormStats(
        mean=_decode_floats(payload["normalization"]["mean"], (dim,), "normalization mean"),
        std=_decode_floats(payload["normalization"]["std"], (dim,), "normalization std"),
    )
    class_names = tuple(payload["class_names"])
    if len(class_names) != cfg.num_classes:
        raise SchemaError(
            f"checkpoint lists {len(class_names)} class names for {cfg.num_classes} classes"
        )
    return Checkpoint(
        model_cfg=cfg,
        params=params,
        graph=graph,
        norm=norm,
        class_names=class_names,
        metric_names=tuple(payload.get("metric_names", ())),
        train_seed=int(payload.get("train_seed", 0)),
        config_digest=str(payload.get("config_digest", "")),
    )

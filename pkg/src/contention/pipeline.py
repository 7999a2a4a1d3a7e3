"""End-to-end glue: windows in, trained model and test metrics out.

Keeps the leakage rules in one place: normalization statistics and the
metric graph both come from the training split only, and the validation and
test splits are transformed with those frozen artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

from contention.data import (
    MetricWindow,
    NormStats,
    ScenarioConfig,
    apply_norm,
    fit_norm,
    generate,
    split,
)
from contention.graph import DEFAULT_CORR_THRESHOLD, MetricGraph, build_graph, pearson_matrix
from contention.model import ModelConfig, ModelParams
from contention.rng import RngStream
from contention.train import (
    EvalMetrics,
    TrainConfig,
    TrainHistory,
    effective_graph,
    evaluate,
    train,
)

DEFAULT_SPLIT = (0.7, 0.15, 0.15)


@dataclass
class PreparedData:
    train: list[MetricWindow]
    val: list[MetricWindow]
    test: list[MetricWindow]
    norm: NormStats
    graph: MetricGraph


def prepare(
    windows: list[MetricWindow],
    fractions: tuple[float, float, float],
    corr_threshold: float,
    split_rng: RngStream,
) -> PreparedData:
    """Split, normalize, and build the metric graph from the train split."""
    train_w, val_w, test_w = split(windows, fractions, split_rng)
    return prepare_parts(train_w, val_w, test_w, corr_threshold)


def prepare_parts(
    train_w: list[MetricWindow],
    val_w: list[MetricWindow],
    test_w: list[MetricWindow],
    corr_threshold: float,
) -> PreparedData:
    """Normalize pre-split parts and build the graph from the train part."""
    norm = fit_norm(train_w)
    train_n = [apply_norm(w, norm) for w in train_w]
    graph = build_graph(pearson_matrix(train_n), corr_threshold)
    return PreparedData(
        train=train_n,
        val=[apply_norm(w, norm) for w in val_w],
        test=[apply_norm(w, norm) for w in test_w],
        norm=norm,
        graph=graph,
    )


@dataclass
class RunResult:
    params: ModelParams
    history: TrainHistory
    val_metrics: EvalMetrics
    test_metrics: EvalMetrics
    prepared: PreparedData
    graph_used: MetricGraph  # identity when propagation is ablated off


def run_synthetic(
    scenario: ScenarioConfig,
    n_windows: int,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    data_seed: int,
    fractions: tuple[float, float, float] = DEFAULT_SPLIT,
    corr_threshold: float = DEFAULT_CORR_THRESHOLD,
) -> RunResult:
    """Generate, prepare, train, and score one synthetic experiment.

    data_seed drives generation and splitting through separate substreams;
    train_cfg.seed independently drives initialization and batch order, so
    data and optimization randomness can be varied apart.
    """
    rng = RngStream(data_seed)
    windows = generate(scenario, n_windows, rng.substream(0))
    prepared = prepare(windows, fractions, corr_threshold, rng.substream(1))
    return run_prepared(prepared, model_cfg, train_cfg)


def run_prepared(
    prepared: PreparedData, model_cfg: ModelConfig, train_cfg: TrainConfig
) -> RunResult:
    params, history = train(prepared.train, prepared.val, prepared.graph, train_cfg, model_cfg)
    g = effective_graph(prepared.graph, train_cfg)
    return RunResult(
        params=params,
        history=history,
        val_metrics=history.records[history.best_epoch].val,
        test_metrics=evaluate(params, g, prepared.test),
        prepared=prepared,
        graph_used=g,
    )

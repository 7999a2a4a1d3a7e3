"""Run configuration: one JSON file describing an entire experiment.

Parsing is strict: any key the schema does not know is rejected with its
full dotted path, so a typo like "learning_rte" fails loudly before any
work starts instead of silently training with defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from contention.data import ScenarioConfig
from contention.errors import ConfigError
from contention.graph import DEFAULT_CORR_THRESHOLD
from contention.ingest import IngestConfig, TraceSchema
from contention.model import ModelConfig
from contention.pipeline import DEFAULT_SPLIT
from contention.train import TrainConfig

OUT_DIR_ENV = "CONTENTION_OUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    schema: TraceSchema | None = None  # required only by ingestion commands
    ingest: IngestConfig = field(default_factory=IngestConfig)
    corr_threshold: float = DEFAULT_CORR_THRESHOLD
    split_fractions: tuple[float, float, float] = DEFAULT_SPLIT
    n_windows: int = 3000
    out_dir: str = "runs"

    def __post_init__(self):
        if not 0.0 <= self.corr_threshold <= 1.0:
            raise ConfigError(
                f"corr_threshold must lie in [0, 1], got {self.corr_threshold}"
            )
        if self.n_windows < 1:
            raise ConfigError(f"n_windows must be >= 1, got {self.n_windows}")
        if len(self.split_fractions) != 3:
            raise ConfigError(
                f"split_fractions needs 3 entries, got {len(self.split_fractions)}"
            )
        object.__setattr__(self, "split_fractions", tuple(self.split_fractions))
        if self.model.window_len != self.scenario.window_len:
            raise ConfigError(
                f"model.window_len {self.model.window_len} != "
                f"scenario.window_len {self.scenario.window_len}"
            )


def _strict_kwargs(section: str, data: dict, cls) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"config section '{section}' must be an object")
    allowed = {f.name for f in fields(cls)}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown config key '{section}.{key}'")
    return data


def _build_scenario(data: dict) -> ScenarioConfig:
    data = dict(_strict_kwargs("scenario", data, ScenarioConfig))
    groups = data.get("groups")
    if groups is not None:
        if not isinstance(groups, dict):
            raise ConfigError("scenario.groups must map group name to metric indices")
        data["groups"] = tuple((name, tuple(cols)) for name, cols in groups.items())
    return ScenarioConfig(**data)


def _build_schema(data: dict) -> TraceSchema:
    if not isinstance(data, dict):
        raise ConfigError("config section 'schema' must be an object")
    allowed = {"machine_column", "timestamp_column", "metric_columns"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown config key 'schema.{key}'")
    for key in allowed:
        if key not in data:
            raise ConfigError(f"config section 'schema' is missing '{key}'")
    columns = data["metric_columns"]
    if not isinstance(columns, dict):
        raise ConfigError("schema.metric_columns must map column name to resource group")
    return TraceSchema(
        machine_column=data["machine_column"],
        timestamp_column=data["timestamp_column"],
        metric_columns=tuple((col, group) for col, group in columns.items()),
    )


_TOP_LEVEL = {
    "scenario", "model", "train", "schema", "ingest",
    "corr_threshold", "split_fractions", "n_windows", "out_dir",
}


def run_config_from_dict(data: dict) -> RunConfig:
    for key in data:
        if key not in _TOP_LEVEL:
            raise ConfigError(f"unknown config key '{key}'")
    kwargs = {}
    if "scenario" in data:
        kwargs["scenario"] = _build_scenario(data["scenario"])
    if "model" in data:
        kwargs["model"] = ModelConfig(**_strict_kwargs("model", data["model"], ModelConfig))
    if "train" in data:
        kwargs["train"] = TrainConfig(**_strict_kwargs("train", data["train"], TrainConfig))
    if "schema" in data and data["schema"] is not None:
        kwargs["schema"] = _build_schema(data["schema"])
    if "ingest" in data:
        kwargs["ingest"] = IngestConfig(
            **_strict_kwargs("ingest", data["ingest"], IngestConfig)
        )
    for key in ("corr_threshold", "n_windows", "out_dir"):
        if key in data:
            kwargs[key] = data[key]
    if "split_fractions" in data:
        kwargs["split_fractions"] = tuple(data["split_fractions"])
    return RunConfig(**kwargs)


def load_run_config(path: str | Path | None) -> RunConfig:
    """Parse a config file; a missing path means all defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return run_config_from_dict(data)


def config_digest(cfg: RunConfig) -> str:
    """sha256 over the canonical JSON form of the config."""
    payload = dataclasses.asdict(cfg)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def resolve_out_dir(cli_value: str | None, cfg: RunConfig) -> Path:
    """--out beats the environment override, which beats the config file."""
    if cli_value:
        return Path(cli_value)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(cfg.out_dir)

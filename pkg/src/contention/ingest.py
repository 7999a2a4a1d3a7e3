"""Real-trace ingestion: raw machine samples to MetricWindows.

Input is a headered UTF-8 CSV with one sample per row: a machine id column,
an integer-seconds timestamp column, and one column per monitored metric.
Per machine the samples are bucket-mean resampled onto a fixed step, short
interior gaps are forward-filled, and sliding windows are cut from the
filled series; any window still touching a missing bucket is dropped.

Real traces carry no contention labels, so weak labeling assigns classes by
per-group utilization thresholds. Windows where no group runs hot stay
unlabeled and are excluded from supervised use.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from contention.data import GROUP_NAMES, ContentionClass, MetricWindow
from contention.errors import ConfigError, DataError, SchemaError

GROUP_CLASS = {
    "cpu": ContentionClass.CPU,
    "disk": ContentionClass.IO,
    "mem": ContentionClass.MEM,
    "net": ContentionClass.NET,
}


@dataclass(frozen=True)
class TraceSchema:
    """Column layout of a trace CSV.

    metric_columns pairs each metric column name with the resource group it
    belongs to; column order here fixes metric order in the windows.
    """

    machine_column: str
    timestamp_column: str
    metric_columns: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if not self.metric_columns:
            raise ConfigError("schema must map at least one metric column")
        seen = set()
        for column, group in self.metric_columns:
            if group not in GROUP_NAMES:
                raise ConfigError(
                    f"column '{column}' maps to unknown group '{group}'; "
                    f"expected one of {sorted(GROUP_NAMES)}"
                )
            if column in seen or column in (self.machine_column, self.timestamp_column):
                raise ConfigError(f"column '{column}' appears more than once in the schema")
            seen.add(column)

    @property
    def metric_names(self) -> tuple[str, ...]:
        return tuple(column for column, _ in self.metric_columns)

    def group_map(self) -> dict[str, tuple[int, ...]]:
        """Metric indices per resource group; groups absent from the schema are empty."""
        out: dict[str, list[int]] = {name: [] for name in GROUP_NAMES}
        for i, (_, group) in enumerate(self.metric_columns):
            out[group].append(i)
        return {name: tuple(cols) for name, cols in out.items()}


@dataclass(frozen=True)
class IngestConfig:
    window_len: int = 32
    stride: int | None = None  # defaults to window_len: non-overlapping windows
    resample_step: int = 60  # seconds per bucket
    max_fill: int = 3  # longest run of missing buckets forward fill may bridge

    def __post_init__(self):
        if self.window_len < 1:
            raise ConfigError(f"window_len must be >= 1, got {self.window_len}")
        if self.stride is not None and self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.resample_step < 1:
            raise ConfigError(f"resample_step must be >= 1, got {self.resample_step}")
        if self.max_fill < 0:
            raise ConfigError(f"max_fill must be >= 0, got {self.max_fill}")

    @property
    def effective_stride(self) -> int:
        return self.window_len if self.stride is None else self.stride


@dataclass(frozen=True)
class IngestResult:
    windows: list[MetricWindow]
    skipped_rows: int
    machines: int


def _resample(
    samples: list[tuple[int, np.ndarray]], step: int
) -> tuple[np.ndarray, np.ndarray, int]:
    """Bucket-mean resample; returns (series, observed mask, first timestamp)."""
    samples.sort(key=lambda pair: pair[0])
    t0 = samples[0][0]
    n_buckets = (samples[-1][0] - t0) // step + 1
    width = samples[0][1].shape[0]
    sums = np.zeros((n_buckets, width))
    counts = np.zeros(n_buckets, dtype=np.int64)
    for ts, row in samples:
        b = (ts - t0) // step
        sums[b] += row
        counts[b] += 1
    observed = counts > 0
    series = np.full((n_buckets, width), np.nan)
    series[observed] = sums[observed] / counts[observed, None]
    return series, observed, t0


def _forward_fill(series: np.ndarray, observed: np.ndarray, max_fill: int) -> np.ndarray:
    """Fill interior missing runs of length <= max_fill with the last value.

    Longer runs stay missing (NaN); the first and last buckets are observed
    by construction, so every missing run sits between two observations.
    """
    filled = series.copy()
    i = 0
    n = len(observed)
    while i < n:
        if observed[i]:
            i += 1
            continue
        j = i
        while j < n and not observed[j]:
            j += 1
        if j - i <= max_fill and i > 0:
            filled[i:j] = filled[i - 1]
        i = j
    return filled


def ingest_csv(
    path: str | Path, schema: TraceSchema, cfg: IngestConfig
) -> IngestResult:
    """Cut fixed-length windows from a raw trace CSV, one machine at a time.

    Rows that fail to parse (bad timestamp, non-numeric or non-finite metric)
    are skipped and counted rather than aborting the run; a trace with zero
    complete windows is an error, since silence there would be misleading.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"trace file not found: {path}")
    required = [schema.machine_column, schema.timestamp_column, *schema.metric_names]
    per_machine: dict[str, list[tuple[int, np.ndarray]]] = {}
    skipped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise SchemaError(f"trace {path} is missing required column '{column}'")
        for row in reader:
            try:
                ts = int(row[schema.timestamp_column])
                vals = np.array([float(row[c]) for c in schema.metric_names])
            except (TypeError, ValueError):
                skipped += 1
                continue
            if not np.all(np.isfinite(vals)):
                skipped += 1
                continue
            machine = row[schema.machine_column]
            if machine is None or machine == "":
                skipped += 1
                continue
            per_machine.setdefault(machine, []).append((ts, vals))

    t, stride = cfg.window_len, cfg.effective_stride
    windows: list[MetricWindow] = []
    for machine in sorted(per_machine):
        series, observed, t0 = _resample(per_machine[machine], cfg.resample_step)
        filled = _forward_fill(series, observed, cfg.max_fill)
        complete = np.all(np.isfinite(filled), axis=1)
        for start in range(0, len(filled) - t + 1, stride):
            if not complete[start : start + t].all():
                continue
            windows.append(
                MetricWindow(
                    values=filled[start : start + t].copy(),
                    label=None,
                    source=f"{machine}@{t0 + start * cfg.resample_step}",
                    metric_names=schema.metric_names,
                )
            )
    if not windows:
        raise DataError(
            f"trace {path} produced no complete windows "
            f"(T={t}, step={cfg.resample_step}s, {skipped} rows skipped)"
        )
    return IngestResult(windows=windows, skipped_rows=skipped, machines=len(per_machine))


def default_weak_thresholds(
    windows: list[MetricWindow], groups: dict[str, tuple[int, ...]]
) -> dict[str, float]:
    """Hot thresholds per group: fixed for cpu/mem, dataset-relative for disk/net.

    CPU and memory utilizations have natural saturation scales, so fixed
    cutoffs apply; disk and net rates do not, so those cutoffs sit at the
    95th percentile of the dataset's own window-level group means.
    """
    if not windows:
        raise DataError("cannot derive thresholds from an empty dataset")
    out = {"cpu": 0.85, "mem": 0.90}
    for name in ("disk", "net"):
        cols = groups.get(name, ())
        if not cols:
            out[name] = np.inf
            continue
        means = [float(w.values[:, list(cols)].mean()) for w in windows]
        out[name] = float(np.percentile(means, 95))
    return out


def weak_label(
    window: MetricWindow,
    thresholds: dict[str, float],
    groups: dict[str, tuple[int, ...]],
) -> int | None:
    """Threshold heuristic: one hot group names the class, several mean HYBRID.

    A group is hot when the window mean of its metrics exceeds its threshold.
    No hot group yields no label; callers drop such windows from supervised
    splits rather than inventing a sixth class.
    """
    hot = []
    for name in GROUP_NAMES:
        cols = groups.get(name, ())
        if not cols:
            continue
        if float(window.values[:, list(cols)].mean()) > thresholds[name]:
            hot.append(name)
    if not hot:
        return None
    if len(hot) >= 2:
        return int(ContentionClass.HYBRID)
    return int(GROUP_CLASS[hot[0]])


def apply_weak_labels(
    windows: list[MetricWindow],
    groups: dict[str, tuple[int, ...]],
    thresholds: dict[str, float] | None = None,
) -> tuple[list[MetricWindow], int]:
    """Label every window it can; returns (labeled windows, dropped count)."""
    if thresholds is None:
        thresholds = default_weak_thresholds(windows, groups)
    labeled = []
    dropped = 0
    for w in windows:
        label = weak_label(w, thresholds, groups)
        if label is None:
            dropped += 1
        else:
            labeled.append(replace(w, label=label))
    return labeled, dropped

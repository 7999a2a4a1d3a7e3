"""Windowed metric datasets: synthetic contention scenarios and plumbing.

The synthetic simulator is the ground-truth data source. Each window is an
AR(1) noise floor per metric with one contention class's signature pattern
injected into that class's resource group, plus a lagged leak of every
contended group's pattern into one fixed downstream group. The leak chain
(cpu -> disk -> net, mem -> cpu, net -> mem) is what gives the correlation
graph real class-relevant structure to discover.

Also here: a hand-written threshold baseline used to certify that generated
scenarios are learnable at all, z-score normalization fitted on the training
split, stratified splitting, and the CSV-plus-manifest dataset interchange.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from contention.errors import ConfigError, DataError, SchemaError, ShapeError
from contention.rng import RngStream


class ContentionClass(IntEnum):
    CPU = 0
    IO = 1
    MEM = 2
    NET = 3
    HYBRID = 4


CLASS_NAMES = ("CPU", "IO", "MEM", "NET", "HYBRID")
NUM_CLASSES = len(CLASS_NAMES)
GROUP_NAMES = ("cpu", "mem", "disk", "net")
# Fixed directed leak map: a contended group bleeds a delayed copy of its
# pattern into exactly one downstream group.
DOWNSTREAM = {"cpu": "disk", "disk": "net", "mem": "cpu", "net": "mem"}

DATASET_FORMAT_VERSION = 1


@dataclass(frozen=True)
class MetricWindow:
    """One T x D slice of aligned metric series, optionally labeled."""

    values: np.ndarray  # (T, D), rows are timesteps
    label: int | None
    source: str
    metric_names: tuple[str, ...]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeError(f"window values must be (T, D), got shape {v.shape}")
        if len(self.metric_names) != v.shape[1]:
            raise ShapeError(
                f"{len(self.metric_names)} metric names for {v.shape[1]} columns"
            )
        if not np.all(np.isfinite(v)):
            raise DataError(f"window '{self.source}' contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def window_len(self) -> int:
        return self.values.shape[0]

    @property
    def metric_count(self) -> int:
        return self.values.shape[1]


def default_groups(metric_count: int) -> tuple[tuple[str, tuple[int, ...]], ...]:
    """Equal quarters of [0, D) in canonical group order."""
    if metric_count % 4 != 0 or metric_count < 4:
        raise ConfigError(
            f"metric count {metric_count} does not divide into 4 equal resource groups; "
            "pass an explicit group map"
        )
    per = metric_count // 4
    return tuple(
        (name, tuple(range(i * per, (i + 1) * per)))
        for i, name in enumerate(GROUP_NAMES)
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of the synthetic contention simulator."""

    metric_count: int = 12  # D
    window_len: int = 32  # T
    separation: float = 1.0  # s, injected signal amplitude
    leakage: float = 0.3  # cross-group coupling strength
    leak_lag: int = 4  # steps of delay on leaked signal
    ar_coeff: float = 0.8
    noise_std: float = 0.2
    groups: tuple[tuple[str, tuple[int, ...]], ...] | None = None

    def __post_init__(self):
        if self.metric_count < 4:
            raise ConfigError(f"need at least 4 metrics, got {self.metric_count}")
        if self.window_len < 8:
            raise ConfigError(f"window_len must be >= 8, got {self.window_len}")
        if self.separation < 0:
            raise ConfigError(f"separation must be >= 0, got {self.separation}")
        if not 0.0 <= self.leakage <= 1.0:
            raise ConfigError(f"leakage must lie in [0, 1], got {self.leakage}")
        if not 0 <= self.leak_lag < self.window_len:
            raise ConfigError(
                f"leak_lag must lie in [0, window_len), got {self.leak_lag}"
            )
        if not abs(self.ar_coeff) < 1.0:
            raise ConfigError(f"ar_coeff must lie in (-1, 1), got {self.ar_coeff}")
        if self.noise_std <= 0:
            raise ConfigError(f"noise_std must be positive, got {self.noise_std}")
        groups = self.groups
        if groups is None:
            groups = default_groups(self.metric_count)
        else:
            groups = _canonical_groups(groups, self.metric_count)
        object.__setattr__(self, "groups", groups)

    @property
    def group_map(self) -> dict[str, tuple[int, ...]]:
        return dict(self.groups)

    def metric_names(self) -> tuple[str, ...]:
        names = [""] * self.metric_count
        for group, cols in self.groups:
            for j, col in enumerate(cols):
                names[col] = f"{group}{j}"
        return tuple(names)


def _canonical_groups(groups, metric_count: int):
    mapping = dict(groups)
    if set(mapping) != set(GROUP_NAMES):
        raise ConfigError(
            f"group map must name exactly {sorted(GROUP_NAMES)}, got {sorted(mapping)}"
        )
    seen: set[int] = set()
    for name in GROUP_NAMES:
        cols = tuple(int(c) for c in mapping[name])
        if not cols:
            raise ConfigError(f"group '{name}' is empty")
        if seen & set(cols):
            raise ConfigError(f"group '{name}' overlaps another group")
        seen |= set(cols)
        mapping[name] = cols
    if seen != set(range(metric_count)):
        raise ConfigError(
            f"groups must cover metrics 0..{metric_count - 1} exactly; covered {sorted(seen)}"
        )
    return tuple((name, mapping[name]) for name in GROUP_NAMES)


def _delay(pattern: np.ndarray, lag: int) -> np.ndarray:
    """Shift a pattern right by `lag` steps, zero-padding the head."""
    if lag == 0:
        return pattern.copy()
    out = np.zeros_like(pattern)
    out[lag:] = pattern[:-lag]
    return out


def _base_patterns(cfg: ScenarioConfig) -> dict[str, np.ndarray]:
    """The four class signature series at amplitude s over T steps."""
    t = np.arange(cfg.window_len, dtype=np.float64)
    s = cfg.separation
    quarter = cfg.window_len // 4
    u = np.minimum(t / quarter, 1.0)
    plateau = s * (3.0 * u * u - 2.0 * u ** 3)  # smooth step up, then held
    ramp = s * t / (cfg.window_len - 1)
    spikes = np.where(t.astype(np.int64) % 5 == 0, 2.0 * s, 0.0)
    burst = np.zeros(cfg.window_len)
    mid = slice(quarter, 3 * quarter)
    burst[mid] = s * np.sin(2.0 * np.pi * t[mid] / 8.0)
    return {"plateau": plateau, "ramp": ramp, "spikes": spikes, "burst": burst}


def class_signals(cfg: ScenarioConfig, label: int) -> dict[str, np.ndarray]:
    """Injected signal per resource group for one class, leaks included.

    Primary signatures: CPU -> plateau on the cpu group, MEM -> ramp on mem,
    IO -> spike train on disk, NET -> sinusoid burst on net, HYBRID -> the
    CPU plateau plus the IO spike train at 0.7 amplitude delayed by the leak
    lag. Every contended group then leaks leakage * its own (already scaled
    and delayed) pattern, delayed by another lag, into its downstream group.
    """
    base = _base_patterns(cfg)
    if label == ContentionClass.CPU:
        primary = {"cpu": base["plateau"]}
    elif label == ContentionClass.IO:
        primary = {"disk": base["spikes"]}
    elif label == ContentionClass.MEM:
        primary = {"mem": base["ramp"]}
    elif label == ContentionClass.NET:
        primary = {"net": base["burst"]}
    elif label == ContentionClass.HYBRID:
        primary = {
            "cpu": base["plateau"],
            "disk": 0.7 * _delay(base["spikes"], cfg.leak_lag),
        }
    else:
        raise DataError(f"label {label} is outside [0, {NUM_CLASSES - 1}]")
    signals = {name: sig.copy() for name, sig in primary.items()}
    for name, sig in primary.items():
        down = DOWNSTREAM[name]
        leaked = cfg.leakage * _delay(sig, cfg.leak_lag)
        signals[down] = signals.get(down, np.zeros(cfg.window_len)) + leaked
    return signals


def _one_window(cfg: ScenarioConfig, stream: RngStream, index: int) -> MetricWindow:
    gen = stream.generator()
    label = int(gen.integers(NUM_CLASSES))
    eps = gen.normal(0.0, cfg.noise_std, size=(cfg.window_len, cfg.metric_count))
    x = np.empty_like(eps)
    x[0] = eps[0]
    for t in range(1, cfg.window_len):
        x[t] = cfg.ar_coeff * x[t - 1] + eps[t]
    group_map = cfg.group_map
    for name, sig in class_signals(cfg, label).items():
        x[:, list(group_map[name])] += sig[:, None]
    return MetricWindow(
        values=x,
        label=label,
        source=f"synthetic:{stream.seed}:{index}",
        metric_names=cfg.metric_names(),
    )


def generate(cfg: ScenarioConfig, n: int, rng: RngStream) -> list[MetricWindow]:
    """n labeled synthetic windows, class drawn uniformly per window.

    Every window uses its own RNG substream indexed by window number, so the
    dataset is identical no matter what order (or concurrency) produced it.
    """
    if n < 1:
        raise ConfigError(f"window count must be >= 1, got {n}")
    return [_one_window(cfg, rng.substream(i), i) for i in range(n)]


def _group_series(window: MetricWindow, cols: tuple[int, ...]) -> np.ndarray:
    return window.values[:, list(cols)].mean(axis=1)


def baseline_predict(window: MetricWindow, cfg: ScenarioConfig) -> int:
    """Hand-written threshold classifier over group statistics.

    Exists to certify scenario learnability independently of the trained
    model. Uses the group-mean level for the plateau and ramp signatures, a
    spike count above the disk group's median for the spike train, and the
    mid-window variance of the net group mean for the zero-mean sinusoid
    (its time average vanishes, so a plain level test cannot see it).
    """
    scale = max(cfg.separation, 1e-12)
    group_map = cfg.group_map
    series = {name: _group_series(window, group_map[name]) for name in GROUP_NAMES}
    cpu_level = float(series["cpu"].mean())
    mem_level = float(series["mem"].mean())
    disk = series["disk"]
    disk_excess = disk - float(np.median(disk))
    spike_count = int((disk_excess > 0.9 * scale).sum())
    quarter = window.window_len // 4
    mid = series["net"][quarter : 3 * quarter]
    net_power = float(((mid - mid.mean()) ** 2).mean())

    hot_cpu = cpu_level > 0.43 * scale
    hot_mem = mem_level > 0.25 * scale
    hot_disk = spike_count >= 2
    hot_net = net_power > scale * scale / 6.0
    if hot_cpu and hot_disk:
        return int(ContentionClass.HYBRID)
    if hot_cpu:
        return int(ContentionClass.CPU)
    if hot_disk:
        return int(ContentionClass.IO)
    if hot_mem:
        return int(ContentionClass.MEM)
    if hot_net:
        return int(ContentionClass.NET)
    ratios = {
        ContentionClass.CPU: cpu_level / (0.43 * scale),
        ContentionClass.IO: float(disk_excess.max()) / (0.9 * scale),
        ContentionClass.MEM: mem_level / (0.25 * scale),
        ContentionClass.NET: net_power / (scale * scale / 6.0),
    }
    return int(max(ratios, key=lambda c: ratios[c]))


def baseline_accuracy(windows: list[MetricWindow], cfg: ScenarioConfig) -> float:
    if not windows:
        raise DataError("cannot score an empty dataset")
    hits = sum(1 for w in windows if w.label is not None and baseline_predict(w, cfg) == w.label)
    return hits / len(windows)


@dataclass(frozen=True)
class NormStats:
    """Per-metric z-score statistics fitted on the training split only."""

    mean: np.ndarray  # (D,)
    std: np.ndarray  # (D,), floored at 1e-8

    STD_FLOOR = 1e-8

    @property
    def metric_count(self) -> int:
        return self.mean.shape[0]


def fit_norm(windows: list[MetricWindow]) -> NormStats:
    """Population mean/std per metric over all rows of all windows."""
    if not windows:
        raise DataError("cannot fit normalization on an empty split")
    stacked = np.concatenate([w.values for w in windows], axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), NormStats.STD_FLOOR)
    return NormStats(mean=mean, std=std)


def apply_norm(window: MetricWindow, stats: NormStats) -> MetricWindow:
    if window.metric_count != stats.metric_count:
        raise ShapeError(
            f"window has {window.metric_count} metrics, stats cover {stats.metric_count}"
        )
    return replace(window, values=(window.values - stats.mean) / stats.std)


def split(
    windows: list[MetricWindow],
    fractions: tuple[float, float, float],
    rng: RngStream,
) -> tuple[list[MetricWindow], list[MetricWindow], list[MetricWindow]]:
    """Seeded stratified train/val/test split.

    Within each class the windows are shuffled and apportioned by largest
    remainder, so every split's per-class count is within one window of the
    exact proportional share. Unlabeled windows form their own stratum.
    """
    if len(fractions) != 3:
        raise ConfigError(f"need 3 split fractions, got {len(fractions)}")
    if any(f <= 0 for f in fractions):
        raise ConfigError(f"split fractions must be positive, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got sum {sum(fractions)}")
    if not windows:
        raise DataError("cannot split an empty dataset")
    strata: dict[int, list[int]] = {}
    for i, w in enumerate(windows):
        strata.setdefault(-1 if w.label is None else int(w.label), []).append(i)
    gen = rng.generator()
    parts: tuple[list[MetricWindow], ...] = ([], [], [])
    for key in sorted(strata):
        idx = np.array(strata[key])
        gen.shuffle(idx)
        counts = _apportion(len(idx), fractions)
        offset = 0
        for part, count in zip(parts, counts):
            part.extend(windows[i] for i in idx[offset : offset + count])
            offset += count
    for name, part in zip(("train", "val", "test"), parts):
        if not part:
            raise ConfigError(f"split fractions {fractions} leave the {name} split empty")
    return parts


def _apportion(n: int, fractions: tuple[float, float, float]) -> list[int]:
    """Largest-remainder rounding of n into len(fractions) integer parts."""
    exact = [f * n for f in fractions]
    counts = [int(np.floor(e)) for e in exact]
    remainders = sorted(
        range(len(fractions)), key=lambda i: (-(exact[i] - counts[i]), i)
    )
    for i in range(n - sum(counts)):
        counts[remainders[i]] += 1
    return counts


# ---------------------------------------------------------------------------
# Dataset interchange: long-form CSV plus a JSON manifest sidecar.


def manifest_path(dataset_path: str | Path) -> Path:
    p = Path(dataset_path)
    return p.with_name(p.stem + ".manifest.json")


def write_dataset(path: str | Path, windows: list[MetricWindow], source: str = "") -> None:
    """One CSV row per (window, t, metric) cell, plus the manifest sidecar.

    Values are written with repr, which round-trips doubles exactly, so the
    same windows always produce byte-identical files.
    """
    if not windows:
        raise DataError("refusing to write an empty dataset")
    first = windows[0]
    for w in windows[1:]:
        if w.values.shape != first.values.shape:
            raise ShapeError(
                f"window '{w.source}' has shape {w.values.shape}, expected {first.values.shape}"
            )
        if w.metric_names != first.metric_names:
            raise DataError(f"window '{w.source}' has mismatched metric names")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_id", "label", "metric_name", "t", "value"])
        for wid, w in enumerate(windows):
            label = "" if w.label is None else str(int(w.label))
            for t in range(w.window_len):
                for d, name in enumerate(w.metric_names):
                    writer.writerow([wid, label, name, t, repr(float(w.values[t, d]))])
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "n_windows": len(windows),
        "window_len": first.window_len,
        "metric_count": first.metric_count,
        "num_classes": NUM_CLASSES,
        "metric_names": list(first.metric_names),
        "class_names": list(CLASS_NAMES),
        "source": source or first.source,
    }
    manifest_path(path).write_text(json.dumps(manifest, indent=2) + "\n")


def read_dataset(path: str | Path) -> list[MetricWindow]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    mpath = manifest_path(path)
    if not mpath.exists():
        raise DataError(f"dataset manifest not found: {mpath}")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest {mpath} is not valid JSON: {exc}") from exc
    for key in ("n_windows", "window_len", "metric_count", "metric_names", "source"):
        if key not in manifest:
            raise SchemaError(f"manifest {mpath} is missing key '{key}'")
    t_len = int(manifest["window_len"])
    names = tuple(manifest["metric_names"])
    if len(names) != int(manifest["metric_count"]):
        raise SchemaError(
            f"manifest lists {len(names)} metric names for metric_count "
            f"{manifest['metric_count']}"
        )
    col = {name: i for i, name in enumerate(names)}
    values: dict[int, np.ndarray] = {}
    labels: dict[int, int | None] = {}
    filled: dict[int, int] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["window_id", "label", "metric_name", "t", "value"]
        if reader.fieldnames != expected:
            raise SchemaError(
                f"dataset header {reader.fieldnames} does not match {expected}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                wid = int(row["window_id"])
                t = int(row["t"])
                value = float(row["value"])
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: unparseable row: {exc}") from exc
            name = row["metric_name"]
            if name not in col:
                raise SchemaError(f"{path}:{lineno}: unknown metric '{name}'")
            if not 0 <= t < t_len:
                raise DataError(f"{path}:{lineno}: t={t} outside [0, {t_len})")
            if wid not in values:
                values[wid] = np.full((t_len, len(names)), np.nan)
                labels[wid] = int(row["label"]) if row["label"] else None
                filled[wid] = 0
            values[wid][t, col[name]] = value
            filled[wid] += 1
    if len(values) != int(manifest["n_windows"]):
        raise DataError(
            f"{path} holds {len(values)} windows, manifest says {manifest['n_windows']}"
        )
    windows = []
    for wid in sorted(values):
        if filled[wid] != t_len * len(names) or not np.all(np.isfinite(values[wid])):
            raise DataError(f"{path}: window {wid} is incomplete")
        windows.append(
            MetricWindow(
                values=values[wid],
                label=labels[wid],
                source=f"{manifest['source']}[{wid}]",
                metric_names=names,
            )
        )
    return windows

"""Sensitivity sweeps: batch size, training-set fraction, metric count.

Runs the three built-in sweep harnesses over a common synthetic scenario
and writes one CSV per sweep. Defaults are sized to finish in a couple of
minutes on one core; pass --n-windows/--max-epochs to scale up.

Usage:
    python scripts/run_sensitivity.py --out runs/sensitivity
"""

import argparse
import sys
import time
from pathlib import Path

from contention.sweeps import (
    SweepSpec,
    sweep_batch,
    sweep_datasize,
    sweep_dim,
    write_sweep_csv,
)
from contention.train import METRIC_FIELDS, TrainConfig


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--n-windows", type=int, default=600)
    parser.add_argument("--max-epochs", type=int, default=12)
    parser.add_argument("--kinds", default="batch,datasize,dim",
                        help="which sweeps to run, comma-separated")
    parser.add_argument("--out", default="runs/sensitivity")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
    spec = SweepSpec(n_windows=args.n_windows,
                     train_cfg=TrainConfig(max_epochs=args.max_epochs))
    runners = {"batch": sweep_batch, "datasize": sweep_datasize, "dim": sweep_dim}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for kind in args.kinds.split(","):
        kind = kind.strip()
        if kind not in runners:
            print(f"unknown sweep kind '{kind}'", file=sys.stderr)
            return 2
        start = time.perf_counter()
        table = runners[kind](spec, seeds=seeds)
        elapsed = time.perf_counter() - start
        path = out_dir / f"sweep_{table.kind}.csv"
        write_sweep_csv(table, path)
        print(f"{table.setting_name} sweep ({elapsed:.1f}s) -> {path}")
        for row in table.rows:
            cells = "  ".join(f"{m}={row.mean(m):.4f}" for m in METRIC_FIELDS)
            print(f"  {table.setting_name}={row.setting:g}: {cells}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

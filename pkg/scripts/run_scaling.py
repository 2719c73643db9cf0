#!/usr/bin/env python3
"""Dimension-scaling campaign: QFT(d) random restarts for d = 2..6.

Desk-scale by default (50 runs per dimension, d <= 4); pass --dims and
--runs for the full-size sweep. Emits records.csv, summary.json, and one
scatter file per dimension under --out.
"""

import argparse
import json
import os

from magicarp import BenchmarkSpec, MagicarpConfig, campaign_summary, run_campaign
from magicarp.bench import write_records_csv, write_scatter_files, write_summary_json


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4])
    parser.add_argument("--runs", type=int, default=50)
    parser.add_argument("--n-steps", type=int, default=128)
    parser.add_argument("--max-iters", type=int, default=500)
    parser.add_argument("--seed", type=int, default=2026)
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out", default="out/scaling")
    args = parser.parse_args()

    spec = BenchmarkSpec(
        dims=tuple(args.dims),
        runs_per_dim=args.runs,
        target="qft",
        magicarp=MagicarpConfig(n_steps=args.n_steps, max_iters=args.max_iters),
        base_seed=args.seed,
    )
    records = run_campaign(spec, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    write_records_csv(os.path.join(args.out, "records.csv"), records)
    write_summary_json(os.path.join(args.out, "summary.json"), records)
    write_scatter_files(args.out, records)
    print(json.dumps(campaign_summary(records), indent=2))
    print(f"wrote campaign outputs to {args.out}")


if __name__ == "__main__":
    main()

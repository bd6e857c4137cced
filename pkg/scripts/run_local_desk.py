#!/usr/bin/env python3
"""Run the desk-scale quotient experiment and print the winner statistics."""

import argparse
import json
from pathlib import Path

from satkit.cli import run_experiment
from satkit.satlocal import desk_local_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--output", default="runs/local_desk")
    args = ap.parse_args()

    cfg = desk_local_config(master_seed=args.seed)
    spec = {"kind": "local", "config": cfg.to_dict(), "trials": args.trials,
            "master_seed": args.seed}
    log, summary, manifest = run_experiment(spec, Path(args.output),
                                            threads=args.threads)
    records = [json.loads(line) for line in log.read_text().splitlines()]
    winners = [r for r in records if r["outcome"]["winner_j"] is not None]
    bounds = [r["certificate"]["isomorphism_bound"] for r in records
              if "certificate" in r]
    print(f"trials {len(records)}, winners {len(winners)}")
    if bounds:
        print(f"isomorphism bounds: max {max(bounds):.6f}")
    print(f"log: {log}\nsummary: {summary}\nmanifest: {manifest}")


if __name__ == "__main__":
    main()

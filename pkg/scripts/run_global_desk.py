#!/usr/bin/env python3
"""Run the desk-scale rotation-sum experiment over Haar rotations."""

import argparse
import json
import math
from pathlib import Path

from satkit.cli import run_experiment
from satkit.constants import DEFAULTS
from satkit.satglobal import planned_global_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--identity-u", action="store_true",
                    help="force u = Id (every trial lands in case 2)")
    ap.add_argument("--c-prime", type=float, default=math.sqrt(2.0),
                    help="relaxed tie constant; sqrt(2) makes alpha0 = 1 at "
                         "k = 2 so Haar rotations take the case-2 branch")
    ap.add_argument("--output", default="runs/global_desk")
    args = ap.parse_args()

    constants = DEFAULTS.override(c_prime=args.c_prime)
    cfg = planned_global_config(48, 2, 24, master_seed=args.seed,
                                constants=constants)
    spec = {"kind": "global", "config": cfg.to_dict(), "trials": args.trials,
            "master_seed": args.seed,
            "constants_overrides": {"c_prime": args.c_prime},
            "force_identity_rotation": bool(args.identity_u)}
    log, summary, manifest = run_experiment(spec, Path(args.output),
                                            threads=args.threads)
    records = [json.loads(line) for line in log.read_text().splitlines()]
    winners = [r for r in records if r["outcome"]["winner_j"] is not None]
    cases = [r["outcome"]["case"] for r in records]
    print(f"trials {len(records)}, case1 {cases.count(1)}, case2 {cases.count(2)}, "
          f"winners {len(winners)}")
    print(f"log: {log}\nsummary: {summary}\nmanifest: {manifest}")


if __name__ == "__main__":
    main()

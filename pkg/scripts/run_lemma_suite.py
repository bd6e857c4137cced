#!/usr/bin/env python3
"""Run every lemma checker at its standard configuration."""

import argparse

from satkit.cli import main as cli_main


SUITES = [
    ["lemma", "meanwidth", "--s", "20", "--d", "5", "--sigma", "0.3",
     "--trials", "2000"],
    ["lemma", "shrinking", "--s", "40", "--d", "5", "--t", "0.4",
     "--segments", "30", "--trials", "300"],
    ["lemma", "decouple", "--n-max", "9", "--instances", "200"],
    ["lemma", "case1", "--n", "200", "--k", "3", "--c", "0.1",
     "--u", "reflect", "--trials", "300"],
    ["lemma", "case2", "--n", "100", "--k", "3", "--gamma", "0.3",
     "--T", "identity", "--trials", "300"],
    ["lemma", "cpbound", "--N", "16", "--k", "2", "--p", "1.5"],
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--output", default="runs/lemmas")
    args = ap.parse_args()
    for argv in SUITES:
        print("==>", " ".join(argv))
        cli_main(argv + ["--output", args.output])


if __name__ == "__main__":
    main()

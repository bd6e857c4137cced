"""Command-line entry point: plan, run, lemma, report.

Experiment files are JSON:

    {
      "kind": "local" | "global",
      "config": { ... LocalConfig / GlobalConfig fields ... },
      "trials": 100,
      "master_seed": 7,
      "output_dir": "runs/demo",
      "constants_overrides": {"c_prime": 1.4142135623730951}
    }

Trial logs are JSON-lines ordered by trial index and byte-reproducible for
a fixed manifest; every record embeds the constants snapshot.  Scientific
null results (no winners) exit 0; only contract violations exit nonzero.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, bodies, decouple, meanwidth, satglobal, satlocal
from .constants import DEFAULTS, Constants
from .errors import CertificateRefusedError, ConfigError, SatkitError
from .randcore import LinearMap, SeedStream, haar_rotation, haar_subspace


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _parse_constants(pairs) -> Constants:
    overrides = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--constants expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key] = float(val)
    return DEFAULTS.override(**overrides)


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dumps(payload) + "\n")


# ---------------------------------------------------------------------------
# plan

def cmd_plan(args) -> int:
    try:
        constants = _parse_constants(args.constants)
        report = satlocal.plan(args.q, args.n, args.m0, epsilon=args.epsilon,
                               constants=constants)
    except SatkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"alpha exponent   : {report.alpha_exponent:.6f}")
    print(f"k_max            : {report.k_max}")
    print(f"N chosen         : {report.N_chosen}")
    print(f"kappa chosen     : {report.kappa_chosen:.6g}")
    print(f"feasible         : {report.feasible}")
    print(f"{'constraint':44s} {'lhs':>14s} {'rhs':>14s}  ok")
    for name, lhs, rhs, sat in report.constraints:
        print(f"{name:44s} {lhs:14.6g} {rhs:14.6g}  {'yes' if sat else 'NO'}")
    if args.output:
        _write_json(Path(args.output) / "plan.json",
                    {"plan": report.to_dict(), "constants": constants.to_dict(),
                     "tool_version": __version__})
    return 0 if report.feasible else 2


# ---------------------------------------------------------------------------
# run

def _local_trial(cfg: satlocal.LocalConfig, constants: Constants, t: int) -> dict:
    stream = SeedStream(cfg.master_seed, t)
    g = satlocal.assemble_gaussian_blocks(cfg.n, cfg.k, cfg.N, stream)
    q_sub = haar_subspace(cfg.n, cfg.m, stream.substream(7777))
    out = satlocal.run_trial(cfg, g, q_sub)
    rec = {"trial": t, "kind": "local", "outcome": out.to_dict(),
           "constants": constants.to_dict()}
    if out.winner_j is not None:
        try:
            cert = satlocal.certify(cfg, g, q_sub, out.winner_j)
            rec["certificate"] = cert.to_dict()
        except CertificateRefusedError as exc:
            rec["certificate_refused"] = {
                "isomorphism": exc.isomorphism,
                "complementation": exc.complementation}
    return rec


def _global_trial(cfg: satglobal.GlobalConfig, constants: Constants, t: int,
                  force_identity_u: bool) -> dict:
    stream = SeedStream(cfg.master_seed, t)
    g = satlocal.assemble_gaussian_blocks(cfg.n, cfg.k, cfg.N, stream)
    if force_identity_u:
        u = LinearMap.from_array(np.eye(cfg.n))
    else:
        u = haar_rotation(cfg.n, stream.substream(7778))
    out = satglobal.run_global_trial(cfg, g, u)
    rec = {"trial": t, "kind": "global", "outcome": out.to_dict(),
           "constants": constants.to_dict()}
    if out.winner_j is not None:
        try:
            cert = satglobal.certify_global(cfg, g, u, out)
            rec["certificate"] = cert.to_dict()
        except CertificateRefusedError as exc:
            rec["certificate_refused"] = {
                "isomorphism": exc.isomorphism,
                "complementation": exc.complementation}
    return rec


def run_experiment(spec: dict, output_dir: Path,
                   threads: int = 1) -> tuple[Path, Path, Path]:
    """Execute an experiment spec; returns (log, summary, manifest) paths."""
    kind = spec.get("kind")
    if kind not in ("local", "global"):
        raise ConfigError(f"experiment kind must be local or global, got {kind!r}")
    trials = int(spec.get("trials", 1))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    master_seed = int(spec.get("master_seed", 0))
    constants = DEFAULTS.override(**spec.get("constants_overrides", {}))
    cfg_dict = dict(spec.get("config", {}))
    cfg_dict.setdefault("master_seed", master_seed)
    force_identity = bool(spec.get("force_identity_rotation", False))
    if kind == "local":
        cfg = satlocal.LocalConfig.from_dict(cfg_dict)
        worker = lambda t: _local_trial(cfg, constants, t)
    else:
        cfg = satglobal.GlobalConfig.from_dict(cfg_dict)
        worker = lambda t: _global_trial(cfg, constants, t, force_identity)

    started = time.time()
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(worker, range(trials)))
    else:
        records = [worker(t) for t in range(trials)]
    finished = time.time()

    output_dir.mkdir(parents=True, exist_ok=True)
    log_path = output_dir / "trials.jsonl"
    lines = [_dumps(rec) for rec in records]
    log_path.write_text("".join(line + "\n" for line in lines))
    digests = [hashlib.sha256(line.encode()).hexdigest() for line in lines]

    summary_path = output_dir / "summary.csv"
    _write_summary(summary_path, kind, records)

    manifest = {"tool_version": __version__, "kind": kind,
                "master_seed": master_seed, "trials": trials,
                "constants": constants.to_dict(), "config": cfg.to_dict(),
                "started_at": started, "finished_at": finished,
                "trial_digests": digests}
    manifest_path = output_dir / "manifest.json"
    _write_json(manifest_path, manifest)
    return log_path, summary_path, manifest_path


def _write_summary(path: Path, kind: str, records: list[dict]):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if kind == "local":
            writer.writerow(["trial", "winner_j", "min_swallow_certified",
                             "spill_holds", "window_holds", "theta1",
                             "thetabar1", "mstar_dp", "isomorphism_bound",
                             "complementation_bound"])
            for rec in records:
                out = rec["outcome"]
                cert = rec.get("certificate") or {}
                writer.writerow([
                    rec["trial"], out["winner_j"],
                    min(out["swallow_certified"]),
                    sum(out["spill_flags"]), sum(out["window_flags"]),
                    out["theta1"], out["thetabar1"], out["mstar_dp"],
                    cert.get("isomorphism_bound", ""),
                    cert.get("complementation_bound", "")])
        else:
            writer.writerow(["trial", "alpha", "case", "winner_j",
                             "winner_margin", "isomorphism_bound",
                             "complementation_bound"])
            for rec in records:
                out = rec["outcome"]
                cert = rec.get("certificate") or {}
                writer.writerow([
                    rec["trial"], out["alpha"], out["case"], out["winner_j"],
                    out.get("winner_margin", ""),
                    cert.get("isomorphism_bound", ""),
                    cert.get("complementation_bound", "")])


def cmd_run(args) -> int:
    path = Path(args.experiment)
    try:
        spec = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read experiment file: {exc}", file=sys.stderr)
        return 1
    if args.trials is not None:
        spec["trials"] = args.trials
    if args.seed is not None:
        spec["master_seed"] = args.seed
    out_dir = Path(args.output) if args.output else \
        Path(spec.get("output_dir", "runs/" + path.stem))
    try:
        log, summary, manifest = run_experiment(spec, out_dir,
                                                threads=args.threads)
    except (ConfigError, SatkitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    n_winners = 0
    for line in log.read_text().splitlines():
        rec = json.loads(line)
        n_winners += rec["outcome"].get("winner_j") is not None
    print(f"wrote {log}")
    print(f"wrote {summary}")
    print(f"wrote {manifest}")
    print(f"winners: {n_winners}/{spec.get('trials', 1)}")
    return 0


# ---------------------------------------------------------------------------
# lemma suites

def cmd_lemma(args) -> int:
    seed = SeedStream(args.seed)
    suite = args.suite
    if suite == "meanwidth":
        rep = meanwidth.check_mean_width_image(
            bodies.ball(args.s), d=args.d, sigma=args.sigma,
            trials=args.trials, seed=seed)
        details = rep.details or {}
        rel = abs(details["predicted_mean"] - rep.empirical_mean) \
            / details["predicted_mean"]
        print(f"mean M*(AS) = {rep.empirical_mean:.6f}, predicted "
              f"{details['predicted_mean']:.6f} (rel err {rel:.4%})")
        print(f"tail freq {details['tail_frequency']:.4f} vs bound "
              f"{rep.predicted_bound:.4f}")
    elif suite == "shrinking":
        rng = seed.substream(1).rng()
        segs = [bodies.segment(v) for v in
                rng.standard_normal((args.segments, args.s))]
        body = bodies.PConvexHull(1.0, segs)
        rep = meanwidth.check_shrinking(body, d=args.d, t=args.t,
                                        mode=args.mode, trials=args.trials,
                                        seed=seed)
        print(f"success {rep.successes}/{rep.trials} vs bound "
              f"{rep.predicted_bound:.4f}")
    elif suite == "decouple":
        rng = seed.rng()
        agreements = 0
        for i in range(args.instances):
            n = int(rng.integers(3, args.n_max + 1))
            lam = _random_stochastic(n, rng)
            inst = decouple.DecouplingInstance(n, lam)
            found = decouple.find_decoupling_set(inst)
            oracle = decouple.exhaustive_oracle(inst)
            ok = (len(found.J) >= found.ell
                  and found.min_outside_mass >= 1 / 3 - 1e-9
                  and oracle.min_outside_mass >= 1 / 3 - 1e-9)
            agreements += ok
        rep = meanwidth.LemmaCheckReport(
            lemma_id="decouple", trials=args.instances, successes=agreements,
            predicted_bound=1.0, empirical_mean=agreements / args.instances)
        print(f"oracle agreements {agreements}/{args.instances}")
    elif suite == "case1":
        if args.u == "identity":
            u = LinearMap.from_array(np.eye(args.n))
        elif args.u == "negidentity":
            u = LinearMap.from_array(-np.eye(args.n))
        elif args.u == "reflect":
            # half the axes flipped: trace 0, so alpha = 1 after normalization
            d = np.ones(args.n)
            d[: args.n // 2] = -1.0
            u = LinearMap.from_array(np.diag(d))
        else:
            u = haar_rotation(args.n, seed.substream(3))
        rep = satglobal.check_case1_lemma(args.n, args.k, u, args.c,
                                          args.trials, seed)
        print(f"success {rep.successes}/{rep.trials} vs bound "
              f"{rep.predicted_bound:.4f} (alpha {rep.details['alpha']:.4f})")
    elif suite == "case2":
        if args.T == "identity":
            t_map = LinearMap.from_array(np.eye(args.n))
        else:
            t_map = LinearMap.from_array(
                np.diag(seed.substream(4).rng().standard_normal(args.n)))
        rep = satglobal.check_case2_lemma(args.n, args.k, t_map, args.gamma,
                                          args.trials, seed)
        print(f"success {rep.successes}/{rep.trials} vs bound "
              f"{rep.predicted_bound:.4f} (limit {rep.details['limit']:.4f})")
    elif suite == "cpbound":
        est, bound = meanwidth.cp_mean_width_bound(args.N, args.k, args.p,
                                                   seed=seed)
        rep = meanwidth.LemmaCheckReport(
            lemma_id="cp_bound", trials=1, successes=int(est <= bound),
            predicted_bound=bound, empirical_mean=est)
        print(f"estimate {est:.6f} <= bound {bound:.6f}")
    else:
        print(f"error: unknown suite {suite!r}", file=sys.stderr)
        return 1
    if args.output:
        _write_json(Path(args.output) / f"lemma_{suite}.json", rep.to_dict())
    return 0


def _random_stochastic(n: int, rng) -> np.ndarray:
    lam = np.abs(rng.standard_normal((n, n))) + 1e-3
    np.fill_diagonal(lam, 0.0)
    return lam / lam.sum(axis=0, keepdims=True)


# ---------------------------------------------------------------------------
# report

def cmd_report(args) -> int:
    path = Path(args.log)
    try:
        records = [json.loads(line) for line in path.read_text().splitlines()]
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read log: {exc}", file=sys.stderr)
        return 1
    if not records:
        print("error: empty log", file=sys.stderr)
        return 1
    kind = records[0].get("kind", "local")
    winners = [r for r in records if r["outcome"].get("winner_j") is not None]
    print(f"records          : {len(records)}")
    print(f"winners          : {len(winners)}")
    if kind == "local":
        t1 = sum(r["outcome"]["theta1"] for r in records)
        tb = sum(r["outcome"]["thetabar1"] for r in records)
        print(f"theta1 frequency : {t1 / len(records):.4f}")
        print(f"thetabar1 freq   : {tb / len(records):.4f}")
    else:
        cases = [r["outcome"]["case"] for r in records]
        print(f"case-1 trials    : {sum(1 for c in cases if c == 1)}")
        print(f"case-2 trials    : {sum(1 for c in cases if c == 2)}")
    bounds = [r["certificate"]["isomorphism_bound"] for r in records
              if "certificate" in r]
    if bounds:
        print(f"max iso bound    : {max(bounds):.6f}")
    refused = sum(1 for r in records if "certificate_refused" in r)
    if refused:
        print(f"REFUSED certs    : {refused}")
    out_dir = Path(args.output) if args.output else path.parent
    _write_summary(out_dir / "report_summary.csv", kind, records)
    print(f"wrote {out_dir / 'report_summary.csv'}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="satkit",
                                 description="saturating-construction experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="parameter feasibility report")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m0", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--constants", nargs="*", metavar="KEY=VAL")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="execute an experiment file")
    p.add_argument("experiment")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lemma", help="run a lemma checker suite")
    p.add_argument("suite", choices=["meanwidth", "shrinking", "decouple",
                                     "case1", "case2", "cpbound"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--s", type=int, default=20)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--t", type=float, default=0.4)
    p.add_argument("--mode", choices=["projection", "gaussian"],
                   default="projection")
    p.add_argument("--segments", type=int, default=30)
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--n-max", dest="n_max", type=int, default=9)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--c", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--u", choices=["haar", "identity", "negidentity", "reflect"],
                   default="haar")
    p.add_argument("--T", choices=["identity", "diag-random"], default="identity")
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_lemma)

    p = sub.add_parser("report", help="aggregate a trial log")
    p.add_argument("log")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except SatkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

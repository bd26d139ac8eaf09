"""Command line entry point.

Exit status: 0 success, 1 check failure, 2 usage or configuration error,
3 I/O error.  ``SGS_SEED`` replaces the default seed (42) when ``--seed`` is
not given.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from ..core import ConfigError, FeatureSequence, SgsError
from ..flops import load_stack, report
from ..layer import SgsConfig, sgs_apply
from ..similarity import SimilarityParams
from . import gradcheck as gc
from .demo import CorpusSpec, run_demo, write_demo_outputs
from .tensorio import read_tensor
from .toy import DivergenceError, ToyModelConfig, train_toy, write_train_outputs

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
DEFAULT_SEED = 42


def default_seed() -> int:
    raw = os.environ.get("SGS_SEED")
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"SGS_SEED must be an integer, got {raw!r}") from None


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    cases = gc.load_cases(args.cases) if args.cases else gc.default_suite(seed)
    results, failures = gc.run_suite(cases, args.tol)
    for i, r in enumerate(results):
        c = r.case
        status = "PASS" if r.passed(args.tol) else "FAIL"
        print(f"{status} case {i:2d} T={c.T} C={c.C} H={c.H} W={c.W} L={c.L} B={c.B} "
              f"{c.mode}/{c.kind}/{c.measure} max_rel_err={r.max_error:.3e}")
    if args.out:
        _write_json(args.out, gc.suite_report(results, args.tol))
    if failures:
        print(f"{len(failures)} of {len(results)} cases above tolerance {args.tol:g}: "
              + ", ".join(str(results.index(f)) for f in failures), file=sys.stderr)
        return EXIT_CHECK
    print(f"all {len(results)} cases within {args.tol:g}")
    return EXIT_OK


def cmd_demo(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    corpus = CorpusSpec(args.regime, args.clips, args.t, args.c, args.h, args.w,
                        sigma=args.sigma, seed=seed, embed_dim=args.l)
    config = SgsConfig(args.bins, mode=args.mode, kind=args.kernel, measure=args.measure)
    hist = run_demo(corpus, config, workers=args.workers)
    write_demo_outputs(args.out, corpus, config, hist)
    print(f"{hist.total} clips, mean B' = {hist.mean_b_prime():.3f}; wrote {args.out}")
    return EXIT_OK


def cmd_train_toy(args) -> int:
    config = ToyModelConfig.from_json(args.config)
    try:
        result = train_toy(config)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    write_train_outputs(args.out, config, result)
    print(f"accuracy {result.accuracy:.3f}, final loss {result.loss_curve[-1] if result.loss_curve else float('nan'):.4f}")
    return EXIT_OK


def read_bprime_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"clip_id", "b_prime"} <= set(reader.fieldnames):
            raise ConfigError(f"{path}: needs 'clip_id' and 'b_prime' columns")
        try:
            return [(row["clip_id"], int(row["b_prime"])) for row in reader]
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def cmd_flops(args) -> int:
    stack = load_stack(args.stack)
    rows = read_bprime_csv(args.bprime_csv)
    rep = report(rows, stack, args.t_full)
    _write_json(args.out, rep.to_dict())
    print(f"average {rep.average_flops / 1e9:.6f} GFLOPs vs {rep.baseline_flops / 1e9:.6f} "
          f"at T={args.t_full}; reduction {rep.reduction_fraction:.4f}")
    return EXIT_OK


def cmd_bins(args) -> int:
    frames = read_tensor(args.input)
    if len(args.params) != 4:
        raise ConfigError("--params takes four tensor files: w1 b1 w2 b2")
    params = SimilarityParams(*(read_tensor(p) for p in args.params))
    config = SgsConfig(args.bins, mode=args.mode, kind=args.kernel)
    sampled, cache = sgs_apply(FeatureSequence(frames), params, config)
    geom = cache.geometry
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["record", "t", "bin", "value"])
        for t, d in enumerate(cache.coords[:, 0]):
            writer.writerow(["delta", t, "", repr(float(d))])
        writer.writerow(["gamma", "", "", repr(float(geom.gamma))])
        for b, c in enumerate(geom.centers):
            writer.writerow(["center", "", b, repr(float(c))])
        for t, b, w in cache.assignment.triples():
            writer.writerow(["weight", t, b, repr(float(w))])
        writer.writerow(["b_prime", "", "", sampled.B_prime])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atfr", description="Similarity guided sampling harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the analytic backward")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--cases", type=str, default=None, help="JSON list of cases")
    p.add_argument("--out", type=str, default=None, help="optional JSON report")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("demo", help="active-bin histogram over a synthetic corpus")
    p.add_argument("--regime", choices=["redundant", "diverse", "drifting", "mixed"], required=True)
    p.add_argument("--clips", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--c", type=int, required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("--kernel", choices=["linear", "kronecker"], default="linear")
    p.add_argument("--mode", choices=["strict", "centered"], default="strict")
    p.add_argument("--measure", choices=["magnitude", "angular", "spherical"], default="magnitude")
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--sigma", type=float, default=0.01, help="noise of redundant/drifting clips")
    p.add_argument("--l", type=int, default=8, help="similarity space dimension")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("train-toy", help="train the toy classifier through SGS")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("flops", help="average FLOPs of a layer stack over per-clip B'")
    p.add_argument("--stack", type=str, required=True)
    p.add_argument("--bprime-csv", type=str, required=True)
    p.add_argument("--t-full", type=int, required=True)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("bins", help="dump magnitudes, bin geometry and assignment")
    p.add_argument("--input", type=str, required=True)
    p.add_argument("--params", type=str, nargs="+", required=True, help="w1 b1 w2 b2")
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("--mode", choices=["strict", "centered"], default="strict")
    p.add_argument("--kernel", choices=["linear", "kronecker"], default="linear")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_bins)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SgsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``gbkmv <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections.abc import Sequence

import numpy as np

from .dataset import Dataset, generate_zipf, ingest, write_records
from .errors import GbkmvError
from .evaluation import METHODS, run_eval, write_csv, write_jsonl
from .gbkmv import build_gbkmv_index
from .hashing import HashSource
from .index_io import load_index, save_index
from .search import SizePartitionIndex, query
from .tuner import CostModelInputs, choose_buffer_size, predict_var_gkmv, sweep

log = logging.getLogger("gbkmv")


def _budget_units(ds: Dataset, ratio: float) -> float:
    return float(np.floor(ratio * ds.stats.N))


def _load_dataset(args: argparse.Namespace) -> Dataset:
    ds = ingest(args.input, min_size=args.min_size)
    log.info("loaded %d records, %d distinct elements, %d occurrences",
             ds.stats.m, ds.stats.n, ds.stats.N)
    return ds


def cmd_gen_zipf(args: argparse.Namespace) -> int:
    recs = generate_zipf(args.m, args.alpha1, args.alpha2, args.n,
                         (args.min_len, args.max_len), seed=args.seed)
    write_records(recs, args.out)
    print(f"wrote {len(recs)} records to {args.out}")
    return 0


def cmd_build(args: argparse.Namespace) -> int:
    ds = _load_dataset(args)
    h = (HashSource.from_fixture_file(args.fixture_hashes, ds.token_ids(), seed=args.seed)
         if args.fixture_hashes else HashSource(args.seed))
    r = "auto" if args.r == "auto" else int(args.r)
    idx = build_gbkmv_index(ds, _budget_units(ds, args.budget), r=r, h=h,
                            tau=args.tau, tuner_seed=args.seed)
    save_index(idx, args.out)
    print(json.dumps({"index": args.out, "m": idx.m, "n": idx.n, "r": idx.r, "tau": idx.tau,
                      "budget": idx.budget, "space_units": idx.space_units}))
    return 0


def _query_ids(line: str, token_ids: dict[str, int], n: int) -> np.ndarray:
    """Map query tokens to ids; unseen tokens get fresh ids past the dictionary."""
    extra: dict[str, int] = {}
    ids = []
    for tok in line.split():
        i = token_ids.get(tok)
        if i is None:
            i = extra.setdefault(tok, n + len(extra))
        ids.append(i)
    return np.unique(np.array(ids, dtype=np.int64))


def cmd_query(args: argparse.Namespace) -> int:
    idx = load_index(args.index)
    accel = SizePartitionIndex.build(idx)
    token_ids = {t: i for i, t in enumerate(idx.tokens)}
    out = sys.stdout
    out.write("query\trecord\testimate\n")
    with open(args.query_file, encoding="utf-8") as fh:
        for qn, line in enumerate(fh):
            if not line.split():
                continue
            Q = _query_ids(line, token_ids, idx.n)
            for rid, est in query(idx, accel, Q, args.threshold):
                out.write(f"{qn}\t{rid}\t{est:.6f}\n")
    return 0


def _emit_reports(reports, prefix: str | None) -> None:
    for rep in reports:
        print(json.dumps(rep.summary()))
    if prefix:
        write_jsonl(reports, f"{prefix}.jsonl")
        write_csv(reports, f"{prefix}.csv")


def cmd_eval(args: argparse.Namespace) -> int:
    ds = _load_dataset(args)
    reports = [run_eval(ds, m, args.budget, args.threshold, args.queries, args.seed)
               for m in args.method]
    _emit_reports(reports, args.out_prefix)
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    ds = _load_dataset(args)
    rep = run_eval(ds, "lshe", args.budget, args.threshold, args.queries, args.seed,
                   k_prime=args.k_prime, partitions=args.partitions)
    _emit_reports([rep], args.out_prefix)
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    ds = _load_dataset(args)
    inputs = CostModelInputs.from_stats(ds.stats, _budget_units(ds, args.budget),
                                        n_pairs=args.pairs, seed=args.seed, step=args.step)
    w = csv.writer(sys.stdout)
    w.writerow(["r", "var_gbkmv", "delta_vs_gkmv"])
    for p in sweep(inputs):
        w.writerow([p.r, f"{p.var_gbkmv:.6g}", f"{p.delta_vs_gkmv:.6g}"])
    print(json.dumps({"chosen_r": choose_buffer_size(inputs),
                      "var_gkmv": predict_var_gkmv(inputs),
                      "alpha1": ds.stats.alpha1, "alpha2": ds.stats.alpha2}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=float, default=0.1,
                        help="space budget as a fraction of total element occurrences")
    common.add_argument("--threshold", type=float, default=0.5)
    common.add_argument("--min-size", type=int, default=10)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gbkmv", description="Containment similarity search sketches")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-zipf", parents=[common], help="write a synthetic Zipf dataset")
    g.add_argument("--m", type=int, default=10_000)
    g.add_argument("--n", type=int, default=10_000)
    g.add_argument("--alpha1", type=float, default=1.1)
    g.add_argument("--alpha2", type=float, default=2.5)
    g.add_argument("--min-len", type=int, default=20)
    g.add_argument("--max-len", type=int, default=2000)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_zipf)

    b = sub.add_parser("build", parents=[common], help="build and save a GB-KMV index")
    b.add_argument("input")
    b.add_argument("--out", required=True)
    b.add_argument("--r", default="auto", help="buffer width in bits, or 'auto'")
    b.add_argument("--tau", type=float, default=None, help="pin the global threshold")
    b.add_argument("--fixture-hashes", default=None, help="two-column 'token hash' file")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", parents=[common], help="search a saved index")
    q.add_argument("index")
    q.add_argument("--query-file", required=True)
    q.set_defaults(func=cmd_query)

    e = sub.add_parser("eval", parents=[common], help="score methods against exact search")
    e.add_argument("input")
    e.add_argument("--method", nargs="+", choices=METHODS, default=["gbkmv"])
    e.add_argument("--queries", type=int, default=200)
    e.add_argument("--out-prefix", default=None)
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("tune", parents=[common], help="print the buffer-size cost sweep")
    t.add_argument("input")
    t.add_argument("--pairs", type=int, default=10_000)
    t.add_argument("--step", type=int, default=8)
    t.set_defaults(func=cmd_tune)

    bl = sub.add_parser("baseline", parents=[common], help="evaluate the LSH-Ensemble baseline")
    bl.add_argument("input")
    bl.add_argument("--k-prime", type=int, default=256)
    bl.add_argument("--partitions", type=int, default=32)
    bl.add_argument("--queries", type=int, default=200)
    bl.add_argument("--out-prefix", default=None)
    bl.set_defaults(func=cmd_baseline)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GbkmvError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: build, query, verify, bench, stats."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from fractions import Fraction

import numpy as np

from . import keyio, serde
from . import stats as st
from .construct import build
from .errors import PilotHashError
from .index import MPHF, KeyKind
from .params import PRESET_NAMES, BucketFn, ReduceKind, RemapKind, preset
from .query import QueryMode
from .sharding import ShardPlan, build_sharded, source_from

log = logging.getLogger("pilothash")


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _add_key_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--keys", help="key file (one key per line)")
    g.add_argument("--generate", metavar="KIND:N", help="random corpus, e.g. u64:1000000 or str:1000000")
    p.add_argument("--key-kind", choices=("str", "u64"), default="str", help="how to read --keys")
    p.add_argument("--binary", action="store_true", help="--keys holds raw little-endian u64 words")
    p.add_argument("--gen-seed", type=int, default=0, help="RNG seed for --generate")


def _add_build_args(p, threads=True):
    p.add_argument("--preset", choices=PRESET_NAMES, default="default")
    p.add_argument("--alpha", type=Fraction)
    p.add_argument("--lambda", dest="lam", type=Fraction)
    p.add_argument("--gamma", choices=[k.name.lower() for k in BucketFn])
    p.add_argument("--remap", choices=[k.name.lower() for k in RemapKind])
    p.add_argument("--reduce", choices=[k.name.lower() for k in ReduceKind])
    p.add_argument("--seed", type=lambda s: int(s, 0), default=0)
    p.add_argument("--max-retries", type=int, default=10)
    if threads:
        p.add_argument("--threads", type=int, default=1)
    p.add_argument("--shard-strategy", default=None, help="memory | disk | hybrid:D")
    p.add_argument("--shard-size", type=int, default=None, help="target keys per shard")
    p.add_argument("--shard-dir", default=None)


def _load_keys(args):
    if args.generate:
        return keyio.generate(args.generate, args.gen_seed)
    return keyio.read_keys(args.keys, args.key_kind, args.binary)


def _params(args):
    over = {"seed": args.seed, "max_seed_retries": args.max_retries}
    if args.alpha is not None:
        over["alpha"] = args.alpha
    if args.lam is not None:
        over["lam"] = args.lam
    if args.gamma:
        over["gamma"] = BucketFn[args.gamma.upper()]
    if args.remap:
        over["remap"] = RemapKind[args.remap.upper()]
    if args.reduce:
        over["reduce"] = ReduceKind[args.reduce.upper()]
    return preset(args.preset, **over)


def _build(args) -> MPHF:
    params = _params(args)
    sharded = args.shard_strategy is not None or args.shard_size is not None
    if not sharded:
        return build(_load_keys(args), params, threads=args.threads)
    name, d = ShardPlan.parse_strategy(args.shard_strategy or "memory")
    if args.generate:
        source = keyio.generated_source(args.generate, args.gen_seed)
    else:
        source = source_from(_load_keys(args))
    size = args.shard_size or (1 << 32)
    plan = ShardPlan.for_keys(source.n, size, name, hybrid_shards=d, directory=args.shard_dir)
    return build_sharded(source, params, plan, threads=args.threads)


def cmd_build(args) -> int:
    t0 = time.perf_counter()
    idx = _build(args)
    elapsed = time.perf_counter() - t0
    nbytes = serde.save(idx, args.output)
    rec = st.build_record(idx)
    rec.append(("run", {"wall_seconds": round(elapsed, 3), "index_file": args.output}))
    stats_path = args.stats or args.output + ".stats"
    st.write(stats_path, rec)
    bpk = idx.bits_per_key()
    print(f"built n={idx.n} bits/key={bpk['total']:.4f} bytes={nbytes} -> {args.output} (stats: {stats_path})")
    return 0


def verify_index(idx: MPHF, keys) -> tuple[bool, str]:
    n = len(keys)
    if n != idx.n:
        return False, f"index has n={idx.n} but {n} keys were given"
    out = idx.query(keys, QueryMode("stream", idx.params.lookahead))
    if out.size and int(out.max()) >= n:
        return False, f"value {int(out.max())} out of range [0, {n})"
    counts = np.bincount(out.astype(np.int64), minlength=n)
    if not np.all(counts == 1):
        return False, f"{int(np.sum(counts == 0))} indices unused, {int(np.sum(counts > 1))} hit twice"
    return True, f"ok: {n} keys map bijectively onto [0, {n})"


def cmd_verify(args) -> int:
    idx = serde.load(args.index)
    ok, msg = verify_index(idx, _load_keys(args))
    print(msg)
    return 0 if ok else 1


def cmd_query(args) -> int:
    idx = serde.load(args.index)
    mode = QueryMode.parse(args.mode)
    lines = [l.rstrip(b"\r\n") for l in sys.stdin.buffer]
    if idx.key_kind == KeyKind.U64:
        keys = np.array([int(l) for l in lines if l.strip()], dtype=np.uint64)
    else:
        keys = lines
    out = idx.query(keys, mode, minimal=args.minimal)
    sys.stdout.write("".join(f"{v}\n" for v in out.tolist()))
    return 0


def bench_queries(idx: MPHF, keys, modes, threads_list, minimal: bool, repeat: int = 1) -> list[dict]:
    rows = []
    n = len(keys)
    for threads in threads_list:
        for mode in modes:
            idx.query(keys[: min(n, 1000)], mode, minimal=minimal)
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter()
                idx.query(keys, mode, minimal=minimal, threads=threads)
                best = min(best, time.perf_counter() - t0)
            rows.append({"mode": str(mode), "threads": threads, "minimal": int(minimal), "n": n,
                         "ns_per_key": round(1e9 * best / max(n, 1), 3)})
    return rows


def cmd_bench(args) -> int:
    keys = _load_keys(args)
    if args.index:
        idx = serde.load(args.index)
    else:
        idx = build(keys, _params(args), threads=args.threads[0] if args.threads else 1)
    modes = [QueryMode.parse(m) for m in (args.mode or ["loop", "stream:32"])]
    rows = bench_queries(idx, keys, modes, args.threads or [1], args.minimal, args.repeat)
    rec = st.build_record(idx) + [("query", r) for r in rows]
    if args.stats:
        st.write(args.stats, rec)
    for r in rows:
        print(f"mode={r['mode']} threads={r['threads']} minimal={bool(r['minimal'])} {r['ns_per_key']:.2f} ns/key")
    return 0


def cmd_stats(args) -> int:
    for group, kv in st.read(args.file):
        print(group)
        for k, v in kv.items():
            print(f"  {k:<28} {v}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pilothash", description="Minimal perfect hashing with 8-bit pilot tables.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build an index file")
    _add_key_args(p)
    _add_build_args(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--stats", help="stats file (default: OUTPUT.stats)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="check that an index maps the keys bijectively onto [0, n)")
    p.add_argument("index")
    _add_key_args(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("query", help="read keys on stdin, write one index per line")
    p.add_argument("index")
    p.add_argument("--mode", default="stream:32")
    p.add_argument("--minimal", type=_bool, default=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="time query modes")
    p.add_argument("index", nargs="?")
    _add_key_args(p)
    _add_build_args(p, threads=False)
    p.add_argument("--mode", action="append", help="loop | batch:N | stream:N (repeatable)")
    p.add_argument("--threads", type=int, action="append", help="thread count (repeatable)")
    p.add_argument("--minimal", type=_bool, default=True)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--stats", help="write a stats file with the query timings")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="print a stats file")
    p.add_argument("file")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (PilotHashError, OSError, ValueError) as e:
        print(f"pilothash: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

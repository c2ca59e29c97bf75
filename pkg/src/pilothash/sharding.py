"""Sharded construction for key sets whose hashes do not fit in memory.

Shard ``i`` of ``s`` holds the hashes in ``[2^64*i/s, 2^64*(i+1)/s)``. The part
count is a multiple of ``s`` so every part lies inside one shard, and the
result does not depend on the strategy used to materialise the shards.
"""

from __future__ import annotations

import logging
import math
import os
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bucket_fn import parts_of
from .construct import (
    BuildStats,
    PartBuilder,
    attempt_seeds,
    check_duplicates,
    hash_alg_for,
    sort_hashes,
)
from .errors import BuildFailed, DuplicateHashes, DuplicateKeys, PartFailed, PartOversubscribed
from .hashing import HashAlg
from .index import MPHF, KeyKind, key_hashes, normalize_keys
from .params import BuildParams, compute_shape

log = logging.getLogger(__name__)

DEFAULT_SHARD_KEYS = 1 << 32


class KeySource:
    """Re-iterable stream of key batches, all of one kind."""

    def __init__(self, batches_fn, n: int, kind: KeyKind):
        self._batches_fn = batches_fn
        self.n = n
        self.kind = kind
        self.passes = 0

    def __iter__(self):
        self.passes += 1
        return iter(self._batches_fn())

    @classmethod
    def from_keys(cls, keys, batch: int = 1 << 20) -> "KeySource":
        kind, keys = normalize_keys(keys)
        n = len(keys)
        return cls(lambda: (keys[i : i + batch] for i in range(0, n, batch)), n, kind)


def source_from(keys) -> KeySource:
    return keys if isinstance(keys, KeySource) else KeySource.from_keys(keys)


@dataclass(frozen=True)
class ShardPlan:
    shards: int = 1
    strategy: str = "memory"
    hybrid_shards: int = 1
    directory: str | None = None

    def __post_init__(self):
        if self.shards < 1:
            raise ValueError("need at least one shard")
        if self.strategy not in ("memory", "disk", "hybrid"):
            raise ValueError(f"unknown shard strategy {self.strategy!r}")
        if self.strategy == "hybrid" and not 1 <= self.hybrid_shards < max(self.shards, 2):
            raise ValueError("hybrid needs 1 <= D < shard count")

    @classmethod
    def for_keys(cls, n: int, target_shard_keys: int = DEFAULT_SHARD_KEYS, strategy: str = "memory", **kw) -> "ShardPlan":
        return cls(shards=max(1, math.ceil(n / target_shard_keys)), strategy=strategy, **kw)

    @classmethod
    def parse_strategy(cls, text: str) -> tuple[str, int]:
        """``memory``, ``disk`` or ``hybrid:D``."""
        name, _, arg = text.partition(":")
        if name == "hybrid":
            return name, int(arg or 1)
        if name in ("memory", "disk") and not arg:
            return name, 1
        raise ValueError(f"bad shard strategy {text!r}")

    def interval(self, i: int) -> tuple[int, int]:
        s = self.shards
        return -(-(i << 64) // s), -(-((i + 1) << 64) // s)

    def groups(self) -> list[range]:
        """Shards whose hashes are materialised together in one pass over the keys."""
        s = self.shards
        if self.strategy == "memory":
            return [range(i, i + 1) for i in range(s)]
        if self.strategy == "disk":
            return [range(0, s)]
        d = self.hybrid_shards
        return [range(g, min(s, g + d)) for g in range(0, s, d)]


def shard_of(h_hi, shards: int):
    """Shard of each hash (scalar int or uint64 array)."""
    if isinstance(h_hi, np.ndarray):
        return parts_of(np.ascontiguousarray(h_hi, dtype=np.uint64), np.uint64(shards))
    return (int(h_hi) * shards) >> 64


def _record_width(alg: HashAlg) -> int:
    return 16 if alg == HashAlg.XXH3_128 else 8


def write_shard_files(source: KeySource, alg: HashAlg, seed: int, plan: ShardPlan, group: range, directory: Path) -> dict:
    """Hash every key once, appending raw LE hash records to one file per shard in ``group``."""
    paths = {i: directory / f"shard-{i:05d}.bin" for i in group}
    files = {i: open(p, "wb") for i, p in paths.items()}
    try:
        for batch in source:
            hi, lo = key_hashes(source.kind, alg, batch, seed)
            sid = shard_of(hi, plan.shards)
            for i in group:
                sel = sid == i
                if not sel.any():
                    continue
                if alg == HashAlg.XXH3_128:
                    rec = np.empty((int(sel.sum()), 2), dtype="<u8")
                    rec[:, 0] = hi[sel]
                    rec[:, 1] = lo[sel]
                else:
                    rec = hi[sel].astype("<u8")
                rec.tofile(files[i])
    finally:
        for f in files.values():
            f.close()
    return paths


def read_shard_file(path: Path, alg: HashAlg) -> tuple[np.ndarray, np.ndarray]:
    raw = np.fromfile(path, dtype="<u8")
    if alg == HashAlg.XXH3_128:
        raw = raw.reshape(-1, 2)
        return raw[:, 0].astype(np.uint64), raw[:, 1].astype(np.uint64)
    h = raw.astype(np.uint64)
    return h, h


def _collect_in_memory(source: KeySource, alg: HashAlg, seed: int, plan: ShardPlan, i: int):
    his, los = [], []
    for batch in source:
        hi, lo = key_hashes(source.kind, alg, batch, seed)
        sel = shard_of(hi, plan.shards) == i
        his.append(hi[sel])
        if lo is not hi:
            los.append(lo[sel])
    hi = np.concatenate(his) if his else np.zeros(0, np.uint64)
    lo = np.concatenate(los) if los else hi
    return hi, lo


def _iter_shards(source, alg, seed, plan, workdir, stats, disk):
    """Yield ``(shard, hi, lo)`` in ascending shard order using the plan's strategy."""
    for group in plan.groups():
        if plan.strategy == "memory":
            t0 = time.perf_counter()
            hi, lo = _collect_in_memory(source, alg, seed, plan, group[0])
            stats.add_time("hashing", t0)
            yield group[0], hi, lo
            continue
        t0 = time.perf_counter()
        paths = write_shard_files(source, alg, seed, plan, group, workdir)
        disk["peak"] = max(disk["peak"], sum(p.stat().st_size for p in paths.values()))
        stats.add_time("hashing", t0)
        try:
            for i in group:
                hi, lo = read_shard_file(paths[i], alg)
                paths[i].unlink()
                yield i, hi, lo
        finally:
            for p in paths.values():
                if p.exists():
                    p.unlink()


def build_sharded(keys, params: BuildParams | None = None, plan: ShardPlan | None = None, *, threads: int = 1) -> MPHF:
    """Build shard by shard; ``keys`` is a KeySource or anything ``build`` accepts."""
    params = params or BuildParams()
    source = source_from(keys)
    n = source.n
    if n < 1:
        raise ValueError("need at least one key")
    plan = plan or ShardPlan.for_keys(n)
    shape = compute_shape(n, params, shards=plan.shards)
    per_shard = shape.parts // plan.shards
    stats = BuildStats()
    disk = {"peak": 0}
    wide = False
    dup_streak = 0
    last_err = None
    workdir = None
    if plan.strategy != "memory":
        base = plan.directory
        if base is not None:
            os.makedirs(base, exist_ok=True)
        workdir = Path(tempfile.mkdtemp(prefix="pilothash-shards-", dir=base))
    try:
        for t, seed in attempt_seeds(params):
            stats.attempts = t + 1
            alg = hash_alg_for(source.kind, n, wide)
            builder = PartBuilder(shape, params, seed, threads)
            try:
                for i, hi, lo in _iter_shards(source, alg, seed, plan, workdir, stats, disk):
                    t0 = time.perf_counter()
                    hi, lo = sort_hashes(hi, lo, alg == HashAlg.XXH3_128)
                    check_duplicates(hi, lo, shape.parts)
                    t0 = stats.add_time("sorting", t0)
                    builder.run(hi, lo, i * per_shard, (i + 1) * per_shard)
                    stats.add_time("pilot_search", t0)
            except DuplicateHashes as e:
                if source.kind == KeyKind.U64 or alg == HashAlg.XXH3_128:
                    raise DuplicateKeys("duplicate keys") from None
                dup_streak += 1
                wide = dup_streak >= 2
                last_err = e
                stats.failures.append(str(e))
                continue
            except (PartFailed, PartOversubscribed) as e:
                log.info("attempt %d (seed %#x) failed: %s", t, seed, e)
                last_err = e
                stats.failures.append(str(e))
                continue
            mphf = builder.finish(source.kind, alg, stats)
            mphf.stats = stats.as_dict(n)
            mphf.stats["shards"] = plan.shards
            mphf.stats["shard_strategy"] = plan.strategy
            mphf.stats["key_passes"] = source.passes
            mphf.stats["peak_disk_bytes"] = disk["peak"]
            return mphf
        raise BuildFailed(params.max_seed_retries + 1, last_err)
    finally:
        if workdir is not None:
            shutil.rmtree(workdir, ignore_errors=True)

"""Construction: partition hashes, search pilots part by part, assemble the remap."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .bucket_fn import buckets_of
from .errors import BuildFailed, DuplicateHashes, DuplicateKeys, PartFailed, PartOversubscribed
from .hashing import WIDE_HASH_THRESHOLD, HashAlg, make_reducer, next_seed
from .index import MPHF, KeyKind, key_hashes, normalize_keys
from .params import BuildParams, Shape, compute_shape
from .remap import RemapTable, build_filled_remap_values

log = logging.getLogger(__name__)

EVICTION_FACTOR = 10
_FAIL_REASON = {K.EVICTION_BUDGET: "eviction budget exhausted", K.NO_VALID_PILOT: "no valid pilot"}


@dataclass
class BuildStats:
    phase_seconds: dict = field(default_factory=lambda: dict(hashing=0.0, sorting=0.0, pilot_search=0.0, remap=0.0))
    attempts: int = 0
    evictions: int = 0
    evict_hist: np.ndarray = field(default_factory=lambda: np.zeros(K.PERCENTILES, dtype=np.int64))
    size_hist: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    remap_fallback: bool = False
    failures: list = field(default_factory=list)

    def add_time(self, phase: str, t0: float) -> float:
        t = time.perf_counter()
        self.phase_seconds[phase] += t - t0
        return t

    def as_dict(self, n: int) -> dict:
        return {
            "ns_per_key": {k: 1e9 * v / n for k, v in self.phase_seconds.items()},
            "attempts": self.attempts,
            "evictions": self.evictions,
            "evict_hist": self.evict_hist.tolist(),
            "size_hist": self.size_hist.tolist(),
            "remap_fallback": self.remap_fallback,
            "failures": list(self.failures),
        }


def hash_alg_for(kind: KeyKind, n: int, wide: bool = False) -> HashAlg:
    if kind == KeyKind.U64:
        return HashAlg.FX_INT
    return HashAlg.XXH3_128 if wide or n >= WIDE_HASH_THRESHOLD else HashAlg.XXH3_64


def sort_hashes(hi: np.ndarray, lo: np.ndarray, wide: bool):
    """Sort by (hi, lo); since part and bucket are monotone in ``hi`` this groups both."""
    if not wide:
        hi = np.sort(hi)
        return hi, hi
    order = np.lexsort((lo, hi))
    return hi[order], lo[order]


def check_duplicates(hi: np.ndarray, lo: np.ndarray, parts: int):
    same = hi[1:] == hi[:-1]
    if lo is not hi:
        same &= lo[1:] == lo[:-1]
    if same.any():
        i = int(np.argmax(same))
        raise DuplicateHashes(int((int(hi[i]) * parts) >> 64))


def interval_starts(sorted_hi: np.ndarray, count: int, first: int = 0, last: int | None = None) -> np.ndarray:
    """Offsets where each of ``count`` equal hash intervals begins (``first..last`` inclusive bounds)."""
    last = count if last is None else last
    thresholds = [-(-(p << 64) // count) for p in range(first, last + 1)]
    th = np.array([min(t, (1 << 64) - 1) for t in thresholds], dtype=np.uint64)
    idx = np.searchsorted(sorted_hi, th, side="left").astype(np.int64)
    if last == count:
        idx[-1] = sorted_hi.shape[0]
    return idx


class PartBuilder:
    """Runs the per-part pilot search into shared pilot/taken arrays."""

    def __init__(self, shape: Shape, params: BuildParams, seed: int, threads: int = 1):
        self.shape = shape
        self.params = params
        self.seed = seed
        self.threads = max(1, threads)
        self.reducer = make_reducer(params.reduce, shape.slots)
        self.pilots = np.zeros(shape.total_buckets, dtype=np.uint8)
        self.words = (shape.slots + 63) // 64
        self.taken = np.zeros((shape.parts, self.words), dtype=np.uint64)
        self.abort = np.zeros(1, dtype=np.int64)
        self.evictions = 0
        self.evict_hist = np.zeros(K.PERCENTILES, dtype=np.int64)
        self.size_hist = np.zeros(0, dtype=np.int64)

    def _one(self, p: int, hi: np.ndarray, lo: np.ndarray):
        sh, r = self.shape, self.reducer
        bids = buckets_of(hi, np.uint64(sh.parts), np.uint64(sh.buckets), int(self.params.gamma))
        bstart = K.bucket_starts(bids, sh.buckets)
        maxsize = int(np.max(np.diff(bstart))) if sh.buckets else 0
        eh = np.zeros(K.PERCENTILES, dtype=np.int64)
        szh = np.zeros(maxsize + 2, dtype=np.int64)
        status, ev = K.build_part(
            np.ascontiguousarray(lo),
            bstart,
            r.kind,
            np.uint64(r.slots),
            np.uint64(r.mask),
            np.uint64(r.magic_hi),
            np.uint64(r.magic_lo),
            np.uint64(self.seed),
            self.pilots[p * sh.buckets : (p + 1) * sh.buckets],
            self.taken[p],
            EVICTION_FACTOR * sh.slots,
            self.abort,
            eh,
            szh,
        )
        if status != K.OK:
            self.abort[0] = 1
        return p, status, ev, eh, szh

    def run(self, hi: np.ndarray, lo: np.ndarray, first_part: int, last_part: int):
        """Build parts ``first_part..last_part-1`` from hashes sorted by ``hi``."""
        sh = self.shape
        starts = interval_starts(hi, sh.parts, first_part, last_part)
        sizes = np.diff(starts)
        over = np.nonzero(sizes > sh.slots)[0]
        if over.size:
            p = int(over[0])
            raise PartOversubscribed(first_part + p, int(sizes[p]), sh.slots)
        jobs = [
            (first_part + i, hi[starts[i] : starts[i + 1]], lo[starts[i] : starts[i + 1]])
            for i in range(last_part - first_part)
        ]
        if self.threads == 1:
            results = [self._one(*j) for j in jobs]
        else:
            with ThreadPoolExecutor(self.threads) as pool:
                results = list(pool.map(lambda j: self._one(*j), jobs))
        failed = None
        for p, status, ev, eh, szh in results:
            self.evictions += ev
            self.evict_hist += eh
            if szh.size > self.size_hist.size:
                self.size_hist = np.concatenate([self.size_hist, np.zeros(szh.size - self.size_hist.size, np.int64)])
            self.size_hist[: szh.size] += szh
            if status in _FAIL_REASON and failed is None:
                failed = PartFailed(p, _FAIL_REASON[status])
        if failed is not None:
            raise failed

    def finish(self, key_kind: KeyKind, hash_alg: HashAlg, stats: BuildStats) -> MPHF:
        sh = self.shape
        t0 = time.perf_counter()
        free, over = K.collect_remap_slots(self.taken, sh.parts, sh.slots, sh.n)
        values = build_filled_remap_values(free, over, sh.n, sh.total_slots)
        remap = RemapTable.build(values, self.params.remap)
        stats.add_time("remap", t0)
        stats.evictions = self.evictions
        stats.evict_hist = self.evict_hist
        stats.size_hist = self.size_hist
        stats.remap_fallback = remap.fallback
        if remap.fallback:
            log.warning("CacheLineEF preconditions violated; remap table stored as plain array")
        return MPHF(sh, self.params, self.seed, self.pilots, remap, key_kind, hash_alg)


def attempt_seeds(params: BuildParams):
    seed = params.seed
    for t in range(params.max_seed_retries + 1):
        yield t, seed
        seed = next_seed(seed, t)


def build(keys, params: BuildParams | None = None, *, threads: int = 1, shape: Shape | None = None, slots_per_part: int | None = None) -> MPHF:
    """Build a minimal perfect hash function over ``keys``.

    ``keys`` is a uint64 array / sequence of ints, or a sequence of str/bytes.
    ``shape`` or ``slots_per_part`` override the computed layout.
    """
    params = params or BuildParams()
    kind, keys = normalize_keys(keys)
    n = len(keys)
    if n < 1:
        raise ValueError("need at least one key")
    if shape is None:
        shape = compute_shape(n, params, slots_per_part=slots_per_part)
    elif shape.n != n:
        raise ValueError(f"shape is for {shape.n} keys, got {n}")
    stats = BuildStats()
    wide = False
    dup_streak = 0
    last_err = None
    for t, seed in attempt_seeds(params):
        stats.attempts = t + 1
        alg = hash_alg_for(kind, n, wide)
        t0 = time.perf_counter()
        hi, lo = key_hashes(kind, alg, keys, seed)
        t0 = stats.add_time("hashing", t0)
        hi, lo = sort_hashes(hi, lo, alg == HashAlg.XXH3_128)
        try:
            check_duplicates(hi, lo, shape.parts)
        except DuplicateHashes as e:
            stats.add_time("sorting", t0)
            if kind == KeyKind.U64:
                raise DuplicateKeys("duplicate integer keys") from None
            if _has_equal_keys(keys):
                raise DuplicateKeys("duplicate byte-string keys") from None
            dup_streak += 1
            wide = wide or dup_streak >= 2
            last_err = e
            stats.failures.append(str(e))
            continue
        t0 = stats.add_time("sorting", t0)
        builder = PartBuilder(shape, params, seed, threads)
        try:
            builder.run(hi, lo, 0, shape.parts)
        except (PartFailed, PartOversubscribed) as e:
            stats.add_time("pilot_search", t0)
            log.info("attempt %d (seed %#x) failed: %s", t, seed, e)
            last_err = e
            stats.failures.append(str(e))
            stats.evictions += builder.evictions
            continue
        stats.add_time("pilot_search", t0)
        del hi, lo
        mphf = builder.finish(kind, alg, stats)
        mphf.stats = stats.as_dict(n)
        return mphf
    raise BuildFailed(params.max_seed_retries + 1, last_err)


def _has_equal_keys(keys) -> bool:
    return len(set(keys)) != len(keys)

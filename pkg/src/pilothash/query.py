"""Query kernels: plain loop, batched with prefetch, streaming with lookahead.

Every mode computes exactly the same function; they differ only in how memory
accesses to the pilot array are overlapped. Keys that were not in the build set
map to arbitrary (but in-range) values: there is no membership check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ._bits import prefetch
from .bucket_fn import part_bucket_word
from .hashing import C_U, pilot_word, reduce_word
from .remap import remap_word

# cfg layout (uint64 words)
SEED, PARTS, BUCKETS, SLOTS, GAMMA, RKIND, RSLOTS, RMASK, RMHI, RMLO, N, MINIMAL, HASHED, REMAP, EF_L = range(15)
CFG_LEN = 15


@dataclass(frozen=True)
class QueryMode:
    kind: str = "loop"
    size: int = 1

    def __post_init__(self):
        if self.kind not in ("loop", "batch", "stream"):
            raise ValueError(f"unknown query mode {self.kind!r}")
        if self.size < 1:
            raise ValueError("batch size / lookahead must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "QueryMode":
        """``loop``, ``batch:N`` or ``stream:N``."""
        name, _, arg = text.partition(":")
        if name == "loop":
            return cls("loop", 1)
        if name in ("batch", "stream"):
            if not arg:
                arg = "32"
            return cls(name, int(arg))
        raise ValueError(f"bad query mode {text!r}; expected loop, batch:N or stream:N")

    def __str__(self):
        return "loop" if self.kind == "loop" else f"{self.kind}:{self.size}"


LOOP = QueryMode("loop")


@njit(inline="always")
def _locate(cfg, k_hi):
    if cfg[HASHED] == 0:
        h = C_U * (k_hi ^ cfg[SEED])
    else:
        h = k_hi
    part, bucket = part_bucket_word(h, cfg[PARTS], cfg[BUCKETS], np.int64(cfg[GAMMA]))
    return h, part, np.int64(part * cfg[BUCKETS] + bucket)


@njit(inline="always")
def _slot(cfg, pilot, lo, part):
    x = lo ^ pilot_word(pilot, cfg[SEED])
    return part * cfg[SLOTS] + reduce_word(
        x, np.int64(cfg[RKIND]), cfg[RSLOTS], cfg[RMASK], cfg[RMHI], cfg[RMLO]
    )


# Array arguments to helpers cost a refcount round trip per call, so the remap
# lookup is only reached on the rare slot >= n branch.
@njit(nogil=True, cache=True)
def _remapped(cfg, slot, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples):
    return remap_word(
        np.int64(cfg[REMAP]), plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples, np.int64(cfg[EF_L]),
        np.int64(slot - cfg[N]),
    )


@njit(nogil=True, cache=True)
def query_loop(cfg, hi, lo, pilots, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples, out):
    n = cfg[N]
    minimal = cfg[MINIMAL] != 0
    for i in range(hi.shape[0]):
        h, part, idx = _locate(cfg, hi[i])
        l = lo[i] if cfg[HASHED] != 0 else h
        slot = _slot(cfg, pilots[idx], l, part)
        if minimal and slot >= n:
            slot = _remapped(cfg, slot, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples)
        out[i] = slot


@njit(nogil=True, cache=True)
def query_batched(cfg, hi, lo, pilots, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples, out, batch):
    n = hi.shape[0]
    nk = cfg[N]
    minimal = cfg[MINIMAL] != 0
    sh = np.empty(batch, dtype=np.uint64)
    sp = np.empty(batch, dtype=np.uint64)
    si = np.empty(batch, dtype=np.int64)
    for start in range(0, n, batch):
        end = min(n, start + batch)
        for i in range(start, end):
            h, part, idx = _locate(cfg, hi[i])
            prefetch(pilots, idx)
            sh[i - start] = lo[i] if cfg[HASHED] != 0 else h
            sp[i - start] = part
            si[i - start] = idx
        for i in range(start, end):
            j = i - start
            slot = _slot(cfg, pilots[si[j]], sh[j], sp[j])
            if minimal and slot >= nk:
                slot = _remapped(cfg, slot, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples)
            out[i] = slot


@njit(nogil=True, cache=True)
def query_stream(cfg, hi, lo, pilots, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples, out, ahead):
    n = hi.shape[0]
    nk = cfg[N]
    minimal = cfg[MINIMAL] != 0
    rh = np.empty(ahead, dtype=np.uint64)
    rp = np.empty(ahead, dtype=np.uint64)
    ri = np.empty(ahead, dtype=np.int64)
    for i in range(min(ahead, n)):
        h, part, idx = _locate(cfg, hi[i])
        prefetch(pilots, idx)
        rh[i] = lo[i] if cfg[HASHED] != 0 else h
        rp[i] = part
        ri[i] = idx
    r = 0
    for i in range(n):
        slot = _slot(cfg, pilots[ri[r]], rh[r], rp[r])
        if minimal and slot >= nk:
            slot = _remapped(cfg, slot, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples)
        out[i] = slot
        nxt = i + ahead
        if nxt < n:
            h, part, idx = _locate(cfg, hi[nxt])
            prefetch(pilots, idx)
            rh[r] = lo[nxt] if cfg[HASHED] != 0 else h
            rp[r] = part
            ri[r] = idx
        r += 1
        if r == ahead:
            r = 0


def run(cfg, hi, lo, pilots, remap_args, mode: QueryMode, out=None) -> np.ndarray:
    if out is None:
        out = np.empty(hi.shape[0], dtype=np.uint64)
    if hi.shape[0] == 0:
        return out
    if mode.kind == "loop":
        query_loop(cfg, hi, lo, pilots, *remap_args, out)
    elif mode.kind == "batch":
        query_batched(cfg, hi, lo, pilots, *remap_args, out, mode.size)
    else:
        query_stream(cfg, hi, lo, pilots, *remap_args, out, mode.size)
    return out

"""Key fingerprints, pilot hashes and slot reduction.

Integer keys use a single multiplication by an odd constant, so the hash is a
bijection on 64-bit words. Byte-string keys use XXH3 (64- or 128-bit).
"""

from __future__ import annotations

import enum
from typing import NamedTuple

import numpy as np
import xxhash
from numba import njit

from ._bits import MASK32, U0, U1, mulhi
from .params import ReduceKind

MASK64 = (1 << 64) - 1
C = 0x517CC1B727220A95
C_INV = pow(C, -1, 1 << 64)
GOLDEN = 0x9E3779B97F4A7C15

C_U = np.uint64(C)

# auto-switch to 128-bit fingerprints past this many byte-string keys
WIDE_HASH_THRESHOLD = 1 << 32


class HashAlg(enum.IntEnum):
    FX_INT = 1
    XXH3_64 = 2
    XXH3_128 = 3


class Hash(NamedTuple):
    hi: int
    lo: int


def hash_int(key: int, seed: int = 0) -> Hash:
    h = (C * ((key ^ seed) & MASK64)) & MASK64
    return Hash(h, h)


def hash_ints(keys: np.ndarray, seed: int = 0) -> np.ndarray:
    """Vectorised ``hash_int``; returns one uint64 word per key."""
    keys = np.asarray(keys, dtype=np.uint64)
    return (keys ^ np.uint64(seed)) * C_U


def unhash_int(h: int, seed: int = 0) -> int:
    return ((h * C_INV) & MASK64) ^ seed


def hash_bytes(key: bytes, seed: int = 0, width: int = 64) -> Hash:
    if width == 64:
        h = xxhash.xxh3_64_intdigest(key, seed)
        return Hash(h, h)
    if width == 128:
        h = xxhash.xxh3_128_intdigest(key, seed)
        return Hash(h >> 64, h & MASK64)
    raise ValueError(f"width must be 64 or 128, got {width}")


def hash_bytes_many(keys, seed: int = 0, width: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Hash a sequence of byte strings into (hi, lo) uint64 arrays.

    For 64-bit fingerprints ``hi`` and ``lo`` are the same array.
    """
    n = len(keys)
    if width == 64:
        f = xxhash.xxh3_64_intdigest
        hi = np.fromiter((f(k, seed) for k in keys), dtype=np.uint64, count=n)
        return hi, hi
    if width == 128:
        f = xxhash.xxh3_128_intdigest
        # xxh3_128 digest is big-endian: first 8 bytes are the high word
        buf = b"".join(xxhash.xxh3_128_digest(k, seed) for k in keys)
        words = np.frombuffer(buf, dtype=">u8").reshape(n, 2)
        return words[:, 0].astype(np.uint64), words[:, 1].astype(np.uint64)
    raise ValueError(f"width must be 64 or 128, got {width}")


def hash_pilot(p: int, seed: int = 0) -> int:
    return (C * ((p ^ seed) & MASK64)) & MASK64


def next_seed(seed: int, attempt: int) -> int:
    """Deterministic reseed sequence used after a failed construction attempt."""
    return hash_int(seed ^ attempt, GOLDEN).hi


class Reducer(NamedTuple):
    """Precomputed reduction into ``[S]``; passed to kernels as plain words."""

    kind: int
    slots: int
    mask: int
    magic_hi: int
    magic_lo: int


def make_reducer(kind: ReduceKind, slots: int) -> Reducer:
    if slots < 1:
        raise ValueError("slots must be >= 1")
    kind = ReduceKind(kind)
    if kind == ReduceKind.POW2:
        if slots & (slots - 1):
            raise ValueError(f"power-of-two reduction needs S a power of two, got {slots}")
        return Reducer(int(kind), slots, slots - 1, 0, 0)
    if slots != 1 and (slots & (slots - 1) == 0 or slots >= 1 << 32):
        raise ValueError(f"fast mod needs 1 < S < 2^32 not a power of two, got {slots}")
    if slots == 1:
        return Reducer(int(kind), 1, 0, 0, 0)
    m = ((1 << 128) - 1) // slots + 1
    return Reducer(int(kind), slots, 0, m >> 64, m & MASK64)


def reduce(x: int, r: Reducer) -> int:
    """Map a 64-bit word into ``[S]``."""
    if r.slots == 1:
        return 0
    if r.kind == ReduceKind.POW2:
        return ((C * x) >> 64) & r.mask
    m = (r.magic_hi << 64) | r.magic_lo
    low = (m * x) & ((1 << 128) - 1)
    return (low * r.slots) >> 128


@njit(inline="always", cache=True)
def reduce_word(x, kind, slots, mask, mhi, mlo):
    """Kernel twin of ``reduce``; ``kind``/``slots``/... unpack a Reducer."""
    if slots == U1:
        return U0
    if kind == 0:
        return mulhi(C_U, x) & mask
    # low 128 bits of magic * x, then hi128(low * slots)
    lo_lo = mlo * x
    lo_hi = mhi * x + mulhi(mlo, x)
    t = mulhi(lo_lo, slots)
    mid = lo_hi * slots
    carry = U1 if mid + t < mid else U0
    return mulhi(lo_hi, slots) + carry


@njit(inline="always", cache=True)
def pilot_word(p, seed):
    return C_U * (np.uint64(p) ^ seed)


@njit(cache=True)
def reduce_many(xs, kind, slots, mask, mhi, mlo):
    out = np.empty(xs.shape[0], dtype=np.uint64)
    for i in range(xs.shape[0]):
        out[i] = reduce_word(xs[i], kind, slots, mask, mhi, mlo)
    return out

"""Remap tables sending overflow slots (>= n) to free slots (< n).

Three encodings of the same non-decreasing value list:

* ``PLAIN``: one little-endian uint32 per entry.
* ``CLEF``: 64-byte blocks of 44 values (cache-line Elias-Fano). Block layout:
  bytes 0-3 offset (LE uint32), bytes 4-19 high-part bitmask (LE 128-bit),
  bytes 20-63 the low byte of each value.
* ``EF``: classic Elias-Fano with a sampled select index over the high bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._bits import ALL_ONES, MASK8, U0, U1, U8, U64, popcount, select64, select128, select128_loop
from .errors import PilotHashError, RangeTooWide, ValueTooLarge
from .params import RemapKind

CLEF_VALUES = 44
CLEF_BYTES = 64
CLEF_MAX_VALUE = 1 << 40
CLEF_MAX_SPAN = (128 - CLEF_VALUES) * 256
EF_SAMPLE = 256


def build_filled_remap_values(free_slots, overflow_slots, n: int, total_slots: int) -> np.ndarray:
    """``F[q_i - n] = L_i``; undefined entries copy their predecessor."""
    free_slots = np.asarray(free_slots, dtype=np.uint64)
    overflow_slots = np.asarray(overflow_slots, dtype=np.uint64)
    if free_slots.shape != overflow_slots.shape:
        raise PilotHashError(
            f"construction bug: {free_slots.size} free slots but {overflow_slots.size} overflowing keys"
        )
    length = total_slots - n
    if free_slots.size == 0:
        return np.zeros(length, dtype=np.uint64)
    return _fill(free_slots, overflow_slots, np.uint64(n), length)


@njit(cache=True)
def _fill(free, over, n, length):
    out = np.empty(length, dtype=np.uint64)
    j = 0
    cur = free[0]
    for i in range(length):
        if j < over.shape[0] and over[j] - n == np.uint64(i):
            cur = free[j]
            j += 1
        out[i] = cur
    return out


# --- CacheLineEF -----------------------------------------------------------


@dataclass(frozen=True)
class CacheLineEfBlock:
    offset: int
    high_bits: int
    low_bytes: bytes
    count: int = CLEF_VALUES

    def to_bytes(self) -> bytes:
        return (
            self.offset.to_bytes(4, "little")
            + self.high_bits.to_bytes(16, "little")
            + self.low_bytes.ljust(CLEF_VALUES, b"\0")
        )

    @classmethod
    def from_bytes(cls, raw: bytes, count: int = CLEF_VALUES) -> "CacheLineEfBlock":
        if len(raw) != CLEF_BYTES:
            raise ValueError("a CacheLineEF block is exactly 64 bytes")
        return cls(
            int.from_bytes(raw[0:4], "little"),
            int.from_bytes(raw[4:20], "little"),
            bytes(raw[20:64]),
            count,
        )


def clef_encode(values) -> CacheLineEfBlock:
    values = [int(v) for v in values]
    if not 1 <= len(values) <= CLEF_VALUES:
        raise ValueError(f"a block holds 1..{CLEF_VALUES} values")
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError("values must be non-decreasing")
    if values[-1] >= CLEF_MAX_VALUE or values[0] < 0:
        raise ValueTooLarge(f"value {values[-1]} does not fit in 40 bits")
    if values[-1] - values[0] > CLEF_MAX_SPAN:
        raise RangeTooWide(f"block spans {values[-1] - values[0]} > {CLEF_MAX_SPAN}")
    base = values[0] >> 8
    high = 0
    for i, v in enumerate(values):
        pos = i + (v >> 8) - base
        if pos >= 128:
            raise RangeTooWide(f"high part of value {i} needs bit {pos}")
        high |= 1 << pos
    low = bytes(v & 0xFF for v in values)
    return CacheLineEfBlock(base, high, low.ljust(CLEF_VALUES, b"\0"), len(values))


def _select_py(mask: int, i: int) -> int:
    for _ in range(i):
        mask &= mask - 1
    return (mask & -mask).bit_length() - 1


def clef_get(block: CacheLineEfBlock, i: int) -> int:
    return 256 * block.offset + 256 * (_select_py(block.high_bits, i) - i) + block.low_bytes[i]


@njit(cache=True)
def _clef_encode_all(values, buf):
    """Encode into ``buf`` (uint8, 64 per block). Returns 0, 1 (too large) or 2 (too wide)."""
    n = values.shape[0]
    nb = (n + CLEF_VALUES - 1) // CLEF_VALUES
    for b in range(nb):
        start = b * CLEF_VALUES
        end = min(n, start + CLEF_VALUES)
        v0 = values[start]
        if values[end - 1] >= np.uint64(CLEF_MAX_VALUE):
            return 1
        if values[end - 1] - v0 > np.uint64(CLEF_MAX_SPAN):
            return 2
        base = v0 >> U8
        lo = U0
        hi = U0
        o = b * CLEF_BYTES
        for i in range(end - start):
            v = values[start + i]
            pos = np.uint64(i) + (v >> U8) - base
            if pos >= np.uint64(128):
                return 2
            if pos < U64:
                lo |= U1 << pos
            else:
                hi |= U1 << (pos - U64)
            buf[o + 20 + i] = np.uint8(v & MASK8)
        for k in range(4):
            buf[o + k] = np.uint8((base >> np.uint64(8 * k)) & MASK8)
        for k in range(8):
            buf[o + 4 + k] = np.uint8((lo >> np.uint64(8 * k)) & MASK8)
            buf[o + 12 + k] = np.uint8((hi >> np.uint64(8 * k)) & MASK8)
    return 0


@njit(inline="always", cache=True)
def clef_word(u32, u8, i):
    b = i // CLEF_VALUES
    j = i - b * CLEF_VALUES
    w = b * 16
    off = np.uint64(u32[w])
    lo = np.uint64(u32[w + 1]) | (np.uint64(u32[w + 2]) << np.uint64(32))
    hi = np.uint64(u32[w + 3]) | (np.uint64(u32[w + 4]) << np.uint64(32))
    sel = select128(lo, hi, j)
    return (off << U8) + ((sel - np.uint64(j)) << U8) + np.uint64(u8[b * CLEF_BYTES + 20 + j])


@njit(cache=True)
def _select128_both(los, his, idx):
    a = np.empty(los.shape[0], dtype=np.uint64)
    b = np.empty(los.shape[0], dtype=np.uint64)
    for k in range(los.shape[0]):
        a[k] = select128(los[k], his[k], idx[k])
        b[k] = select128_loop(los[k], his[k], idx[k])
    return a, b


# --- classic Elias-Fano ----------------------------------------------------


@njit(cache=True)
def _ef_build(values, low_bits, low_words, high_words, samples):
    l = np.uint64(low_bits)
    lmask = (U1 << l) - U1 if low_bits > 0 else U0
    k = 0
    for i in range(values.shape[0]):
        v = values[i]
        if low_bits > 0:
            bit = np.uint64(i) * l
            w = bit >> np.uint64(6)
            s = bit & np.uint64(63)
            low = v & lmask
            low_words[w] |= low << s
            if s + l > U64:
                low_words[w + U1] |= low >> (U64 - s)
        pos = (v >> l) + np.uint64(i)
        high_words[pos >> np.uint64(6)] |= U1 << (pos & np.uint64(63))
        if i % EF_SAMPLE == 0:
            samples[k] = pos
            k += 1


@njit(inline="always", cache=True)
def ef_word(low_words, high_words, samples, low_bits, i):
    # samples[k] is the bit position of the (k * EF_SAMPLE)-th one
    k = i // EF_SAMPLE
    p = samples[k]
    r = np.uint64(i - k * EF_SAMPLE)
    w = p >> np.uint64(6)
    word = high_words[w] & (ALL_ONES << (p & np.uint64(63)))
    cnt = popcount(word)
    while r >= cnt:
        r -= cnt
        w += U1
        word = high_words[w]
        cnt = popcount(word)
    high = w * U64 + select64(word, r) - np.uint64(i)
    if low_bits == 0:
        return high
    l = np.uint64(low_bits)
    bit = np.uint64(i) * l
    ww = bit >> np.uint64(6)
    s = bit & np.uint64(63)
    low = low_words[ww] >> s
    if s + l > U64:
        low |= low_words[ww + U1] << (U64 - s)
    return (high << l) | (low & ((U1 << l) - U1))


def _ef_low_bits(length: int, universe: int) -> int:
    if length == 0 or universe <= length:
        return 0
    return int(math.floor(math.log2(universe / length)))


# --- table ----------------------------------------------------------------


_EMPTY_U8 = np.zeros(0, dtype=np.uint8)
_EMPTY_U32 = np.zeros(0, dtype=np.uint32)
_EMPTY_U64 = np.zeros(0, dtype=np.uint64)


class RemapTable:
    """Immutable remap table; ``get(i)`` returns the slot for overflow index ``i``."""

    def __init__(self, kind: RemapKind, length: int, *, plain=None, clef=None, ef=None, fallback=False):
        self.kind = RemapKind(kind)
        self.length = length
        self.fallback = fallback
        self.plain = _EMPTY_U32 if plain is None else plain
        self.clef = _EMPTY_U8 if clef is None else clef
        self.clef_u32 = self.clef.view(np.uint32) if self.clef.size else _EMPTY_U32
        if ef is None:
            ef = (0, 0, _EMPTY_U64, _EMPTY_U64, _EMPTY_U64)
        self.ef_low_bits, self.ef_universe, self.ef_low, self.ef_high, self.ef_samples = ef

    @classmethod
    def build(cls, values, kind: RemapKind) -> "RemapTable":
        """Encode ``values``. CLEF falls back to PLAIN if any block is unencodable."""
        values = np.ascontiguousarray(values, dtype=np.uint64)
        kind = RemapKind(kind)
        length = values.size
        if length and int(values.max()) >= 1 << 32 and kind == RemapKind.PLAIN:
            raise ValueTooLarge("plain 32-bit remap needs all slots < 2^32")
        if kind == RemapKind.CLEF:
            buf = np.zeros(CLEF_BYTES * (-(-length // CLEF_VALUES)), dtype=np.uint8)
            status = _clef_encode_all(values, buf) if length else 0
            if status == 0:
                return cls(kind, length, clef=buf)
            return cls.build(values, RemapKind.PLAIN)._as_fallback()
        if kind == RemapKind.EF:
            if length == 0:
                return cls(kind, 0, ef=(0, 0, _EMPTY_U64, _EMPTY_U64, _EMPTY_U64))
            universe = int(values[-1]) + 1 if length else 0
            l = _ef_low_bits(length, universe)
            low = np.zeros((length * l + 63) // 64 + 1, dtype=np.uint64)
            high_bits = length + (universe >> l) + 1
            high = np.zeros((high_bits + 63) // 64 + 1, dtype=np.uint64)
            samples = np.zeros(-(-length // EF_SAMPLE), dtype=np.uint64)
            if length:
                _ef_build(values, l, low, high, samples)
            return cls(kind, length, ef=(l, universe, low, high, samples))
        return cls(kind, length, plain=values.astype(np.uint32))

    def _as_fallback(self) -> "RemapTable":
        self.fallback = True
        return self

    def get(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return int(self.get_many(np.array([i], dtype=np.int64))[0])

    def get_many(self, idx) -> np.ndarray:
        idx = np.ascontiguousarray(idx, dtype=np.int64)
        return _get_many(idx, *self.kernel_args())

    def kernel_args(self):
        return (
            int(self.kind),
            self.plain,
            self.clef_u32,
            self.clef,
            self.ef_low,
            self.ef_high,
            self.ef_samples,
            self.ef_low_bits,
        )

    def to_list(self) -> list[int]:
        return [int(v) for v in self.get_many(np.arange(self.length))]

    @property
    def nbytes(self) -> int:
        """Encoded payload size; the EF variant includes its select samples."""
        if self.kind == RemapKind.PLAIN:
            return 4 * self.length
        if self.kind == RemapKind.CLEF:
            return CLEF_BYTES * (-(-self.length // CLEF_VALUES))
        return 8 * (self.ef_low.size + self.ef_high.size + self.ef_samples.size)

    def blocks(self) -> list[CacheLineEfBlock]:
        if self.kind != RemapKind.CLEF:
            raise ValueError("not a CacheLineEF table")
        raw = self.clef.tobytes()
        out = []
        for b in range(len(raw) // CLEF_BYTES):
            count = min(CLEF_VALUES, self.length - b * CLEF_VALUES)
            out.append(CacheLineEfBlock.from_bytes(raw[b * CLEF_BYTES : (b + 1) * CLEF_BYTES], count))
        return out


@njit(inline="always", cache=True)
def remap_word(kind, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples, ef_low_bits, i):
    if kind == 0:
        return np.uint64(plain[i])
    if kind == 1:
        return clef_word(clef_u32, clef_u8, i)
    return ef_word(ef_low, ef_high, ef_samples, ef_low_bits, i)


@njit(cache=True)
def _get_many(idx, kind, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples, ef_low_bits):
    out = np.empty(idx.shape[0], dtype=np.uint64)
    for k in range(idx.shape[0]):
        out[k] = remap_word(kind, plain, clef_u32, clef_u8, ef_low, ef_high, ef_samples, ef_low_bits, idx[k])
    return out


def remap_get(table: RemapTable, i: int) -> int:
    return table.get(i)


def select_paths_agree(lo, hi, idx) -> bool:
    """Check the bit-deposit select against the portable loop."""
    a, b = _select128_both(
        np.ascontiguousarray(lo, dtype=np.uint64),
        np.ascontiguousarray(hi, dtype=np.uint64),
        np.ascontiguousarray(idx, dtype=np.int64),
    )
    return bool(np.array_equal(a, b))

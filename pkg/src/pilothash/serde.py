"""Versioned little-endian index file format.

Header (fixed 100 bytes), then the pilot bytes, then the remap payload::

    magic "PTRH" | u16 version | u8 key kind | u8 hash alg | u8 bucket fn
    u8 remap kind | u8 reduce kind | u8 flags (bit 0: CLEF fell back to plain)
    u32 alpha num/den | u32 lambda num/den | u32 lookahead | u32 max retries
    u64 n | u64 P | u64 S | u64 B | u64 seed | u64 base seed
    u64 pilot byte length | u64 remap byte length

Remap payloads start with a u64 entry count:
plain: u32 per entry; CacheLineEF: 64-byte blocks;
Elias-Fano: u64 low-bit width, u64 universe, then u64 word counts and words for
the low bits, high bits and select samples.
"""

from __future__ import annotations

import struct
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bucket_fn import BucketFn
from .errors import FormatError
from .hashing import HashAlg
from .index import MPHF, KeyKind
from .params import BuildParams, ReduceKind, RemapKind, Shape
from .remap import CLEF_BYTES, CLEF_VALUES, RemapTable

MAGIC = b"PTRH"
VERSION = 1
_HEADER = struct.Struct("<4sHBBBBBBIIIIIIQQQQQQQQ")
HEADER_SIZE = _HEADER.size
_FLAG_FALLBACK = 1


def _remap_payload(t: RemapTable) -> bytes:
    head = struct.pack("<Q", t.length)
    if t.kind == RemapKind.PLAIN:
        return head + t.plain.astype("<u4").tobytes()
    if t.kind == RemapKind.CLEF:
        return head + t.clef.tobytes()
    parts = [head, struct.pack("<QQ", t.ef_low_bits, t.ef_universe)]
    for arr in (t.ef_low, t.ef_high, t.ef_samples):
        parts.append(struct.pack("<Q", arr.size))
        parts.append(arr.astype("<u8").tobytes())
    return b"".join(parts)


def serialize(idx: MPHF) -> bytes:
    p = idx.params
    remap = _remap_payload(idx.remap)
    pilots = idx.pilots.tobytes()
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        int(idx.key_kind),
        int(idx.hash_alg),
        int(p.gamma),
        int(idx.remap.kind),
        int(p.reduce),
        _FLAG_FALLBACK if idx.remap.fallback else 0,
        p.alpha.numerator,
        p.alpha.denominator,
        p.lam.numerator,
        p.lam.denominator,
        p.lookahead,
        p.max_seed_retries,
        idx.shape.n,
        idx.shape.parts,
        idx.shape.slots,
        idx.shape.buckets,
        idx.seed,
        p.seed,
        len(pilots),
        len(remap),
    )
    return header + pilots + remap


def _enum(cls, value, what):
    try:
        return cls(value)
    except ValueError:
        raise FormatError(f"unknown {what} id {value}") from None


class _Reader:
    def __init__(self, buf: memoryview):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > len(self.buf):
            raise FormatError("truncated remap payload")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def words(self) -> np.ndarray:
        k = self.u64()
        if k > len(self.buf):
            raise FormatError("bad word count")
        return np.frombuffer(self.take(8 * k), dtype="<u8").astype(np.uint64)


def _parse_remap(kind: RemapKind, raw: memoryview, expected_len: int, fallback: bool) -> RemapTable:
    r = _Reader(raw)
    length = r.u64()
    if length != expected_len:
        raise FormatError(f"remap has {length} entries, expected {expected_len}")
    if kind == RemapKind.PLAIN:
        plain = np.frombuffer(r.take(4 * length), dtype="<u4").astype(np.uint32)
        t = RemapTable(kind, length, plain=plain, fallback=fallback)
    elif kind == RemapKind.CLEF:
        nb = -(-length // CLEF_VALUES)
        clef = np.frombuffer(r.take(CLEF_BYTES * nb), dtype=np.uint8).copy()
        t = RemapTable(kind, length, clef=clef)
    else:
        l, universe = r.u64(), r.u64()
        low, high, samples = r.words(), r.words(), r.words()
        if samples.size != -(-length // 256) or l > 63:
            raise FormatError("inconsistent Elias-Fano payload")
        t = RemapTable(kind, length, ef=(l, universe, low, high, samples))
    if r.pos != len(raw):
        raise FormatError("trailing bytes after remap payload")
    return t


def deserialize(data: bytes) -> MPHF:
    buf = memoryview(data)
    if len(buf) < HEADER_SIZE:
        raise FormatError("file too short for header")
    (magic, version, key_kind, hash_alg, gamma, remap_kind, reduce_kind, flags,
     an, ad, ln, ld, lookahead, retries, n, parts, slots, buckets, seed, base_seed,
     pilots_len, remap_len) = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    key_kind = _enum(KeyKind, key_kind, "key kind")
    hash_alg = _enum(HashAlg, hash_alg, "hash algorithm")
    gamma = _enum(BucketFn, gamma, "bucket function")
    remap_kind = _enum(RemapKind, remap_kind, "remap kind")
    reduce_kind = _enum(ReduceKind, reduce_kind, "reduce kind")
    if flags & ~_FLAG_FALLBACK:
        raise FormatError(f"unknown flags {flags:#x}")
    if ad == 0 or ld == 0 or n == 0 or parts == 0 or slots == 0:
        raise FormatError("zero field in header")
    if pilots_len != parts * buckets:
        raise FormatError("pilot length does not match P*B")
    if HEADER_SIZE + pilots_len + remap_len != len(buf):
        raise FormatError(f"expected {HEADER_SIZE + pilots_len + remap_len} bytes, got {len(buf)}")
    fallback = bool(flags & _FLAG_FALLBACK)
    try:
        params = BuildParams(
            alpha=Fraction(an, ad),
            lam=Fraction(ln, ld),
            gamma=gamma,
            remap=RemapKind.CLEF if fallback else remap_kind,
            reduce=reduce_kind,
            lookahead=lookahead,
            seed=base_seed,
            max_seed_retries=retries,
        )
    except ValueError as e:
        raise FormatError(f"invalid parameters: {e}") from None
    shape = Shape(n=n, parts=parts, slots=slots, buckets=buckets)
    pilots = np.frombuffer(buf[HEADER_SIZE : HEADER_SIZE + pilots_len], dtype=np.uint8).copy()
    remap = _parse_remap(remap_kind, buf[HEADER_SIZE + pilots_len :], shape.total_slots - n, fallback)
    try:
        return MPHF(shape, params, seed, pilots, remap, key_kind, hash_alg)
    except ValueError as e:
        raise FormatError(str(e)) from None


def save(idx: MPHF, path) -> int:
    data = serialize(idx)
    Path(path).write_bytes(data)
    return len(data)


def load(path) -> MPHF:
    return deserialize(Path(path).read_bytes())

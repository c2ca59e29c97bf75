"""The finished minimal perfect hash function."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import query as q
from .hashing import HashAlg, hash_bytes_many, hash_ints, make_reducer
from .params import BuildParams, Shape
from .remap import RemapTable


class KeyKind(enum.IntEnum):
    U64 = 1
    BYTES = 2


def normalize_keys(keys) -> tuple[KeyKind, object]:
    """Return the key kind and keys as a uint64 array or a list of bytes."""
    if isinstance(keys, np.ndarray):
        if keys.dtype.kind in "iu":
            return KeyKind.U64, np.ascontiguousarray(keys).astype(np.uint64, copy=False)
        if keys.dtype.kind in "SUO":
            keys = keys.tolist()
        else:
            raise TypeError(f"unsupported key dtype {keys.dtype}")
    keys = list(keys)
    if not keys:
        return KeyKind.U64, np.zeros(0, dtype=np.uint64)
    first = keys[0]
    if isinstance(first, (int, np.integer)) and not isinstance(first, bool):
        return KeyKind.U64, np.array([int(k) for k in keys], dtype=np.uint64)
    return KeyKind.BYTES, [k.encode() if isinstance(k, str) else bytes(k) for k in keys]


def key_hashes(kind: KeyKind, alg: HashAlg, keys, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if kind == KeyKind.U64:
        h = hash_ints(keys, seed)
        return h, h
    return hash_bytes_many(keys, seed, 128 if alg == HashAlg.XXH3_128 else 64)


@dataclass
class MPHF:
    shape: Shape
    params: BuildParams
    seed: int
    pilots: np.ndarray
    remap: RemapTable
    key_kind: KeyKind
    hash_alg: HashAlg
    stats: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._reducer = make_reducer(self.params.reduce, self.shape.slots)

    @property
    def n(self) -> int:
        return self.shape.n

    def _cfg(self, minimal: bool, hashed: bool) -> np.ndarray:
        r = self._reducer
        cfg = np.zeros(q.CFG_LEN, dtype=np.uint64)
        cfg[q.SEED] = self.seed
        cfg[q.PARTS] = self.shape.parts
        cfg[q.BUCKETS] = self.shape.buckets
        cfg[q.SLOTS] = self.shape.slots
        cfg[q.GAMMA] = int(self.params.gamma)
        cfg[q.RKIND] = r.kind
        cfg[q.RSLOTS] = r.slots
        cfg[q.RMASK] = r.mask
        cfg[q.RMHI] = r.magic_hi
        cfg[q.RMLO] = r.magic_lo
        cfg[q.N] = self.shape.n
        cfg[q.MINIMAL] = 1 if minimal else 0
        cfg[q.HASHED] = 1 if hashed else 0
        cfg[q.REMAP] = int(self.remap.kind)
        cfg[q.EF_L] = self.remap.ef_low_bits
        return cfg

    def _prepare(self, keys, minimal: bool):
        if self.key_kind == KeyKind.U64:
            if not isinstance(keys, np.ndarray):
                keys = np.array([int(k) for k in keys], dtype=np.uint64)
            keys = np.ascontiguousarray(keys).astype(np.uint64, copy=False)
            return self._cfg(minimal, False), keys, keys
        kind, keys = normalize_keys(keys)
        if kind == KeyKind.U64 and len(keys):
            raise TypeError("this index was built on byte-string keys")
        hi, lo = key_hashes(self.key_kind, self.hash_alg, list(keys), self.seed)
        return self._cfg(minimal, True), hi, lo

    def query(self, keys, mode: q.QueryMode | str = q.LOOP, *, minimal: bool = True, threads: int = 1) -> np.ndarray:
        """Evaluate a batch of keys; output order matches input order."""
        if isinstance(mode, str):
            mode = q.QueryMode.parse(mode)
        cfg, hi, lo = self._prepare(keys, minimal)
        out = np.empty(hi.shape[0], dtype=np.uint64)
        args = self.remap.kernel_args()[1:7]
        if threads <= 1 or hi.shape[0] < 2 * threads:
            return q.run(cfg, hi, lo, self.pilots, args, mode, out)
        bounds = np.linspace(0, hi.shape[0], threads + 1).astype(np.int64)
        with ThreadPoolExecutor(threads) as pool:
            futs = [
                pool.submit(q.run, cfg, hi[a:b], lo[a:b], self.pilots, args, mode, out[a:b])
                for a, b in zip(bounds[:-1], bounds[1:])
            ]
            for f in futs:
                f.result()
        return out

    def index(self, key) -> int:
        return int(self.query([key])[0])

    def index_no_remap(self, key) -> int:
        return int(self.query([key], minimal=False)[0])

    def index_batched(self, keys, batch_size: int = 32) -> np.ndarray:
        return self.query(keys, q.QueryMode("batch", batch_size))

    def index_stream(self, keys, lookahead: int | None = None) -> np.ndarray:
        return self.query(keys, q.QueryMode("stream", lookahead or self.params.lookahead))

    @property
    def pilot_bytes(self) -> int:
        return int(self.pilots.size)

    @property
    def remap_bytes(self) -> int:
        return self.remap.nbytes

    def bits_per_key(self) -> dict:
        n = self.shape.n
        pb = 8 * self.pilot_bytes / n
        rb = 8 * self.remap_bytes / n
        return {"pilots": pb, "remap": rb, "total": pb + rb}

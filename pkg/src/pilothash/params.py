"""Layout of the index (parts, slots, buckets) and the named presets."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import ShapeOverflow

MAX_TOTAL_SLOTS = 1 << 48
DEFAULT_LOOKAHEAD = 32


class BucketFn(enum.IntEnum):
    LINEAR = 0
    QUADRATIC = 1
    CUBIC = 2
    SKEWED = 3
    OPTIMAL = 4


class RemapKind(enum.IntEnum):
    PLAIN = 0
    CLEF = 1
    EF = 2


class ReduceKind(enum.IntEnum):
    POW2 = 0
    """S a power of two, slot = hi(C*x) & (S-1)."""
    FASTMOD_SINGLE = 1
    """One part, S not a power of two."""
    FASTMOD = 2
    """Many parts, S = ceil(n / (alpha*P)) bumped off powers of two."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class BuildParams:
    alpha: Fraction = Fraction(99, 100)
    lam: Fraction = Fraction(7, 2)
    gamma: BucketFn = BucketFn.CUBIC
    remap: RemapKind = RemapKind.CLEF
    reduce: ReduceKind = ReduceKind.FASTMOD
    lookahead: int = DEFAULT_LOOKAHEAD
    seed: int = 0
    max_seed_retries: int = 10

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frac(self.alpha))
        object.__setattr__(self, "lam", _frac(self.lam))
        object.__setattr__(self, "gamma", BucketFn(self.gamma))
        object.__setattr__(self, "remap", RemapKind(self.remap))
        object.__setattr__(self, "reduce", ReduceKind(self.reduce))
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.lam < 1:
            raise ValueError(f"lambda must be >= 1, got {self.lam}")
        if self.lookahead < 1:
            raise ValueError("lookahead must be >= 1")
        if self.remap == RemapKind.CLEF and self.alpha > Fraction(99, 100):
            raise ValueError("CacheLineEF remapping requires alpha <= 0.99")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit word")
        if self.max_seed_retries < 0:
            raise ValueError("max_seed_retries must be >= 0")

    def with_(self, **kw) -> "BuildParams":
        return replace(self, **kw)


_PRESETS = {
    "fast": dict(gamma=BucketFn.LINEAR, lam=Fraction(3), remap=RemapKind.PLAIN),
    "default": dict(gamma=BucketFn.CUBIC, lam=Fraction(7, 2), remap=RemapKind.CLEF),
    "compact": dict(gamma=BucketFn.CUBIC, lam=Fraction(4), remap=RemapKind.CLEF),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str, **overrides) -> BuildParams:
    try:
        kw = dict(_PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}") from None
    kw.update(alpha=Fraction(99, 100), lookahead=DEFAULT_LOOKAHEAD)
    kw.update(overrides)
    return BuildParams(**kw)


@dataclass(frozen=True)
class Shape:
    n: int
    parts: int
    slots: int
    buckets: int

    @property
    def total_slots(self) -> int:
        return self.parts * self.slots

    @property
    def total_buckets(self) -> int:
        return self.parts * self.buckets


def _min_keys_per_part(alpha: Fraction) -> Fraction:
    # 2/eps^2 with eps = (1 - alpha)/2
    return 8 / (1 - alpha) ** 2


def keys_per_part(n: int, alpha) -> int:
    """Target number of keys per part so that no part is likely oversubscribed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = _frac(alpha)
    if alpha == 1:
        return n
    m = _min_keys_per_part(alpha)
    if n <= m:
        return math.ceil(m)
    return max(math.ceil(m), math.ceil(float(m) * math.log(n / m)))


def _is_pow2(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def _ceil_div(a, b) -> int:
    return math.ceil(Fraction(a) / Fraction(b))


def buckets_per_part(slots: int, alpha, lam) -> int:
    return math.ceil(_frac(alpha) * slots / _frac(lam))


def compute_shape(n: int, params: BuildParams, *, shards: int = 1, slots_per_part: int | None = None) -> Shape:
    """Global layout for ``n`` keys.

    ``shards`` rounds the part count up to a multiple so that every part's hash
    interval nests inside one shard. ``slots_per_part`` forces S (used to
    reproduce fixed-part-size experiments).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if shards < 1:
        raise ValueError("shards must be >= 1")
    a, lam = params.alpha, params.lam
    kind = params.reduce

    if kind == ReduceKind.FASTMOD_SINGLE:
        if shards != 1:
            raise ValueError("single-part mode cannot be sharded")
        s = slots_per_part if slots_per_part is not None else _ceil_div(n, a)
        while _is_pow2(s):
            s += 1
        parts = 1
        if s >= 1 << 32:
            raise ShapeOverflow(f"single-part fast mod needs S < 2^32, got {s}")
        if a * s < n:
            raise ShapeOverflow(f"S={s} too small for n={n}")
    elif kind == ReduceKind.POW2:
        if slots_per_part is not None:
            if not _is_pow2(slots_per_part):
                raise ValueError("slots_per_part must be a power of two in POW2 mode")
            s = slots_per_part
        else:
            s = 1 << max(0, (_ceil_div(keys_per_part(n, a), a) - 1).bit_length())
        parts = _ceil_div(n, a * s)
        parts = _ceil_div(parts, shards) * shards
    else:
        if slots_per_part is not None:
            s = slots_per_part
            if _is_pow2(s):
                raise ValueError("slots_per_part must not be a power of two in FASTMOD mode")
            parts = _ceil_div(_ceil_div(n, a * s), shards) * shards
        else:
            parts = max(1, n // keys_per_part(n, a))
            parts = _ceil_div(parts, shards) * shards
            s = _ceil_div(n, a * parts)
            while _is_pow2(s):
                s += 1
        if s >= 1 << 32:
            raise ShapeOverflow(f"fast mod needs S < 2^32, got {s}")

    shape = Shape(n=n, parts=parts, slots=s, buckets=buckets_per_part(s, a, lam))
    if shape.total_slots > MAX_TOTAL_SLOTS:
        raise ShapeOverflow(f"{shape.total_slots} slots exceed the 2^48 slot address range")
    return shape

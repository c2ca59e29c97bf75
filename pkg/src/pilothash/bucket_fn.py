"""Bucket assignment functions on 64-bit fixed-point fractions.

A word ``x`` represents the fraction ``x / 2^64``. Every function is monotone
non-decreasing and maps ``[0, 2^64)`` into itself.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._bits import ALL_ONES, U0, U1, mulhi
from .params import BucketFn

U2 = np.uint64(2)
U8_ = np.uint64(8)
U24 = np.uint64(24)
GRID_MASK = np.uint64((1 << 24) - 1)

# skewed: the first 60% of the domain lands on the first 30% of the range
SKEW_X = np.uint64((6 << 64) // 10)
SKEW_Y = np.uint64(((6 << 64) // 10) >> 1)

OPT_EPS = 1.0 / 256.0
_TWO64 = 18446744073709551616.0


@njit(inline="always", cache=True)
def _opt_grid(q):
    # optimal function sampled on a 2^-40 grid; grid spacing times the minimum
    # slope (1/256) dwarfs double rounding, so the samples are monotone
    if q == np.uint64(1 << 40):
        return ALL_ONES
    xf = np.float64(q) * (1.0 / 1099511627776.0)
    g = xf + (1.0 - OPT_EPS) * (1.0 - xf) * np.log1p(-xf)
    if g <= 0.0:
        return U0
    v = g * _TWO64
    if v >= _TWO64:
        return ALL_ONES
    return np.uint64(v)


@njit(inline="always", cache=True)
def gamma_word(kind, x):
    if kind == 0:
        return x
    if kind == 1:
        return mulhi(x, x)
    if kind == 2:
        x2 = mulhi(x, x)
        x3 = mulhi(x2, x)
        s = (x2 >> U1) + (x3 >> U1)
        return s - (s >> U8_) + (x >> U8_)
    if kind == 3:
        if x < SKEW_X:
            return x >> U1
        d = x - SKEW_X
        return SKEW_Y + d + (d >> U1) + (d >> U2)
    q = x >> U24
    f = x & GRID_MASK
    g0 = _opt_grid(q)
    g1 = _opt_grid(q + U1)
    return g0 + (((g1 - g0) * f) >> U24)


@njit(inline="always", cache=True)
def part_bucket_word(h, parts, buckets, kind):
    part = mulhi(parts, h)
    x = parts * h
    return part, mulhi(buckets, gamma_word(kind, x))


@njit(cache=True)
def gamma_many(kind, xs):
    out = np.empty(xs.shape[0], dtype=np.uint64)
    for i in range(xs.shape[0]):
        out[i] = gamma_word(kind, xs[i])
    return out


@njit(cache=True)
def part_bucket_many(hs, parts, buckets, kind):
    p = np.empty(hs.shape[0], dtype=np.uint64)
    b = np.empty(hs.shape[0], dtype=np.uint64)
    for i in range(hs.shape[0]):
        p[i], b[i] = part_bucket_word(hs[i], parts, buckets, kind)
    return p, b


@njit(cache=True)
def parts_of(hs, parts):
    out = np.empty(hs.shape[0], dtype=np.int64)
    for i in range(hs.shape[0]):
        out[i] = np.int64(mulhi(parts, hs[i]))
    return out


@njit(cache=True)
def buckets_of(hs, parts, buckets, kind):
    out = np.empty(hs.shape[0], dtype=np.int64)
    for i in range(hs.shape[0]):
        x = parts * hs[i]
        out[i] = np.int64(mulhi(buckets, gamma_word(kind, x)))
    return out


def gamma_eval(kind: BucketFn, x: int) -> int:
    return int(gamma_many(int(BucketFn(kind)), np.array([x], dtype=np.uint64))[0])


def part_and_bucket(h_hi: int, parts: int, buckets: int, kind: BucketFn) -> tuple[int, int]:
    p, b = part_bucket_many(np.array([h_hi], dtype=np.uint64), np.uint64(parts), np.uint64(buckets), int(kind))
    return int(p[0]), int(b[0])


def gamma_reference(kind: BucketFn, x: float) -> float:
    """Real-valued version of each function, for plots and sanity checks."""
    kind = BucketFn(kind)
    if kind == BucketFn.LINEAR:
        return x
    if kind == BucketFn.QUADRATIC:
        return x * x
    if kind == BucketFn.CUBIC:
        return 255 / 256 * (x * x + x**3) / 2 + x / 256
    if kind == BucketFn.SKEWED:
        return x / 2 if x < 0.6 else 0.3 + (x - 0.6) * 1.75
    return x + (1 - OPT_EPS) * (1 - x) * math.log1p(-x) if x < 1 else 1.0

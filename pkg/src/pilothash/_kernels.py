"""Numba kernels for pilot search (one part at a time)."""

import numpy as np
from numba import njit

from ._bits import U0, U1, mulhi, trailing_zeros
from .hashing import pilot_word, reduce_word

OK = 0
EVICTION_BUDGET = 1
NO_VALID_PILOT = 2
ABORTED = 3

RECENT = 16
PERCENTILES = 100

U6 = np.uint64(6)
U63_ = np.uint64(63)


@njit(cache=True)
def bucket_starts(bids, buckets):
    """Offsets of each bucket in a part whose keys are sorted by bucket id."""
    starts = np.zeros(buckets + 1, dtype=np.int64)
    for i in range(bids.shape[0]):
        starts[bids[i] + 1] += 1
    for b in range(buckets):
        starts[b + 1] += starts[b]
    return starts


# Helpers that take arrays pay a refcount round trip per call in numba, so the
# per-slot and per-bucket hot paths below are written inline.


@njit(nogil=True, cache=True)
def build_part(lo, bstart, rk, rs, rm, rmhi, rmlo, seed, pilots, taken, max_evictions, abort, evict_hist, size_hist):
    """Assign a pilot to every bucket of one part.

    ``lo`` holds the slot-selecting hash word of every key, grouped by bucket
    via ``bstart``. ``pilots`` (uint8, one per bucket) and ``taken`` (bitset of
    the part's slots) are written in place. Returns ``(status, evictions)``.
    """
    nb = bstart.shape[0] - 1
    slots = np.int64(rs)
    size = np.empty(nb, dtype=np.int64)
    maxsize = 0
    for b in range(nb):
        s = bstart[b + 1] - bstart[b]
        size[b] = s
        if s > maxsize:
            maxsize = s
        pilots[b] = 0
    for w in range(taken.shape[0]):
        taken[w] = U0

    # static order: size desc, id asc
    counts = np.zeros(maxsize + 2, dtype=np.int64)
    for b in range(nb):
        counts[size[b]] += 1
    for s in range(maxsize + 1):
        size_hist[s] += counts[s]
    pos = np.zeros(maxsize + 2, dtype=np.int64)
    acc = 0
    for s in range(maxsize, 0, -1):
        pos[s] = acc
        acc += counts[s]
    nstatic = acc
    order = np.empty(nstatic, dtype=np.int64)
    for b in range(nb):
        s = size[b]
        if s > 0:
            order[pos[s]] = b
            pos[s] += 1

    hp = np.empty(256, dtype=np.uint64)
    for p in range(256):
        hp[p] = pilot_word(p, seed)

    owner = np.full(slots, -1, dtype=np.int32)
    # evicted buckets, keyed like the static order: (maxsize - size) << 32 | id
    heap = np.empty(max(nb, 1), dtype=np.int64)
    hn = 0
    recent = np.full(RECENT, -1, dtype=np.int64)
    rpos = 0
    tmp = np.empty(max(maxsize, 1), dtype=np.uint64)
    coll = np.empty(max(maxsize, 1), dtype=np.int64)
    evictions = 0
    ptr = 0
    steps = 0

    while True:
        if hn > 0 and (ptr >= nstatic or heap[0] < ((maxsize - size[order[ptr]]) << 32 | order[ptr])):
            b = heap[0] & 0xFFFFFFFF
            hn -= 1
            heap[0] = heap[hn]
            i = 0
            while True:
                c = 2 * i + 1
                if c >= hn:
                    break
                if c + 1 < hn and heap[c + 1] < heap[c]:
                    c += 1
                if heap[c] >= heap[i]:
                    break
                t = heap[i]
                heap[i] = heap[c]
                heap[c] = t
                i = c
        elif ptr < nstatic:
            b = order[ptr]
            ptr += 1
        else:
            break
        steps += 1
        if (steps & 1023) == 0 and abort[0] != 0:
            return ABORTED, evictions
        s = size[b]
        k0 = bstart[b]

        # phase 1: smallest pilot whose slots are distinct and free
        found = -1
        for p in range(256):
            h = hp[p]
            ok = True
            for j in range(s):
                slot = reduce_word(lo[k0 + j] ^ h, rk, rs, rm, rmhi, rmlo)
                if (taken[slot >> U6] >> (slot & U63_)) & U1:
                    ok = False
                    break
                for jj in range(j):
                    if tmp[jj] == slot:
                        ok = False
                        break
                if not ok:
                    break
                tmp[j] = slot
            if ok:
                found = p
                break

        if found < 0:
            # phase 2: minimise sum of size^2 over the buckets that would be evicted
            best_cost = np.int64(1) << 62
            best_p = -1
            for p in range(256):
                h = hp[p]
                valid = True
                for j in range(s):
                    slot = reduce_word(lo[k0 + j] ^ h, rk, rs, rm, rmhi, rmlo)
                    for jj in range(j):
                        if tmp[jj] == slot:
                            valid = False
                            break
                    if not valid:
                        break
                    tmp[j] = slot
                if not valid:
                    continue
                cost = 0
                nc = 0
                for j in range(s):
                    o = owner[tmp[j]]
                    if o < 0:
                        continue
                    for r in range(RECENT):
                        if recent[r] == o:
                            valid = False
                            break
                    if not valid:
                        break
                    dup = False
                    for c in range(nc):
                        if coll[c] == o:
                            dup = True
                            break
                    if dup:
                        continue
                    coll[nc] = o
                    nc += 1
                    cost += size[o] * size[o]
                    if cost >= best_cost:
                        valid = False
                        break
                if valid and cost < best_cost:
                    best_cost = cost
                    best_p = p
            if best_p < 0:
                return NO_VALID_PILOT, evictions
            found = best_p
            h = hp[found]
            for j in range(s):
                tmp[j] = reduce_word(lo[k0 + j] ^ h, rk, rs, rm, rmhi, rmlo)
            # evict colliding buckets
            for j in range(s):
                o = owner[tmp[j]]
                if o < 0:
                    continue
                ho = hp[pilots[o]]
                for k in range(bstart[o], bstart[o + 1]):
                    slot = reduce_word(lo[k] ^ ho, rk, rs, rm, rmhi, rmlo)
                    owner[slot] = np.int32(-1)
                    taken[slot >> U6] &= ~(U1 << (slot & U63_))
                i = hn
                heap[i] = (maxsize - size[o]) << 32 | o
                hn += 1
                while i > 0:
                    parent = (i - 1) >> 1
                    if heap[i] >= heap[parent]:
                        break
                    t = heap[i]
                    heap[i] = heap[parent]
                    heap[parent] = t
                    i = parent
                evictions += 1
                if nstatic > 0:
                    evict_hist[min(PERCENTILES - 1, (max(ptr, 1) - 1) * PERCENTILES // nstatic)] += 1
            if evictions > max_evictions:
                return EVICTION_BUDGET, evictions

        pilots[b] = found
        for j in range(s):
            slot = tmp[j]
            owner[slot] = np.int32(b)
            taken[slot >> U6] |= U1 << (slot & U63_)
        recent[rpos] = b
        rpos = (rpos + 1) % RECENT

    return OK, evictions


@njit(cache=True)
def _scan_slots(taken, parts, slots, n, free, over, write):
    words = taken.shape[1]
    i = 0
    j = 0
    for p in range(parts):
        base = p * slots
        for w in range(words):
            lim = min(64, slots - w * 64)
            if lim <= 0:
                break
            word = taken[p, w]
            valid = (U1 << np.uint64(lim)) - U1 if lim < 64 else ~U0
            g0 = base + w * 64
            # split the word at n: bits below are free-slot candidates, bits above overflow
            cut = min(max(n - g0, 0), lim)
            below = (U1 << np.uint64(cut)) - U1 if cut < 64 else ~U0
            m = ~word & valid & below
            while m != U0:
                if write:
                    free[i] = np.uint64(g0) + trailing_zeros(m)
                i += 1
                m &= m - U1
            m = word & valid & ~below
            while m != U0:
                if write:
                    over[j] = np.uint64(g0) + trailing_zeros(m)
                j += 1
                m &= m - U1
    return i, j


@njit(cache=True)
def collect_remap_slots(taken, parts, slots, n):
    """Sorted free global slots < n and sorted occupied global slots >= n."""
    dummy = np.empty(0, dtype=np.uint64)
    nfree, nover = _scan_slots(taken, parts, slots, n, dummy, dummy, False)
    free = np.empty(nfree, dtype=np.uint64)
    over = np.empty(nover, dtype=np.uint64)
    _scan_slots(taken, parts, slots, n, free, over, True)
    return free, over

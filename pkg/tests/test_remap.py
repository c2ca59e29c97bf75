import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from pilothash import RemapKind
from pilothash.errors import PilotHashError, RangeTooWide, ValueTooLarge
from pilothash.remap import (
    CLEF_MAX_SPAN,
    CacheLineEfBlock,
    _select128_both,
    RemapTable,
    build_filled_remap_values,
    clef_encode,
    clef_get,
    remap_get,
    select_paths_agree,
)

# --- predecessor fill -----------------------------------------------------------


def test_fill_single():
    n = 10
    assert build_filled_remap_values([5], [n], n, n + 1).tolist() == [5]


def test_fill_gap_copies_predecessor():
    n = 10
    assert build_filled_remap_values([2, 7], [n, n + 2], n, n + 3).tolist() == [2, 2, 7]


def test_fill_full_load_is_empty():
    assert build_filled_remap_values([], [], 50, 50).size == 0


def test_fill_leading_positions_take_first_value():
    n = 4
    assert build_filled_remap_values([1, 3], [n + 2, n + 3], n, n + 4).tolist() == [1, 1, 1, 3]


def test_fill_length_mismatch():
    with pytest.raises(PilotHashError):
        build_filled_remap_values([1, 2], [10], 10, 12)


@st.composite
def remap_case(draw):
    n = draw(st.integers(1, 400))
    extra = draw(st.integers(0, 60))
    r = draw(st.integers(0, min(n, extra)))
    free = sorted(draw(st.sets(st.integers(0, n - 1), min_size=r, max_size=r)))
    over = sorted(draw(st.sets(st.integers(n, n + extra - 1), min_size=r, max_size=r))) if extra else []
    return free, over, n, n + extra


@given(remap_case())
def test_fill_matches_naive(case):
    free, over, n, total = case
    got = build_filled_remap_values(free, over, n, total).tolist()
    assert got == O.fill_naive(free, over, n, total)
    assert all(v < n for v in got) or not free
    assert got == sorted(got)


# --- CacheLineEF blocks ---------------------------------------------------------


def test_clef_identity_chunk():
    b = clef_encode(range(44))
    assert b.offset == 0
    assert b.high_bits == (1 << 44) - 1
    assert b.low_bytes == bytes(range(44))
    assert clef_get(b, 7) == 7


def test_clef_repeated_value():
    b = clef_encode([256] * 44)
    assert b.offset == 1
    assert b.high_bits == (1 << 44) - 1
    assert b.low_bytes == bytes(44)


def test_clef_max_span():
    b = clef_encode([0, CLEF_MAX_SPAN])
    assert CLEF_MAX_SPAN == 21_504
    assert b.high_bits == (1 << 0) | (1 << 85)
    assert [clef_get(b, i) for i in range(2)] == [0, 21_504]


def test_clef_span_too_wide():
    with pytest.raises(RangeTooWide):
        clef_encode([0, 21_505])


def test_clef_value_too_large():
    with pytest.raises(ValueTooLarge):
        clef_encode([(1 << 40) - 5, 1 << 40])
    clef_encode([(1 << 40) - 1])


def test_clef_rejects_bad_chunks():
    with pytest.raises(ValueError):
        clef_encode([])
    with pytest.raises(ValueError):
        clef_encode(range(45))
    with pytest.raises(ValueError):
        clef_encode([3, 2])


def test_clef_block_layout_is_64_bytes_little_endian():
    b = clef_encode([0x1234_5678_00 + i for i in range(3)])
    raw = b.to_bytes()
    assert len(raw) == 64
    assert raw[0:4] == (0x1234_5678_00 >> 8).to_bytes(4, "little")
    assert int.from_bytes(raw[4:20], "little") == 0b111
    assert raw[20:23] == bytes([0, 1, 2]) and raw[23:] == bytes(41)
    assert CacheLineEfBlock.from_bytes(raw, 3) == b


@st.composite
def clef_chunk(draw):
    count = draw(st.integers(1, 44))
    span = draw(st.integers(0, CLEF_MAX_SPAN))
    v0 = draw(st.integers(0, (1 << 40) - 1 - span))
    rest = sorted(draw(st.lists(st.integers(0, span), min_size=count - 1, max_size=count - 1)))
    vals = [v0] + [v0 + d for d in rest]
    if count > 1 and draw(st.booleans()):
        vals[-1] = v0 + span
    return vals


@given(clef_chunk())
def test_clef_roundtrip_and_invariants(vals):
    b = clef_encode(vals)
    assert bin(b.high_bits).count("1") == len(vals)
    positions = [i for i in range(128) if b.high_bits >> i & 1]
    assert positions == sorted(set(positions))
    for i, v in enumerate(vals):
        assert positions[i] - i == (v >> 8) - (vals[0] >> 8)
        assert clef_get(b, i) == v
        assert O.clef_decode_raw(b.to_bytes(), i) == v
    # first value decodes from the first set bit
    assert clef_get(b, 0) == 256 * b.offset + 256 * positions[0] + b.low_bytes[0]
    assert b.low_bytes[len(vals) :] == bytes(44 - len(vals))


@given(st.lists(clef_chunk(), min_size=1, max_size=8))
def test_clef_table_bytes_match_block_encoder(chunks):
    # pad every chunk but the last to 44 values so that table blocks line up with chunks
    full = []
    for c in chunks[:-1]:
        full.append((c * 44)[:44] if len(c) < 44 else c)
    full.append(chunks[-1])
    full = [sorted(c) for c in full]
    values = np.array([v for c in full for v in c], dtype=np.uint64)
    t = RemapTable.build(values, RemapKind.CLEF)
    assert t.kind == RemapKind.CLEF and not t.fallback
    expected = b"".join(clef_encode(c).to_bytes() for c in full)
    assert t.clef.tobytes() == expected
    assert t.to_list() == values.tolist()


# --- select ---------------------------------------------------------------------


def test_select_paths_agree_random_masks():
    rng = np.random.default_rng(7)
    m = 10**5
    lo = rng.integers(0, 2**64 - 1, size=m, dtype=np.uint64, endpoint=True)
    hi = rng.integers(0, 2**64 - 1, size=m, dtype=np.uint64, endpoint=True)
    # sparse masks too
    lo[: m // 4] &= rng.integers(0, 2**64 - 1, size=m // 4, dtype=np.uint64, endpoint=True)
    hi[m // 4 : m // 2] = 0
    lo[m // 2 : m // 2 + 100] = 0
    hi[m // 2 : m // 2 + 100] |= np.uint64(1)
    counts = np.array([bin(int(a)).count("1") + bin(int(b)).count("1") for a, b in zip(lo, hi)])
    idx = (rng.random(m) * counts).astype(np.int64)
    assert select_paths_agree(lo, hi, idx)
    fast, _ = _select128_both(lo, hi, idx)
    for k in range(0, m, 997):
        mask = int(lo[k]) | (int(hi[k]) << 64)
        assert int(fast[k]) == [b for b in range(128) if mask >> b & 1][idx[k]]
    assert select_paths_agree(np.array([1 << 63], np.uint64), np.array([1 << 63], np.uint64), np.array([1]))


# --- tables ---------------------------------------------------------------------

KINDS = [RemapKind.PLAIN, RemapKind.CLEF, RemapKind.EF]


def test_plain_get():
    t = RemapTable.build(np.array([2, 2, 7], dtype=np.uint64), RemapKind.PLAIN)
    assert remap_get(t, 0) == 2 and t.get(2) == 7
    with pytest.raises(IndexError):
        t.get(3)


@st.composite
def sorted_values(draw):
    length = draw(st.integers(1, 3000))
    gap = draw(st.sampled_from([0, 1, 3, 100, 500, 5000]))
    start = draw(st.integers(0, 1 << 30))
    rng = np.random.default_rng(draw(st.integers(0, 2**32)))
    steps = rng.integers(0, 2 * gap + 1, size=length, dtype=np.int64)
    steps[0] = 0
    return (start + np.cumsum(steps)).astype(np.uint64)


@given(sorted_values())
def test_all_encodings_agree(values):
    outs = {}
    for kind in KINDS:
        t = RemapTable.build(values, kind)
        outs[kind] = t.get_many(np.arange(values.size))
        assert np.array_equal(outs[kind], values), kind
    assert np.array_equal(outs[RemapKind.PLAIN], outs[RemapKind.CLEF])
    assert np.array_equal(outs[RemapKind.PLAIN], outs[RemapKind.EF])


@given(st.integers(1, 10_000))
def test_byte_sizes_exact(r):
    values = np.arange(r, dtype=np.uint64)
    assert RemapTable.build(values, RemapKind.PLAIN).nbytes == 4 * r
    clef = RemapTable.build(values, RemapKind.CLEF)
    assert clef.nbytes == 64 * -(-r // 44) == clef.clef.size


def test_clef_hundred_thousand_values():
    rng = np.random.default_rng(11)
    # every gap <= 500, so a 44-value chunk spans at most 43 * 500 < 21504
    values = np.cumsum(rng.integers(0, 501, size=10**5)).astype(np.uint64)
    t = RemapTable.build(values, RemapKind.CLEF)
    assert not t.fallback and t.kind == RemapKind.CLEF
    assert np.array_equal(t.get_many(np.arange(values.size)), values)
    assert abs(8 * t.nbytes / values.size - 64 * 8 / 44) < 0.01


def test_clef_falls_back_to_plain():
    values = np.array([0, 10, 30_000, 30_001], dtype=np.uint64)
    t = RemapTable.build(values, RemapKind.CLEF)
    assert t.kind == RemapKind.PLAIN and t.fallback
    assert t.to_list() == values.tolist()


def test_plain_rejects_values_beyond_32_bits():
    with pytest.raises(ValueTooLarge):
        RemapTable.build(np.array([1 << 32], dtype=np.uint64), RemapKind.PLAIN)


@pytest.mark.parametrize("kind", KINDS)
def test_empty_table(kind):
    t = RemapTable.build(np.zeros(0, dtype=np.uint64), kind)
    assert t.length == 0 and t.nbytes == 0 and t.to_list() == []


@pytest.mark.parametrize("values", [[0], [5], [0, 0, 0], [1 << 39], list(range(0, 10**6, 999))])
def test_ef_edge_cases(values):
    v = np.array(values, dtype=np.uint64)
    t = RemapTable.build(v, RemapKind.EF)
    assert t.to_list() == O.ef_naive(values)

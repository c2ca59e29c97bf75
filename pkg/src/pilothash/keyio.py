"""Key files and reproducible generated corpora."""

from __future__ import annotations

import numpy as np

from .index import KeyKind
from .sharding import KeySource

_ALPHABET = np.frombuffer(b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789", dtype=np.uint8)


def _splitmix(x: np.ndarray) -> np.ndarray:
    # finaliser is a bijection, so distinct counters give distinct keys
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def generate_u64(n: int, seed: int = 0, start: int = 0) -> np.ndarray:
    """``n`` distinct pseudo-random 64-bit keys."""
    base = np.uint64((seed * 0xD1B54A32D192ED03) & ((1 << 64) - 1))
    return _splitmix(np.arange(start, start + n, dtype=np.uint64) ^ base)


def generate_strings(n: int, seed: int = 0, min_len: int = 10, max_len: int = 50) -> list[bytes]:
    """Random alphanumeric strings of uniform length in ``[min_len, max_len]``."""
    rng = np.random.default_rng(seed)
    lens = rng.integers(min_len, max_len + 1, n)
    chars = _ALPHABET[rng.integers(0, _ALPHABET.size, int(lens.sum()))].tobytes()
    ends = np.cumsum(lens)
    starts = ends - lens
    return [chars[a:b] for a, b in zip(starts.tolist(), ends.tolist())]


def parse_generate(text: str) -> tuple[KeyKind, int]:
    """``u64:N`` or ``str:N``."""
    kind, _, count = text.partition(":")
    try:
        n = int(float(count)) if "e" in count.lower() else int(count)
    except ValueError:
        raise ValueError(f"bad --generate value {text!r}") from None
    if kind == "u64":
        return KeyKind.U64, n
    if kind == "str":
        return KeyKind.BYTES, n
    raise ValueError(f"bad --generate kind {kind!r}; expected u64 or str")


def generate(text: str, seed: int = 0):
    kind, n = parse_generate(text)
    return generate_u64(n, seed) if kind == KeyKind.U64 else generate_strings(n, seed)


def generated_source(text: str, seed: int = 0, batch: int = 1 << 20) -> KeySource:
    """Generated corpus as a re-iterable stream; u64 batches are regenerated per pass."""
    kind, n = parse_generate(text)
    if kind == KeyKind.U64:
        return KeySource(
            lambda: (generate_u64(min(batch, n - i), seed, i) for i in range(0, n, batch)), n, kind
        )
    return KeySource.from_keys(generate_strings(n, seed), batch)


def read_lines(path) -> list[bytes]:
    with open(path, "rb") as f:
        data = f.read()
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return [l[:-1] if l.endswith(b"\r") else l for l in lines]


def read_keys(path, kind: str = "str", binary: bool = False):
    """Load a key file: one string per line, decimal u64 per line, or raw LE u64."""
    if kind == "str":
        return read_lines(path)
    if kind != "u64":
        raise ValueError(f"unknown key kind {kind!r}")
    if binary:
        return np.fromfile(path, dtype="<u8").astype(np.uint64)
    return np.array([int(l) for l in read_lines(path) if l.strip()], dtype=np.uint64)

"""Line-delimited stats records: one ``group key=value ...`` line per metric group."""

from __future__ import annotations

from pathlib import Path

from .index import MPHF
from .serde import serialize

HEADER_LINE = "# pilothash stats v1"


def space_stats(idx: MPHF) -> dict:
    b = idx.bits_per_key()
    return {
        "pilots_bits_per_key": b["pilots"],
        "remap_bits_per_key": b["remap"],
        "total_bits_per_key": b["total"],
        "pilots_bytes": idx.pilot_bytes,
        "remap_bytes": idx.remap_bytes,
        "file_bytes": len(serialize(idx)),
    }


def build_record(idx: MPHF) -> list[tuple[str, dict]]:
    s, p, st = idx.shape, idx.params, idx.stats or {}
    rec = [
        ("shape", {"n": s.n, "parts": s.parts, "slots": s.slots, "buckets": s.buckets, "total_slots": s.total_slots}),
        (
            "params",
            {
                "gamma": p.gamma.name.lower(),
                "lambda": str(p.lam),
                "alpha": str(p.alpha),
                "remap": idx.remap.kind.name.lower(),
                "reduce": p.reduce.name.lower(),
                "seed": idx.seed,
                "hash": idx.hash_alg.name.lower(),
            },
        ),
        ("space", space_stats(idx)),
    ]
    if st:
        ns = dict(st.get("ns_per_key", {}))
        con = {f"{k}_ns_per_key": round(v, 3) for k, v in ns.items()}
        con["total_ns_per_key"] = round(sum(ns.values()), 3)
        con.update(attempts=st.get("attempts", 1), evictions=st.get("evictions", 0),
                   remap_fallback=int(bool(st.get("remap_fallback", False))))
        for k in ("shards", "shard_strategy", "key_passes", "peak_disk_bytes"):
            if k in st:
                con[k] = st[k]
        rec.append(("construction", con))
        sizes = st.get("size_hist", [])
        rec.append(("bucket_sizes", {str(i): c for i, c in enumerate(sizes) if c}))
        hist = st.get("evict_hist", [])
        placed = sum(sizes[1:])
        if hist and placed:
            per_bin = placed / len(hist)
            rec.append(("evictions_by_percentile", {str(i): round(c / per_bin, 6) for i, c in enumerate(hist)}))
    return rec


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v).replace(" ", "_")


def dumps(record: list[tuple[str, dict]]) -> str:
    lines = [HEADER_LINE]
    for group, kv in record:
        lines.append(" ".join([group] + [f"{k}={_fmt(v)}" for k, v in kv.items()]))
    return "\n".join(lines) + "\n"


def _value(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def loads(text: str) -> list[tuple[str, dict]]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        group, *pairs = line.split()
        kv = {}
        for pair in pairs:
            k, sep, v = pair.partition("=")
            if not sep:
                raise ValueError(f"malformed stats field {pair!r}")
            kv[k] = _value(v)
        out.append((group, kv))
    return out


def write(path, record) -> None:
    Path(path).write_text(dumps(record))


def read(path) -> list[tuple[str, dict]]:
    return loads(Path(path).read_text())


def group(record, name: str) -> dict:
    for g, kv in record:
        if g == name:
            return kv
    raise KeyError(name)

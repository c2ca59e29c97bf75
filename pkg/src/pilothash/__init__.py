"""Minimal perfect hashing with fixed-width 8-bit pilots, hash-evict
construction, a single compact remap table and streaming queries."""

from .construct import build
from .errors import (
    BuildFailed,
    DuplicateHashes,
    DuplicateKeys,
    FormatError,
    PartFailed,
    PartOversubscribed,
    PilotHashError,
    RangeTooWide,
    ValueTooLarge,
)
from .index import MPHF, KeyKind
from .params import BucketFn, BuildParams, ReduceKind, RemapKind, Shape, compute_shape, keys_per_part, preset
from .query import QueryMode
from .serde import deserialize, load, save, serialize
from .sharding import KeySource, ShardPlan, build_sharded

__all__ = [
    "build", "build_sharded", "MPHF", "KeyKind", "BuildParams", "Shape", "BucketFn", "RemapKind",
    "ReduceKind", "QueryMode", "ShardPlan", "KeySource", "compute_shape", "keys_per_part", "preset",
    "serialize", "deserialize", "save", "load", "PilotHashError", "BuildFailed", "DuplicateHashes",
    "DuplicateKeys", "FormatError", "PartFailed", "PartOversubscribed", "RangeTooWide", "ValueTooLarge",
]

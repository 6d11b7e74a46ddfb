"""Synthetic indexer workloads: seeded generators and a flat binary format.

A workload bundles the raw tensors every indexer consumes for a single query
position: the prefix indexing keys, the per-head indexing queries, and the
per-head gating weights. Generation is a pure function of (seed, parameters),
so repeated calls are bit-identical and corpora can be rebuilt from seeds.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .config import IndexerConfig
from .validation import check_fraction, check_positive_int

MAGIC = b"MISAWKLD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQQQ")  # magic, version, L, d, n_heads


@dataclass(frozen=True)
class NeedleLabel:
    """Location of a planted needle: a contiguous key run aligned with one head."""

    start: int
    length: int
    aligned_head: int

    @property
    def interval(self) -> tuple[int, int]:
        """Half-open [start, stop) range of needle positions."""
        return self.start, self.start + self.length


@dataclass(frozen=True)
class IndexerWorkload:
    """Raw tensors an indexer consumes for one query position.

    keys            (prefix_len, head_dim) indexing keys for the whole prefix
    queries         (n_heads, head_dim) per-head indexing queries
    gate_weights    (n_heads,) per-head gating coefficients
    """

    keys: np.ndarray
    queries: np.ndarray
    gate_weights: np.ndarray
    seed: int
    label: NeedleLabel | None = None

    def __post_init__(self) -> None:
        keys = np.asarray(self.keys, dtype=np.float64)
        queries = np.asarray(self.queries, dtype=np.float64)
        gates = np.asarray(self.gate_weights, dtype=np.float64)
        if keys.ndim != 2 or queries.ndim != 2 or gates.ndim != 1:
            raise ValueError("keys and queries must be 2-D, gate_weights 1-D")
        if keys.shape[0] < 1:
            raise ValueError("prefix must contain at least one key")
        if queries.shape[1] != keys.shape[1]:
            raise ValueError(
                f"queries have dim {queries.shape[1]} but keys have dim {keys.shape[1]}"
            )
        if gates.shape[0] != queries.shape[0]:
            raise ValueError(
                f"gate_weights length {gates.shape[0]} does not match {queries.shape[0]} heads"
            )
        for name, arr in (("keys", keys), ("queries", queries), ("gate_weights", gates)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must contain only finite values")
            arr.setflags(write=False)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "queries", queries)
        object.__setattr__(self, "gate_weights", gates)

    @property
    def prefix_len(self) -> int:
        return int(self.keys.shape[0])

    @property
    def n_heads(self) -> int:
        return int(self.queries.shape[0])

    @property
    def head_dim(self) -> int:
        return int(self.keys.shape[1])

    def truncated(self, prefix_len: int) -> IndexerWorkload:
        """The same query against only the first ``prefix_len`` keys.

        The needle label is kept only when the needle run survives whole.
        """
        check_positive_int(prefix_len, "prefix_len")
        if prefix_len > self.prefix_len:
            raise ValueError(
                f"cannot truncate to {prefix_len}: workload has {self.prefix_len} keys"
            )
        label = self.label
        if label is not None and label.interval[1] > prefix_len:
            label = None
        return IndexerWorkload(
            keys=self.keys[:prefix_len],
            queries=self.queries,
            gate_weights=self.gate_weights,
            seed=self.seed,
            label=label,
        )


def softmax(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over a 1-D vector."""
    z = x - np.max(x)
    e = np.exp(z)
    return e / e.sum()


def gen_random_workload(
    seed: int,
    prefix_len: int,
    cfg: IndexerConfig,
    *,
    raw_gates: bool = False,
) -> IndexerWorkload:
    """Draw keys and queries i.i.d. standard normal with a seeded generator.

    Gate weights are drawn standard normal and passed through softmax so they
    are positive and sum to one; ``raw_gates=True`` skips the softmax to keep
    signed gates.
    """
    check_positive_int(prefix_len, "prefix_len")
    rng = np.random.default_rng(seed)
    keys = rng.standard_normal((prefix_len, cfg.head_dim))
    queries = rng.standard_normal((cfg.n_heads, cfg.head_dim))
    gates = rng.standard_normal(cfg.n_heads)
    if not raw_gates:
        gates = softmax(gates)
    return IndexerWorkload(keys=keys, queries=queries, gate_weights=gates, seed=int(seed))


def gen_needle_workload(
    seed: int,
    prefix_len: int,
    depth_fraction: float,
    needle_len: int,
    margin: float,
    cfg: IndexerConfig,
    *,
    noise_scale: float = 0.01,
    align_head: int | None = None,
    raw_gates: bool = False,
) -> IndexerWorkload:
    """Plant a retrievable needle run inside an otherwise random haystack.

    A contiguous run of ``needle_len`` keys starting at
    ``floor(depth_fraction * (prefix_len - needle_len))`` is set to
    ``margin`` times the unit direction of one query head, plus small noise.
    By default the run aligns with the head carrying the largest gate weight;
    ``align_head`` pins it to a specific head instead, which makes routing
    scores that ignore prefix content fail to find it.
    """
    check_positive_int(prefix_len, "prefix_len")
    check_positive_int(needle_len, "needle_len")
    check_fraction(depth_fraction, "depth_fraction")
    if needle_len > prefix_len:
        raise ValueError(f"needle_len ({needle_len}) exceeds prefix_len ({prefix_len})")
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    if noise_scale < 0:
        raise ValueError(f"noise_scale must be non-negative, got {noise_scale}")

    rng = np.random.default_rng(seed)
    keys = rng.standard_normal((prefix_len, cfg.head_dim))
    queries = rng.standard_normal((cfg.n_heads, cfg.head_dim))
    gates = rng.standard_normal(cfg.n_heads)
    if not raw_gates:
        gates = softmax(gates)

    if align_head is None:
        target = int(np.argmax(gates))
    else:
        if not (0 <= align_head < cfg.n_heads):
            raise ValueError(f"align_head must lie in [0, {cfg.n_heads}), got {align_head}")
        target = int(align_head)

    start = int(np.floor(depth_fraction * (prefix_len - needle_len)))
    direction = queries[target] / np.linalg.norm(queries[target])
    noise = noise_scale * rng.standard_normal((needle_len, cfg.head_dim))
    keys[start : start + needle_len] = margin * direction + noise

    return IndexerWorkload(
        keys=keys,
        queries=queries,
        gate_weights=gates,
        seed=int(seed),
        label=NeedleLabel(start=start, length=needle_len, aligned_head=target),
    )


def save_workload(workload: IndexerWorkload, target: str | Path | BinaryIO) -> None:
    """Write a workload in the flat binary format.

    Layout: magic ``MISAWKLD``, u32 version, then prefix_len, head_dim and
    n_heads as little-endian u64, followed by row-major little-endian float64
    for keys, queries and gate weights. Seed and label are not stored.
    """
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, workload.prefix_len, workload.head_dim, workload.n_heads
    )
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes()
        for a in (workload.keys, workload.queries, workload.gate_weights)
    )
    if hasattr(target, "write"):
        target.write(header + payload)
    else:
        Path(target).write_bytes(header + payload)


def load_workload(source: str | Path | BinaryIO) -> IndexerWorkload:
    """Read a workload written by :func:`save_workload`.

    The format carries tensors only, so the loaded workload has seed 0 and no
    needle label.
    """
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = Path(source).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("workload file too short for header")
    magic, version, prefix_len, head_dim, n_heads = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported workload format version {version}")
    counts = (prefix_len * head_dim, n_heads * head_dim, n_heads)
    expected = _HEADER.size + 8 * sum(counts)
    if len(raw) != expected:
        raise ValueError(f"workload file has {len(raw)} bytes, expected {expected}")
    offset = _HEADER.size
    arrays = []
    for count in counts:
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).copy())
        offset += 8 * count
    keys, queries, gates = arrays
    return IndexerWorkload(
        keys=keys.reshape(prefix_len, head_dim),
        queries=queries.reshape(n_heads, head_dim),
        gate_weights=gates,
        seed=0,
    )

"""Shared corpus builders and tiny workload fixtures for the test suite."""

from __future__ import annotations

import numpy as np

from misa import IndexerConfig, IndexerWorkload, gen_random_workload

#: Cycled head counts for the mixed random corpus.
CORPUS_HEAD_COUNTS = (4, 16, 64)


def make_workload(keys, queries, gate_weights, seed=0, label=None) -> IndexerWorkload:
    return IndexerWorkload(
        keys=np.asarray(keys, dtype=float),
        queries=np.asarray(queries, dtype=float),
        gate_weights=np.asarray(gate_weights, dtype=float),
        seed=seed,
        label=label,
    )


def two_head_workload() -> IndexerWorkload:
    """Two heads with axis-aligned queries so per-head dots are [[4, -2], [0, 6]]."""
    return make_workload(
        keys=[[4.0, 0.0], [-2.0, 6.0]],
        queries=[[1.0, 0.0], [0.0, 1.0]],
        gate_weights=[0.5, 0.5],
    )


def mixed_random_corpus(count: int, *, base_seed: int = 0, min_len: int = 64, max_len: int = 4096):
    """Seeded random workloads with varied lengths and head counts.

    Yields (workload, cfg) pairs; lengths are drawn once from a fixed
    generator so the corpus is the same on every run.
    """
    length_rng = np.random.default_rng(base_seed + 991)
    lengths = length_rng.integers(min_len, max_len + 1, size=count)
    for i in range(count):
        n_heads = CORPUS_HEAD_COUNTS[i % len(CORPUS_HEAD_COUNTS)]
        cfg = IndexerConfig(n_heads=n_heads, active_heads_h=min(8, n_heads))
        yield gen_random_workload(base_seed + i, int(lengths[i]), cfg), cfg


def corpus_budget(prefix_len: int, index: int) -> int:
    """Deterministic per-workload token budget cycling over useful regimes."""
    choices = (
        max(1, prefix_len // 8),
        max(1, prefix_len // 4),
        max(1, prefix_len // 2),
        min(2048, prefix_len),
    )
    return choices[index % len(choices)]

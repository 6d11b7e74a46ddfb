"""Contiguous block partition of the prefix with mean-pooled representative keys."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_positive_int


@dataclass(frozen=True)
class BlockSummary:
    """Block partition of a prefix plus one mean-pooled key per block.

    Blocks tile [0, prefix_len) contiguously; every block has ``block_size``
    keys except possibly the last. ``boundaries`` holds per-block
    [start, end) pairs.
    """

    block_size: int
    boundaries: np.ndarray
    pooled_keys: np.ndarray

    def __post_init__(self) -> None:
        check_positive_int(self.block_size, "block_size")
        bounds = np.asarray(self.boundaries, dtype=np.int64).reshape(-1, 2)
        pooled = np.asarray(self.pooled_keys, dtype=np.float64)
        if pooled.ndim != 2 or pooled.shape[0] != bounds.shape[0]:
            raise ValueError("pooled_keys must hold one row per block")
        if bounds.shape[0]:
            starts, ends = bounds[:, 0], bounds[:, 1]
            if starts[0] != 0 or np.any(starts[1:] != ends[:-1]) or np.any(ends <= starts):
                raise ValueError("blocks must tile the prefix contiguously")
            lengths = ends - starts
            if np.any(lengths[:-1] != self.block_size) or lengths[-1] > self.block_size:
                raise ValueError("all blocks must have block_size keys except a shorter last block")
        bounds.setflags(write=False)
        pooled.setflags(write=False)
        object.__setattr__(self, "boundaries", bounds)
        object.__setattr__(self, "pooled_keys", pooled)

    @property
    def n_blocks(self) -> int:
        return int(self.boundaries.shape[0])

    @property
    def prefix_len(self) -> int:
        return int(self.boundaries[-1, 1]) if self.n_blocks else 0

    def block_tokens(self, block: int) -> np.ndarray:
        """Token indices covered by one block."""
        start, end = self.boundaries[block]
        return np.arange(start, end, dtype=np.int64)


def build_block_summary(keys: np.ndarray, block_size: int) -> BlockSummary:
    """Partition keys into size-``block_size`` blocks and mean-pool each one.

    The trailing partial block is pooled over its actual length. An empty key
    matrix yields an empty summary, which is the base case for incremental
    appends.
    """
    check_positive_int(block_size, "block_size")
    keys = np.asarray(keys, dtype=np.float64)
    if keys.ndim != 2:
        raise ValueError("keys must be a 2-D matrix")
    prefix_len, head_dim = keys.shape
    if prefix_len == 0:
        return BlockSummary(
            block_size=block_size,
            boundaries=np.empty((0, 2), dtype=np.int64),
            pooled_keys=np.empty((0, head_dim), dtype=np.float64),
        )
    n_blocks = -(-prefix_len // block_size)
    starts = np.arange(n_blocks, dtype=np.int64) * block_size
    ends = np.minimum(starts + block_size, prefix_len)
    sums = np.add.reduceat(keys, starts, axis=0)
    pooled = sums / (ends - starts)[:, None]
    return BlockSummary(
        block_size=block_size,
        boundaries=np.stack([starts, ends], axis=1),
        pooled_keys=pooled,
    )


def incremental_append(summary: BlockSummary, new_key: np.ndarray) -> BlockSummary:
    """Summary for the prefix grown by one key, without a full rebuild.

    The last block's pooled key is updated by running mean; a new block opens
    when the last one is already full. Matches ``build_block_summary`` on the
    grown prefix to within accumulation error.
    """
    new_key = np.asarray(new_key, dtype=np.float64).reshape(-1)
    if summary.n_blocks and new_key.shape[0] != summary.pooled_keys.shape[1]:
        raise ValueError(
            f"new key has dim {new_key.shape[0]}, summary has dim {summary.pooled_keys.shape[1]}"
        )
    bounds = summary.boundaries
    pooled = summary.pooled_keys
    if summary.n_blocks == 0:
        bounds = np.array([[0, 1]], dtype=np.int64)
        pooled = new_key[None, :].copy()
    else:
        start, end = bounds[-1]
        length = int(end - start)
        if length < summary.block_size:
            pooled = pooled.copy()
            pooled[-1] = pooled[-1] + (new_key - pooled[-1]) / (length + 1)
            bounds = bounds.copy()
            bounds[-1, 1] = end + 1
        else:
            bounds = np.vstack([bounds, [[end, end + 1]]])
            pooled = np.vstack([pooled, new_key[None, :]])
    return BlockSummary(block_size=summary.block_size, boundaries=bounds, pooled_keys=pooled)

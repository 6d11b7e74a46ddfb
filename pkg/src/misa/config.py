"""Shared configuration for the indexer family."""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

REFERENCE64 = "reference64"
FAST32 = "fast32"
PRECISION_MODES = (REFERENCE64, FAST32)

BLOCK_ATTENTION = "block_attention"
GATE_ONLY = "gate_only"
QUERY_NORM = "query_norm"
ROUTER_SCORE_KINDS = (BLOCK_ATTENTION, GATE_ONLY, QUERY_NORM)

#: Default block size for the head router's pooled partition.
ROUTER_BLOCK_SIZE = 1024
#: Default block size for the block-level baselines (block-sparse, HISA).
BASELINE_BLOCK_SIZE = 128


def dtype_for(precision_mode: str) -> np.dtype:
    """Accumulation dtype for a precision mode."""
    if precision_mode == REFERENCE64:
        return np.dtype(np.float64)
    if precision_mode == FAST32:
        return np.dtype(np.float32)
    raise ValueError(f"unknown precision_mode {precision_mode!r}, expected one of {PRECISION_MODES}")


@dataclass(frozen=True)
class IndexerConfig:
    """Hyperparameters shared by every indexer in the family.

    ``block_size`` defaults to the router partition (1024); the block-level
    baselines conventionally run with ``BASELINE_BLOCK_SIZE`` (128) instead.
    ``hisa_block_m`` left as None resolves to ``2 * ceil(budget_k / B)`` for
    whatever partition the caller is using.
    """

    n_heads: int = 64
    head_dim: int = 64
    budget_k: int = 2048
    block_size: int = ROUTER_BLOCK_SIZE
    active_heads_h: int = 8
    candidate_kprime: int = 8192
    hisa_block_m: int | None = None
    precision_mode: str = REFERENCE64

    def __post_init__(self) -> None:
        for name in ("n_heads", "head_dim", "budget_k", "block_size", "active_heads_h", "candidate_kprime"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.active_heads_h > self.n_heads:
            raise ValueError(
                f"active_heads_h ({self.active_heads_h}) must not exceed n_heads ({self.n_heads})"
            )
        if self.candidate_kprime < self.budget_k:
            raise ValueError(
                f"candidate_kprime ({self.candidate_kprime}) must be >= budget_k ({self.budget_k})"
            )
        if self.hisa_block_m is not None and (not isinstance(self.hisa_block_m, int) or self.hisa_block_m < 1):
            raise ValueError(f"hisa_block_m must be a positive integer or None, got {self.hisa_block_m!r}")
        if self.precision_mode not in PRECISION_MODES:
            raise ValueError(
                f"precision_mode must be one of {PRECISION_MODES}, got {self.precision_mode!r}"
            )

    @property
    def dtype(self) -> np.dtype:
        return dtype_for(self.precision_mode)

    def resolved_hisa_m(self, block_size: int | None = None) -> int:
        """Stage-1 block count for HISA; defaults to twice the block budget."""
        if self.hisa_block_m is not None:
            return self.hisa_block_m
        size = self.block_size if block_size is None else block_size
        return 2 * ceil(self.budget_k / size)

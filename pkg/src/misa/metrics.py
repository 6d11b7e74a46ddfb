"""Agreement and retrieval metrics for comparing token selections."""

from __future__ import annotations

import numpy as np

from .types import CostLedger, TokenSelection


def _check_same_prefix(a: TokenSelection, b: TokenSelection) -> None:
    if a.prefix_len != b.prefix_len:
        raise ValueError(
            f"selections cover different prefixes ({a.prefix_len} vs {b.prefix_len})"
        )


def iou(a: TokenSelection, b: TokenSelection) -> float:
    """Intersection over union of two selections; 1.0 when both are empty."""
    _check_same_prefix(a, b)
    if len(a) == 0 and len(b) == 0:
        return 1.0
    inter = int(np.intersect1d(a.indices, b.indices, assume_unique=True).size)
    union = len(a) + len(b) - inter
    return inter / union


def needle_recall(selection: TokenSelection, needle_range: tuple[int, int]) -> float:
    """Fraction of the needle's positions present in the selection."""
    start, stop = int(needle_range[0]), int(needle_range[1])
    if not (0 <= start < stop <= selection.prefix_len):
        raise ValueError(
            f"needle range [{start}, {stop}) must be a non-empty interval within the prefix"
        )
    lo = int(np.searchsorted(selection.indices, start, side="left"))
    hi = int(np.searchsorted(selection.indices, stop, side="left"))
    return (hi - lo) / (stop - start)


def candidate_recall(omega: TokenSelection, reference: TokenSelection) -> float:
    """Fraction of reference tokens contained in a candidate pool; 1.0 for an empty reference."""
    _check_same_prefix(omega, reference)
    if len(reference) == 0:
        return 1.0
    inter = int(np.intersect1d(omega.indices, reference.indices, assume_unique=True).size)
    return inter / len(reference)


def cost_ratio(ledger: CostLedger, baseline: CostLedger) -> float:
    """How many times cheaper a ledger is than the baseline, in total dot products."""
    total = ledger.total()
    if total == 0:
        raise ValueError("cannot form a cost ratio against a ledger with zero dot products")
    return baseline.total() / total

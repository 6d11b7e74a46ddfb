"""Result types shared by every indexer: selections, head sets, scores, cost ledgers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCORE_AXES = ("token", "block", "head")

#: Cost kinds tracked by the ledger. ``token`` counts head-token products over
#: the full prefix, ``block`` counts head-block products against pooled keys,
#: ``refine`` counts head-candidate products in a second scoring stage.
COST_KINDS = ("token", "block", "refine")


def _frozen_index_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size > 1 and not np.all(arr[1:] > arr[:-1]):
        raise ValueError(f"{name} must be strictly increasing (sorted, no duplicates)")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScoreVector:
    """Scores along one axis: per token, per block, or per head."""

    values: np.ndarray
    axis: str

    def __post_init__(self) -> None:
        if self.axis not in SCORE_AXES:
            raise ValueError(f"axis must be one of {SCORE_AXES}, got {self.axis!r}")
        arr = np.asarray(self.values)
        if arr.ndim != 1:
            raise ValueError("score values must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("score values must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class TokenSelection:
    """A sorted set of selected token indices for one query position.

    ``budget`` is the k the selection was produced under. On the normal path
    the selection holds exactly ``min(budget, prefix_len)`` indices; candidate
    pools that cannot cover the budget may hold fewer (see the selector's
    ``under_budget`` flag).
    """

    indices: np.ndarray
    budget: int
    prefix_len: int

    def __post_init__(self) -> None:
        arr = _frozen_index_array(self.indices, "indices")
        if self.budget < 1:
            raise ValueError(f"budget must be positive, got {self.budget}")
        if self.prefix_len < 0:
            raise ValueError(f"prefix_len must be non-negative, got {self.prefix_len}")
        if arr.size:
            if arr[0] < 0 or arr[-1] >= self.prefix_len:
                raise ValueError("indices must lie in [0, prefix_len)")
        if arr.size > min(self.budget, self.prefix_len):
            raise ValueError("selection holds more indices than min(budget, prefix_len)")
        object.__setattr__(self, "indices", arr)

    def __len__(self) -> int:
        return int(self.indices.shape[0])

    def __contains__(self, token: int) -> bool:
        pos = int(np.searchsorted(self.indices, token))
        return pos < len(self) and int(self.indices[pos]) == int(token)


@dataclass(frozen=True)
class HeadSet:
    """The sorted set of active indexer heads chosen by the router."""

    head_indices: np.ndarray
    n_heads: int

    def __post_init__(self) -> None:
        arr = _frozen_index_array(self.head_indices, "head_indices")
        if self.n_heads < 1:
            raise ValueError(f"n_heads must be positive, got {self.n_heads}")
        if arr.size and (arr[0] < 0 or arr[-1] >= self.n_heads):
            raise ValueError("head indices must lie in [0, n_heads)")
        object.__setattr__(self, "head_indices", arr)

    def __len__(self) -> int:
        return int(self.head_indices.shape[0])


@dataclass(frozen=True)
class CostEntry:
    """One instrumented stage: how many dot products of which kind it performed."""

    stage: str
    kind: str
    count: int

    def __post_init__(self) -> None:
        if self.kind not in COST_KINDS:
            raise ValueError(f"kind must be one of {COST_KINDS}, got {self.kind!r}")
        if self.count < 0:
            raise ValueError(f"count must be non-negative, got {self.count}")


@dataclass(frozen=True)
class CostLedger:
    """Exact per-stage counts of head-token and head-block dot products."""

    entries: tuple[CostEntry, ...] = ()

    def _sum(self, kind: str) -> int:
        return sum(e.count for e in self.entries if e.kind == kind)

    @property
    def token_dot_products(self) -> int:
        return self._sum("token")

    @property
    def block_dot_products(self) -> int:
        return self._sum("block")

    @property
    def refine_dot_products(self) -> int:
        return self._sum("refine")

    @property
    def stage_labels(self) -> tuple[str, ...]:
        return tuple(e.stage for e in self.entries)

    def total(self) -> int:
        return sum(e.count for e in self.entries)


@dataclass(frozen=True)
class SelectionResult:
    """Everything a selector produced: the selection, its cost, and any extras.

    ``heads`` is set by the routed indexers, ``candidates`` holds the coarse
    candidate pool of the two-stage methods, and ``under_budget`` flags a
    candidate pool too small to cover the token budget.
    """

    selection: TokenSelection
    ledger: CostLedger
    heads: HeadSet | None = None
    candidates: TokenSelection | None = None
    under_budget: bool = False

"""Scikit-learn style estimators wrapping the indexer family.

Each indexer is a stateless transformer: ``fit`` only validates parameters,
``select`` maps one workload to a :class:`~misa.types.SelectionResult`, and
``transform`` returns the bare selected-index array. Parameters follow the
scikit-learn convention (stored verbatim in ``__init__``, introspectable via
``get_params``), so the estimators compose with ``clone`` and grid utilities.
"""

from __future__ import annotations

from math import ceil

import numpy as np
from sklearn.base import BaseEstimator

from .baselines import block_sparse_select, hisa_select
from .config import (
    BASELINE_BLOCK_SIZE,
    BLOCK_ATTENTION,
    PRECISION_MODES,
    REFERENCE64,
    ROUTER_BLOCK_SIZE,
    ROUTER_SCORE_KINDS,
    IndexerConfig,
)
from .dsa import dsa_select
from .pooling import build_block_summary
from .routing import misa_hier_select, misa_select
from .types import SelectionResult
from .validation import check_choice, check_positive_int
from .workload import IndexerWorkload


class BaseTokenIndexer(BaseEstimator):
    """Common surface for the token-selection estimators."""

    method = "base"

    def fit(self, X=None, y=None):
        """No-op fit that validates parameters; present for pipeline compatibility."""
        self._check_params()
        return self

    def _check_params(self) -> None:
        check_positive_int(self.budget_k, "budget_k")
        check_choice(self.precision_mode, PRECISION_MODES, "precision_mode")

    def select(self, workload: IndexerWorkload) -> SelectionResult:
        raise NotImplementedError

    def transform(self, workload: IndexerWorkload) -> np.ndarray:
        """Selected token indices for one workload, sorted ascending."""
        return self.select(workload).selection.indices


class DSAIndexer(BaseTokenIndexer):
    """Dense reference indexer: every head scores every prefix token."""

    method = "dsa"

    def __init__(self, budget_k: int = 2048, precision_mode: str = REFERENCE64):
        self.budget_k = budget_k
        self.precision_mode = precision_mode

    def select(self, workload: IndexerWorkload) -> SelectionResult:
        self._check_params()
        return dsa_select(workload, self.budget_k, precision=self.precision_mode)


class BlockSparseIndexer(BaseTokenIndexer):
    """Whole-block selector: keeps the highest-affinity blocks under the budget."""

    method = "block_sparse"

    def __init__(
        self,
        budget_k: int = 2048,
        block_size: int = BASELINE_BLOCK_SIZE,
        precision_mode: str = REFERENCE64,
    ):
        self.budget_k = budget_k
        self.block_size = block_size
        self.precision_mode = precision_mode

    def _check_params(self) -> None:
        super()._check_params()
        check_positive_int(self.block_size, "block_size")

    def select(self, workload: IndexerWorkload) -> SelectionResult:
        self._check_params()
        summary = build_block_summary(workload.keys, self.block_size)
        return block_sparse_select(
            workload, summary, self.budget_k, precision=self.precision_mode
        )


class HISAIndexer(BaseTokenIndexer):
    """Two-stage block-to-token indexer: block filter, then dense re-rank.

    ``block_top_m`` left as None resolves to twice the number of blocks the
    budget spans, ``2 * ceil(budget_k / block_size)``.
    """

    method = "hisa"

    def __init__(
        self,
        budget_k: int = 2048,
        block_size: int = BASELINE_BLOCK_SIZE,
        block_top_m: int | None = None,
        precision_mode: str = REFERENCE64,
    ):
        self.budget_k = budget_k
        self.block_size = block_size
        self.block_top_m = block_top_m
        self.precision_mode = precision_mode

    def _check_params(self) -> None:
        super()._check_params()
        check_positive_int(self.block_size, "block_size")
        if self.block_top_m is not None:
            check_positive_int(self.block_top_m, "block_top_m")

    def resolved_m(self) -> int:
        if self.block_top_m is not None:
            return self.block_top_m
        return 2 * ceil(self.budget_k / self.block_size)

    def select(self, workload: IndexerWorkload) -> SelectionResult:
        self._check_params()
        summary = build_block_summary(workload.keys, self.block_size)
        return hisa_select(
            workload, summary, self.resolved_m(), self.budget_k, precision=self.precision_mode
        )


class _RoutedIndexer(BaseTokenIndexer):
    """Shared plumbing for the head-routed indexers."""

    def _check_params(self) -> None:
        super()._check_params()
        check_positive_int(self.active_heads_h, "active_heads_h")
        check_positive_int(self.block_size, "block_size")
        check_choice(self.router_score, ROUTER_SCORE_KINDS, "router_score")

    def _config_for(self, workload: IndexerWorkload) -> IndexerConfig:
        # The head budget saturates at the workload's head count, mirroring
        # the router's min(h, n_heads) selection rule. Single-stage routing
        # never reads candidate_kprime; any value >= budget_k keeps the
        # config valid.
        kprime = getattr(self, "candidate_kprime", None)
        if kprime is None:
            kprime = 4 * self.budget_k
        return IndexerConfig(
            n_heads=workload.n_heads,
            head_dim=workload.head_dim,
            budget_k=self.budget_k,
            block_size=self.block_size,
            active_heads_h=min(self.active_heads_h, workload.n_heads),
            candidate_kprime=kprime,
            precision_mode=self.precision_mode,
        )


class MISAIndexer(_RoutedIndexer):
    """Single-stage routed indexer: top-h heads scan the full prefix."""

    method = "misa"

    def __init__(
        self,
        budget_k: int = 2048,
        active_heads_h: int = 8,
        block_size: int = ROUTER_BLOCK_SIZE,
        router_score: str = BLOCK_ATTENTION,
        precision_mode: str = REFERENCE64,
    ):
        self.budget_k = budget_k
        self.active_heads_h = active_heads_h
        self.block_size = block_size
        self.router_score = router_score
        self.precision_mode = precision_mode

    def select(self, workload: IndexerWorkload) -> SelectionResult:
        self._check_params()
        summary = build_block_summary(workload.keys, self.block_size)
        return misa_select(workload, summary, self._config_for(workload), self.router_score)


class HierarchicalMISAIndexer(_RoutedIndexer):
    """Two-stage routed indexer: routed coarse pass, dense re-rank of top-k' candidates."""

    method = "misa_hier"

    def __init__(
        self,
        budget_k: int = 2048,
        active_heads_h: int = 8,
        block_size: int = ROUTER_BLOCK_SIZE,
        candidate_kprime: int = 8192,
        router_score: str = BLOCK_ATTENTION,
        precision_mode: str = REFERENCE64,
    ):
        self.budget_k = budget_k
        self.active_heads_h = active_heads_h
        self.block_size = block_size
        self.candidate_kprime = candidate_kprime
        self.router_score = router_score
        self.precision_mode = precision_mode

    def _check_params(self) -> None:
        super()._check_params()
        check_positive_int(self.candidate_kprime, "candidate_kprime")
        if self.candidate_kprime < self.budget_k:
            raise ValueError(
                f"candidate_kprime ({self.candidate_kprime}) must be >= budget_k ({self.budget_k})"
            )

    def select(self, workload: IndexerWorkload) -> SelectionResult:
        self._check_params()
        summary = build_block_summary(workload.keys, self.block_size)
        return misa_hier_select(
            workload, summary, self._config_for(workload), self.router_score
        )


INDEXER_REGISTRY: dict[str, type[BaseTokenIndexer]] = {
    cls.method: cls
    for cls in (DSAIndexer, BlockSparseIndexer, HISAIndexer, MISAIndexer, HierarchicalMISAIndexer)
}

METHODS = tuple(INDEXER_REGISTRY)


def make_indexer(method: str, **params) -> BaseTokenIndexer:
    """Instantiate an indexer by its method name, e.g. ``make_indexer("misa", budget_k=256)``."""
    check_choice(method, METHODS, "method")
    return INDEXER_REGISTRY[method](**params)

"""Mixture-of-experts head routing over block-pooled keys, plus the routed selectors.

A lightweight router scores every head against the pooled block keys and keeps
only the top-h heads for the heavy token-level scan. The hierarchical variant
uses the routed scan to retain an enlarged candidate set and re-ranks it with
all heads to recover the dense selection almost exactly.
"""

from __future__ import annotations

import numpy as np

from .config import (
    BLOCK_ATTENTION,
    GATE_ONLY,
    QUERY_NORM,
    ROUTER_SCORE_KINDS,
    REFERENCE64,
    IndexerConfig,
    dtype_for,
)
from .dsa import dsa_rescore, gated_relu_scores, relevance_dots, topk_tokens
from .pooling import BlockSummary
from .types import CostEntry, CostLedger, HeadSet, ScoreVector, SelectionResult
from .validation import check_choice
from .workload import IndexerWorkload


def _check_router_inputs(workload: IndexerWorkload, summary: BlockSummary) -> None:
    if summary.prefix_len != workload.prefix_len:
        raise ValueError(
            f"summary covers {summary.prefix_len} keys but workload has {workload.prefix_len}"
        )
    if summary.n_blocks and summary.pooled_keys.shape[1] != workload.head_dim:
        raise ValueError("summary key dimension does not match workload")


def route_head_importance(
    workload: IndexerWorkload,
    summary: BlockSummary,
    kind: str = BLOCK_ATTENTION,
    *,
    precision: str = REFERENCE64,
) -> ScoreVector:
    """Per-head importance estimate used to pick the active heads.

    block_attention   mean over blocks of |gate * ReLU(query . pooled_key)|,
                      the only variant that consults prefix content
    gate_only         the gating weight itself
    query_norm        the L2 norm of the head's query
    """
    check_choice(kind, ROUTER_SCORE_KINDS, "kind")
    if kind == GATE_ONLY:
        values = workload.gate_weights.astype(np.float64)
    elif kind == QUERY_NORM:
        values = np.linalg.norm(workload.queries, axis=1)
    else:
        _check_router_inputs(workload, summary)
        affinity = relevance_dots(summary.pooled_keys, workload.queries, dtype_for(precision))
        np.maximum(affinity, 0, out=affinity)
        affinity *= workload.gate_weights[:, None]
        np.abs(affinity, out=affinity)
        values = affinity.mean(axis=1)
    return ScoreVector(values=values, axis="head")


def route_topk_heads(importance: ScoreVector | np.ndarray, h: int) -> HeadSet:
    """The min(h, n_heads) most important heads, ties to the smaller index."""
    if h < 1:
        raise ValueError(f"h must be positive, got {h}")
    values = importance.values if isinstance(importance, ScoreVector) else np.asarray(importance)
    n_heads = int(values.shape[0])
    order = np.argsort(-values, kind="stable")
    chosen = np.sort(order[: min(h, n_heads)])
    return HeadSet(head_indices=chosen, n_heads=n_heads)


def misa_score(
    workload: IndexerWorkload, heads: HeadSet, *, precision: str = REFERENCE64
) -> ScoreVector:
    """Per-token scores using only the active heads.

    With all heads active this degenerates to the dense score, bit for bit in
    a given precision mode.
    """
    if len(heads) == 0:
        raise ValueError("head set must contain at least one active head")
    if heads.n_heads != workload.n_heads:
        raise ValueError(
            f"head set is over {heads.n_heads} heads but workload has {workload.n_heads}"
        )
    idx = heads.head_indices
    values = gated_relu_scores(
        workload.keys,
        workload.queries[idx],
        workload.gate_weights[idx],
        dtype_for(precision),
    )
    return ScoreVector(values=values, axis="token")


def _route(
    workload: IndexerWorkload,
    summary: BlockSummary,
    cfg: IndexerConfig,
    kind: str,
) -> tuple[HeadSet, tuple[CostEntry, ...]]:
    importance = route_head_importance(
        workload, summary, kind, precision=cfg.precision_mode
    )
    heads = route_topk_heads(importance, cfg.active_heads_h)
    # Only the block-attention router touches pooled keys; the content-blind
    # variants perform no dot products.
    if kind == BLOCK_ATTENTION:
        entries = (
            CostEntry(stage="router", kind="block", count=workload.n_heads * summary.n_blocks),
        )
    else:
        entries = ()
    return heads, entries


def misa_select(
    workload: IndexerWorkload,
    summary: BlockSummary,
    cfg: IndexerConfig,
    kind: str = BLOCK_ATTENTION,
) -> SelectionResult:
    """Single-stage routed selection: route top-h heads, scan tokens with them."""
    heads, entries = _route(workload, summary, cfg, kind)
    scores = misa_score(workload, heads, precision=cfg.precision_mode)
    selection = topk_tokens(scores, cfg.budget_k)
    ledger = CostLedger(
        entries=entries
        + (
            CostEntry(
                stage="token_scan", kind="token", count=len(heads) * workload.prefix_len
            ),
        )
    )
    return SelectionResult(selection=selection, ledger=ledger, heads=heads)


def misa_hier_select(
    workload: IndexerWorkload,
    summary: BlockSummary,
    cfg: IndexerConfig,
    kind: str = BLOCK_ATTENTION,
) -> SelectionResult:
    """Two-stage routed selection: routed coarse pass, dense re-rank of candidates.

    The coarse pass keeps the top-k' tokens by routed score; the fine pass
    re-scores exactly those candidates with all heads and keeps the final
    top-k. Every dense-top-k token that survives into the candidate set is
    therefore guaranteed to appear in the final selection.
    """
    heads, entries = _route(workload, summary, cfg, kind)
    coarse = misa_score(workload, heads, precision=cfg.precision_mode)
    candidates = topk_tokens(coarse, cfg.candidate_kprime)
    selection, refine_count = dsa_rescore(
        workload, candidates.indices, cfg.budget_k, precision=cfg.precision_mode
    )
    ledger = CostLedger(
        entries=entries
        + (
            CostEntry(
                stage="token_scan", kind="token", count=len(heads) * workload.prefix_len
            ),
            CostEntry(stage="refine", kind="refine", count=refine_count),
        )
    )
    return SelectionResult(
        selection=selection, ledger=ledger, heads=heads, candidates=candidates
    )

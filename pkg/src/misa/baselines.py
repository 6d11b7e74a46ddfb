"""Block-level comparison baselines: whole-block selection and two-stage block search."""

from __future__ import annotations

import numpy as np

from .config import REFERENCE64, dtype_for
from .dsa import dsa_rescore, gated_relu_scores
from .pooling import BlockSummary
from .types import CostEntry, CostLedger, ScoreVector, SelectionResult, TokenSelection
from .validation import check_positive_int
from .workload import IndexerWorkload


def block_scores(
    workload: IndexerWorkload, summary: BlockSummary, *, precision: str = REFERENCE64
) -> ScoreVector:
    """Gate-weighted ReLU affinity of every pooled block key, summed over heads."""
    if summary.prefix_len != workload.prefix_len:
        raise ValueError(
            f"summary covers {summary.prefix_len} keys but workload has {workload.prefix_len}"
        )
    values = gated_relu_scores(
        summary.pooled_keys, workload.queries, workload.gate_weights, dtype_for(precision)
    )
    return ScoreVector(values=values, axis="block")


def _blocks_by_score(values: np.ndarray) -> np.ndarray:
    """Block indices ordered by score descending, ties to the smaller index."""
    return np.argsort(-values, kind="stable")


def block_sparse_select(
    workload: IndexerWorkload,
    summary: BlockSummary,
    k: int,
    *,
    precision: str = REFERENCE64,
) -> SelectionResult:
    """Whole-block selection: keep the highest-scoring blocks up to the token budget.

    Blocks are retained in score order until they cover min(k, L) tokens; if
    the last retained block overshoots the budget, its tokens are trimmed by
    their dense per-token score (highest kept, ties to the smaller index) so
    every method works under the same budget.
    """
    check_positive_int(k, "k")
    scores = block_scores(workload, summary, precision=precision)
    order = _blocks_by_score(scores.values)
    target = min(k, workload.prefix_len)

    retained: list[int] = []
    covered = 0
    for block in order:
        retained.append(int(block))
        start, end = summary.boundaries[block]
        covered += int(end - start)
        if covered >= target:
            break

    entries = [
        CostEntry(stage="block_scan", kind="block", count=workload.n_heads * summary.n_blocks)
    ]
    pieces = [summary.block_tokens(b) for b in retained[:-1]]
    last_tokens = summary.block_tokens(retained[-1])
    overshoot = covered - target
    if overshoot > 0:
        keep = int(last_tokens.shape[0]) - overshoot
        trimmed, trim_count = dsa_rescore(workload, last_tokens, keep, precision=precision)
        pieces.append(trimmed.indices)
        entries.append(CostEntry(stage="block_trim", kind="refine", count=trim_count))
    else:
        pieces.append(last_tokens)

    indices = np.sort(np.concatenate(pieces))
    selection = TokenSelection(indices=indices, budget=k, prefix_len=workload.prefix_len)
    return SelectionResult(selection=selection, ledger=CostLedger(entries=tuple(entries)))


def _force_include(ranked: np.ndarray, m: int, n_blocks: int) -> np.ndarray:
    """Candidate blocks: top-m by score with first and last blocks forced in.

    A forced block that was not already selected replaces the lowest-ranked
    non-forced member so the candidate count stays fixed; when m cannot hold
    both forced blocks the candidate set is exactly the forced pair.
    """
    forced = [0] if n_blocks == 1 else [0, n_blocks - 1]
    chosen = list(ranked[: min(m, n_blocks)])
    for block in forced:
        if block in chosen:
            continue
        replaced = False
        for pos in range(len(chosen) - 1, -1, -1):
            if chosen[pos] not in forced:
                chosen[pos] = block
                replaced = True
                break
        if not replaced:
            chosen.append(block)
    return np.sort(np.asarray(chosen, dtype=np.int64))


def hisa_select(
    workload: IndexerWorkload,
    summary: BlockSummary,
    m: int,
    k: int,
    *,
    precision: str = REFERENCE64,
) -> SelectionResult:
    """Two-stage block-to-token search.

    Stage one scores pooled block keys with all heads and keeps the top-m
    blocks, always including the first block (attention sink) and the last
    block (local context). Stage two re-scores the tokens of the kept blocks
    densely and selects the final top-k. When the kept blocks cannot cover
    the budget the whole candidate pool is returned and flagged.
    """
    check_positive_int(m, "m")
    check_positive_int(k, "k")
    scores = block_scores(workload, summary, precision=precision)
    ranked = _blocks_by_score(scores.values)
    chosen = _force_include(ranked, m, summary.n_blocks)

    omega = np.concatenate([summary.block_tokens(b) for b in chosen])
    omega.sort()
    candidates = TokenSelection(
        indices=omega, budget=int(omega.shape[0]), prefix_len=workload.prefix_len
    )

    selection, refine_count = dsa_rescore(workload, omega, k, precision=precision)
    ledger = CostLedger(
        entries=(
            CostEntry(stage="block_scan", kind="block", count=workload.n_heads * summary.n_blocks),
            CostEntry(stage="refine", kind="refine", count=refine_count),
        )
    )
    under_budget = int(omega.shape[0]) < min(k, workload.prefix_len)
    return SelectionResult(
        selection=selection,
        ledger=ledger,
        candidates=candidates,
        under_budget=under_budget,
    )

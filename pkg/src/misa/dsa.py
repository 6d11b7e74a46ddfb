"""Dense reference indexer: gate-weighted ReLU scoring of every prefix token.

This is the ground truth the other indexers are measured against. Each head
contributes a ReLU-clamped query-key dot product, weighted by its gating
coefficient; the aggregated per-token score feeds a deterministic top-k.
"""

from __future__ import annotations

import numpy as np

from .config import REFERENCE64, dtype_for
from .types import CostEntry, CostLedger, ScoreVector, SelectionResult, TokenSelection
from .validation import check_positive_int
from .workload import IndexerWorkload


def relevance_dots(keys: np.ndarray, queries: np.ndarray, dtype: np.dtype) -> np.ndarray:
    """Query-key dot products at the requested working precision.

    reference64 computes float64 dots of the float64 inputs. fast32 quantizes
    both operands to float32 and returns the correctly rounded float32 value
    of each dot, accumulated through a wide register the way hardware
    mixed-precision kernels accumulate low-precision products; a plain
    float32-accumulated GEMM drifts a few ULP, which is enough to reorder
    near-tied selections against the reference.
    """
    if dtype == np.float32:
        q = queries.astype(np.float32).astype(np.float64)
        k = keys.astype(np.float32).astype(np.float64)
        return (q @ k.T).astype(np.float32).astype(np.float64)
    q = np.ascontiguousarray(queries, dtype=np.float64)
    k = np.ascontiguousarray(keys, dtype=np.float64)
    return q @ k.T


def gated_relu_scores(
    keys: np.ndarray,
    queries: np.ndarray,
    gate_weights: np.ndarray,
    dtype: np.dtype,
) -> np.ndarray:
    """Sum over heads of gate * ReLU(query . key), one score per key row.

    Only the d-dimensional dot products run at the requested precision; the
    per-head gating epilogue is O(n_heads) per token and stays in float64.
    All callers share this helper so that restricting to a head subset or a
    key subset reproduces the dense computation bit for bit when the subset
    is the full set.
    """
    dots = relevance_dots(keys, queries, dtype)
    np.maximum(dots, 0, out=dots)
    return np.asarray(gate_weights, dtype=np.float64) @ dots


def dsa_score(workload: IndexerWorkload, *, precision: str = REFERENCE64) -> ScoreVector:
    """Per-token relevance scores using all heads."""
    values = gated_relu_scores(
        workload.keys, workload.queries, workload.gate_weights, dtype_for(precision)
    )
    return ScoreVector(values=values, axis="token")


def topk_tokens(scores: ScoreVector | np.ndarray, k: int) -> TokenSelection:
    """The min(k, L) highest-scoring token positions, ties to the smaller index.

    Output indices are sorted ascending; the selection is a deterministic
    function of the scores.
    """
    check_positive_int(k, "k")
    values = scores.values if isinstance(scores, ScoreVector) else np.asarray(scores)
    prefix_len = int(values.shape[0])
    keep = min(k, prefix_len)
    order = np.argsort(-values, kind="stable")
    indices = np.sort(order[:keep])
    return TokenSelection(indices=indices, budget=k, prefix_len=prefix_len)


def topk_within(
    scores: np.ndarray, candidates: np.ndarray, k: int, prefix_len: int
) -> TokenSelection:
    """Top-k restricted to a candidate index set, ties to the smaller token index.

    ``scores[i]`` is the score of global token ``candidates[i]``; candidates
    must be sorted ascending so that the stable sort tie-breaks on the global
    index.
    """
    check_positive_int(k, "k")
    keep = min(k, int(candidates.shape[0]))
    order = np.argsort(-np.asarray(scores), kind="stable")
    chosen = np.sort(candidates[order[:keep]])
    return TokenSelection(indices=chosen, budget=k, prefix_len=prefix_len)


def dsa_rescore(
    workload: IndexerWorkload,
    candidates: np.ndarray,
    k: int,
    *,
    precision: str = REFERENCE64,
) -> tuple[TokenSelection, int]:
    """Score a candidate token set with all heads and keep the top-k.

    Returns the selection plus the number of head-candidate dot products
    performed (n_heads * len(candidates)).
    """
    candidates = np.asarray(candidates, dtype=np.int64)
    scores = gated_relu_scores(
        workload.keys[candidates],
        workload.queries,
        workload.gate_weights,
        dtype_for(precision),
    )
    selection = topk_within(scores, candidates, k, workload.prefix_len)
    return selection, workload.n_heads * int(candidates.shape[0])


def dsa_select(
    workload: IndexerWorkload, k: int, *, precision: str = REFERENCE64
) -> SelectionResult:
    """Dense selection: score every prefix token with every head, keep top-k."""
    selection = topk_tokens(dsa_score(workload, precision=precision), k)
    ledger = CostLedger(
        entries=(
            CostEntry(
                stage="token_scan",
                kind="token",
                count=workload.n_heads * workload.prefix_len,
            ),
        )
    )
    return SelectionResult(selection=selection, ledger=ledger)

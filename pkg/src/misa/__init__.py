"""Sparse-attention token-selection indexers with head routing, plus a cross-validation harness.

The package implements one family of indexers over a shared workload type:

* ``dsa``          dense reference, every head scores every prefix token
* ``block_sparse`` whole-block selection by pooled-key affinity
* ``hisa``         two-stage block-to-token search
* ``misa``         MoE head routing, only the top-h heads scan the prefix
* ``misa_hier``    routed coarse pass plus dense re-rank of top-k' candidates

All selectors are exposed both as pure functions and as scikit-learn style
estimators; the harness sweeps them on seeded synthetic workloads and writes
CSV grids with exact dot-product counts.
"""

from .baselines import block_scores, block_sparse_select, hisa_select
from .config import (
    BASELINE_BLOCK_SIZE,
    BLOCK_ATTENTION,
    FAST32,
    GATE_ONLY,
    PRECISION_MODES,
    QUERY_NORM,
    REFERENCE64,
    ROUTER_BLOCK_SIZE,
    ROUTER_SCORE_KINDS,
    IndexerConfig,
    dtype_for,
)
from .dsa import (
    dsa_rescore,
    dsa_score,
    dsa_select,
    gated_relu_scores,
    relevance_dots,
    topk_tokens,
)
from .estimators import (
    INDEXER_REGISTRY,
    METHODS,
    BaseTokenIndexer,
    BlockSparseIndexer,
    DSAIndexer,
    HierarchicalMISAIndexer,
    HISAIndexer,
    MISAIndexer,
    make_indexer,
)
from .harness import (
    CSV_COLUMNS,
    DEFAULT_DEPTH_GRID,
    DEFAULT_HEAD_SWEEP,
    DEFAULT_L_GRID,
    ExperimentSpec,
    GridResult,
    run_bench,
    run_block_sweep,
    run_grid,
    run_head_sweep,
    run_iou_curves,
    run_niah_grid,
    run_router_ablation,
)
from .metrics import candidate_recall, cost_ratio, iou, needle_recall
from .pooling import BlockSummary, build_block_summary, incremental_append
from .routing import (
    misa_hier_select,
    misa_score,
    misa_select,
    route_head_importance,
    route_topk_heads,
)
from .types import CostEntry, CostLedger, HeadSet, ScoreVector, SelectionResult, TokenSelection
from .workload import (
    IndexerWorkload,
    NeedleLabel,
    gen_needle_workload,
    gen_random_workload,
    load_workload,
    save_workload,
    softmax,
)

__version__ = "0.1.0"

__all__ = [
    "BASELINE_BLOCK_SIZE",
    "BLOCK_ATTENTION",
    "BaseTokenIndexer",
    "BlockSparseIndexer",
    "BlockSummary",
    "CSV_COLUMNS",
    "CostEntry",
    "CostLedger",
    "DEFAULT_DEPTH_GRID",
    "DEFAULT_HEAD_SWEEP",
    "DEFAULT_L_GRID",
    "DSAIndexer",
    "ExperimentSpec",
    "FAST32",
    "GATE_ONLY",
    "GridResult",
    "HISAIndexer",
    "HeadSet",
    "HierarchicalMISAIndexer",
    "INDEXER_REGISTRY",
    "IndexerConfig",
    "IndexerWorkload",
    "METHODS",
    "MISAIndexer",
    "NeedleLabel",
    "PRECISION_MODES",
    "QUERY_NORM",
    "REFERENCE64",
    "ROUTER_BLOCK_SIZE",
    "ROUTER_SCORE_KINDS",
    "ScoreVector",
    "SelectionResult",
    "TokenSelection",
    "block_scores",
    "block_sparse_select",
    "build_block_summary",
    "candidate_recall",
    "cost_ratio",
    "dsa_rescore",
    "dsa_score",
    "dsa_select",
    "dtype_for",
    "gated_relu_scores",
    "gen_needle_workload",
    "gen_random_workload",
    "hisa_select",
    "incremental_append",
    "iou",
    "load_workload",
    "make_indexer",
    "misa_hier_select",
    "misa_score",
    "misa_select",
    "needle_recall",
    "relevance_dots",
    "route_head_importance",
    "route_topk_heads",
    "run_bench",
    "run_block_sweep",
    "run_grid",
    "run_head_sweep",
    "run_iou_curves",
    "run_niah_grid",
    "run_router_ablation",
    "save_workload",
    "softmax",
    "topk_tokens",
]

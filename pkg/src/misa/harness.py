"""Experiment runner: retrieval grids, sweeps, ablations, and micro-benchmarks.

Every run produces a :class:`GridResult` whose rows carry the selection
quality (needle recall, agreement with the dense reference) and the exact
instrumented dot-product counts for one grid cell. The dense reference is
recomputed on the identical workload for every cell, never cached across
configurations. Rows are sorted before writing so output files do not depend
on evaluation order, and cell workloads are pure functions of the seed, so
re-running a spec reproduces its file byte for byte (the only exception is
the measured wall-clock column of the bench command).

The simulated "layers" of the agreement curves are independent seeded
workloads, one seed per layer.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import median
from typing import Iterable

import numpy as np

from . import metrics
from .config import (
    BASELINE_BLOCK_SIZE,
    BLOCK_ATTENTION,
    ROUTER_SCORE_KINDS,
    IndexerConfig,
)
from .dsa import dsa_select
from .estimators import METHODS, BaseTokenIndexer, make_indexer
from .types import SelectionResult
from .validation import check_choice, check_positive_int
from .workload import IndexerWorkload, gen_needle_workload, gen_random_workload

DEFAULT_L_GRID = (1024, 2048, 4096, 8192)
DEFAULT_DEPTH_GRID = tuple(i / 10 for i in range(11))
DEFAULT_HEAD_SWEEP = (1, 2, 4, 8, 16)

WORKLOAD_KINDS = ("needle", "random")

CSV_COLUMNS = (
    "method",
    "L",
    "depth_fraction",
    "h",
    "B",
    "kprime",
    "seed",
    "needle_recall",
    "iou_vs_dsa",
    "token_dot_products",
    "block_dot_products",
    "refine_dot_products",
    "wall_micros",
)

# Strides for deriving per-cell seeds; coprime and far apart so no two grid
# cells of a realistic grid collide.
_L_STRIDE = 15485863
_DEPTH_STRIDE = 6151
_REPEAT_STRIDE = 1


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment grid."""

    method: str = "misa"
    cfg: IndexerConfig = field(default_factory=IndexerConfig)
    workload_kind: str = "needle"
    seed: int = 0
    L_grid: tuple[int, ...] = DEFAULT_L_GRID
    depth_grid: tuple[float, ...] = DEFAULT_DEPTH_GRID
    margin: float = 10.0
    needle_len: int = 32
    noise_scale: float = 0.01
    rotate_align: bool = False
    router_kind: str = BLOCK_ATTENTION
    repeats: int = 1
    raw_gates: bool = False
    scale_budgets: bool = True
    output_path: str | Path | None = None

    def __post_init__(self) -> None:
        check_choice(self.method, METHODS, "method")
        check_choice(self.workload_kind, WORKLOAD_KINDS, "workload_kind")
        check_choice(self.router_kind, ROUTER_SCORE_KINDS, "router_kind")
        if not self.L_grid:
            raise ValueError("L_grid must be non-empty")
        for L in self.L_grid:
            check_positive_int(L, "L grid entry")
        check_positive_int(self.repeats, "repeats")
        for depth in self.depth_grid:
            if not (0.0 <= depth <= 1.0):
                raise ValueError(f"depth grid entries must lie in [0, 1], got {depth}")


@dataclass
class GridResult:
    """Result rows of one experiment, sorted deterministically."""

    rows: list[dict]

    def __post_init__(self) -> None:
        self.rows = sorted(self.rows, key=_row_key)

    def write_csv(self, target: str | Path | io.TextIOBase) -> None:
        if hasattr(target, "write"):
            _write_rows(target, self.rows)
        else:
            with open(target, "w", encoding="utf-8", newline="") as fh:
                _write_rows(fh, self.rows)

    def to_csv_bytes(self) -> bytes:
        buf = io.StringIO()
        _write_rows(buf, self.rows)
        return buf.getvalue().encode("utf-8")


def _row_key(row: dict) -> tuple:
    def num(value, default=-1.0):
        return default if value == "" or value is None else float(value)

    return (
        row["method"],
        num(row["L"]),
        num(row["depth_fraction"]),
        num(row["h"]),
        num(row["B"]),
        num(row["kprime"]),
        num(row["seed"]),
    )


def _format_cell(value) -> str:
    if value == "" or value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_rows(stream, rows: list[dict]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_format_cell(row[col]) for col in CSV_COLUMNS])


def cell_seed(base_seed: int, l_index: int, depth_index: int, repeat: int) -> int:
    """Deterministic per-cell seed; identical across methods and router kinds."""
    return base_seed + _L_STRIDE * l_index + _DEPTH_STRIDE * depth_index + _REPEAT_STRIDE * repeat


def resolve_budget(spec: ExperimentSpec, prefix_len: int) -> int:
    """Token budget for one cell; scaled to L/4 at desk scale so k < L."""
    if not spec.scale_budgets:
        return spec.cfg.budget_k
    return max(1, min(spec.cfg.budget_k, prefix_len // 4))


def resolve_kprime(spec: ExperimentSpec, budget_k: int) -> int:
    """Candidate budget for one cell; scaled with k, never below it."""
    if not spec.scale_budgets:
        return spec.cfg.candidate_kprime
    return max(budget_k, min(spec.cfg.candidate_kprime, 4 * budget_k))


def _build_indexer(
    spec: ExperimentSpec,
    budget_k: int,
    kprime: int,
    *,
    h: int | None = None,
    block_size: int | None = None,
    router_kind: str | None = None,
) -> BaseTokenIndexer:
    cfg = spec.cfg
    method = spec.method
    params: dict = {"budget_k": budget_k, "precision_mode": cfg.precision_mode}
    if method in ("block_sparse", "hisa"):
        params["block_size"] = block_size if block_size is not None else BASELINE_BLOCK_SIZE
        if method == "hisa":
            params["block_top_m"] = cfg.hisa_block_m
    if method in ("misa", "misa_hier"):
        params["block_size"] = block_size if block_size is not None else cfg.block_size
        params["active_heads_h"] = h if h is not None else cfg.active_heads_h
        params["router_score"] = router_kind if router_kind is not None else spec.router_kind
        if method == "misa_hier":
            params["candidate_kprime"] = kprime
    return make_indexer(method, **params)


def _make_workload(spec: ExperimentSpec, seed: int, L: int, depth: float) -> IndexerWorkload:
    if spec.workload_kind == "random":
        return gen_random_workload(seed, L, spec.cfg, raw_gates=spec.raw_gates)
    needle_len = min(spec.needle_len, L)
    align = seed % spec.cfg.n_heads if spec.rotate_align else None
    return gen_needle_workload(
        seed,
        L,
        depth,
        needle_len,
        spec.margin,
        spec.cfg,
        noise_scale=spec.noise_scale,
        align_head=align,
        raw_gates=spec.raw_gates,
    )


def _row_from_result(
    spec: ExperimentSpec,
    indexer: BaseTokenIndexer,
    workload: IndexerWorkload,
    result: SelectionResult,
    *,
    method_tag: str | None = None,
    L: int | None = None,
    depth: float | str = "",
    seed: int = 0,
    wall_micros: float | str = "",
) -> dict:
    budget_k = indexer.budget_k
    reference = dsa_select(workload, budget_k, precision=spec.cfg.precision_mode)
    agreement = metrics.iou(result.selection, reference.selection)
    if workload.label is not None:
        recall = metrics.needle_recall(result.selection, workload.label.interval)
    else:
        recall = ""
    ledger = result.ledger
    return {
        "method": method_tag if method_tag is not None else indexer.method,
        "L": workload.prefix_len if L is None else L,
        "depth_fraction": depth,
        "h": getattr(indexer, "active_heads_h", ""),
        "B": getattr(indexer, "block_size", ""),
        "kprime": getattr(indexer, "candidate_kprime", ""),
        "seed": seed,
        "needle_recall": recall,
        "iou_vs_dsa": agreement,
        "token_dot_products": ledger.token_dot_products,
        "block_dot_products": ledger.block_dot_products,
        "refine_dot_products": ledger.refine_dot_products,
        "wall_micros": wall_micros,
    }


def _grid_rows(
    spec: ExperimentSpec,
    *,
    h: int | None = None,
    block_size: int | None = None,
    router_kind: str | None = None,
    method_tag: str | None = None,
) -> list[dict]:
    rows = []
    depths: Iterable[float | str]
    if spec.workload_kind == "needle":
        depths = spec.depth_grid
    else:
        depths = ("",)
    for li, L in enumerate(spec.L_grid):
        budget_k = resolve_budget(spec, L)
        kprime = resolve_kprime(spec, budget_k)
        indexer = _build_indexer(
            spec, budget_k, kprime, h=h, block_size=block_size, router_kind=router_kind
        )
        for di, depth in enumerate(depths):
            for rep in range(spec.repeats):
                seed = cell_seed(spec.seed, li, di, rep)
                workload = _make_workload(spec, seed, L, depth if depth != "" else 0.0)
                result = indexer.select(workload)
                rows.append(
                    _row_from_result(
                        spec,
                        indexer,
                        workload,
                        result,
                        method_tag=method_tag,
                        depth=depth,
                        seed=seed,
                    )
                )
    return rows


def run_grid(spec: ExperimentSpec) -> GridResult:
    """One method over the full (L, depth, repeat) grid of an experiment spec."""
    return GridResult(_grid_rows(spec))


def run_niah_grid(spec: ExperimentSpec) -> GridResult:
    """Needle-retrieval grid: context length by needle depth by repeat."""
    if spec.workload_kind != "needle":
        raise ValueError("the retrieval grid requires workload_kind='needle'")
    return run_grid(spec)


def run_head_sweep(spec: ExperimentSpec, h_values: Iterable[int] = DEFAULT_HEAD_SWEEP) -> GridResult:
    """Sweep the number of active heads for a routed method.

    For the two-stage method the sweep also emits single-stage rows at twice
    each head count, so the file carries the matched-budget comparison
    directly.
    """
    if spec.method not in ("misa", "misa_hier"):
        raise ValueError("head sweep requires a routed method (misa or misa_hier)")
    h_values = [check_positive_int(h, "h") for h in h_values]
    if not h_values:
        raise ValueError("h_values must be non-empty")
    rows = []
    for h in h_values:
        rows.extend(_grid_rows(spec, h=h))
        if spec.method == "misa_hier":
            companion = replace(spec, method="misa")
            rows.extend(_grid_rows(companion, h=min(2 * h, spec.cfg.n_heads)))
    return GridResult(rows)


def default_block_sweep(max_len: int, points: int = 11, smallest: int = 128) -> tuple[int, ...]:
    """Log-spaced block sizes from ``smallest`` up to the longest prefix."""
    top = max(smallest, max_len)
    values = np.unique(np.rint(np.geomspace(smallest, top, points)).astype(int))
    return tuple(int(v) for v in values)


def run_block_sweep(spec: ExperimentSpec, B_values: Iterable[int] | None = None) -> GridResult:
    """Sweep the router block size, up to a single pooled key per prefix."""
    if spec.method not in ("misa", "misa_hier"):
        raise ValueError("block sweep requires a routed method (misa or misa_hier)")
    if B_values is None:
        B_values = default_block_sweep(max(spec.L_grid))
    B_values = [check_positive_int(B, "B") for B in B_values]
    if not B_values:
        raise ValueError("B_values must be non-empty")
    rows = []
    for B in B_values:
        rows.extend(_grid_rows(spec, block_size=B))
    return GridResult(rows)


def run_router_ablation(spec: ExperimentSpec) -> GridResult:
    """Run the single-stage routed method once per router-score variant.

    Rows are tagged ``misa[<kind>]`` in the method column; workloads are
    identical across the variants because cell seeds do not depend on the
    router kind.
    """
    if spec.method != "misa":
        raise ValueError("router ablation runs on the single-stage routed method")
    rows = []
    for kind in ROUTER_SCORE_KINDS:
        rows.extend(_grid_rows(spec, router_kind=kind, method_tag=f"misa[{kind}]"))
    return GridResult(rows)


def run_iou_curves(spec: ExperimentSpec) -> GridResult:
    """Agreement with the dense reference as the prefix grows, per layer.

    Layers are independent seeded workloads. Each layer draws one workload at
    the longest grid length; every grid length at or above the token budget
    is then evaluated as a prefix of it. Positions below the budget are
    skipped because the agreement is only meaningful once the prefix can fill
    the budget.
    """
    if spec.method not in ("hisa", "misa", "misa_hier"):
        raise ValueError("agreement curves run on hisa, misa or misa_hier")
    max_len = max(spec.L_grid)
    budget_k = resolve_budget(spec, max_len)
    kprime = resolve_kprime(spec, budget_k)
    positions = [L for L in sorted(set(spec.L_grid)) if L >= budget_k]
    indexer = _build_indexer(spec, budget_k, kprime)
    rows = []
    for layer in range(spec.repeats):
        seed = cell_seed(spec.seed, 0, 0, layer)
        full = gen_random_workload(seed, max_len, spec.cfg, raw_gates=spec.raw_gates)
        for position in positions:
            workload = full.truncated(position)
            result = indexer.select(workload)
            rows.append(
                _row_from_result(spec, indexer, workload, result, L=position, seed=seed)
            )
    return GridResult(rows)


def run_bench(spec: ExperimentSpec, L_values: Iterable[int] | None = None) -> GridResult:
    """Median wall-clock per prefix length alongside the exact product counts.

    The wall_micros column is a measurement and is the one column that varies
    across identical invocations; every other column is deterministic.
    """
    if spec.repeats < 5:
        raise ValueError("bench requires repeats >= 5 for a stable median")
    if L_values is None:
        L_values = spec.L_grid
    L_values = [check_positive_int(L, "L") for L in L_values]
    rows = []
    for li, L in enumerate(sorted(set(L_values))):
        budget_k = resolve_budget(spec, L)
        kprime = resolve_kprime(spec, budget_k)
        indexer = _build_indexer(spec, budget_k, kprime)
        seed = cell_seed(spec.seed, li, 0, 0)
        workload = _make_workload(spec, seed, L, 0.5)
        timings = []
        result = None
        for _ in range(spec.repeats):
            start = time.perf_counter_ns()
            result = indexer.select(workload)
            timings.append((time.perf_counter_ns() - start) / 1000.0)
        rows.append(
            _row_from_result(
                spec,
                indexer,
                workload,
                result,
                L=L,
                seed=seed,
                wall_micros=float(median(timings)),
            )
        )
    return GridResult(rows)

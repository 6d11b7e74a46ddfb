"""Command-line harness for the indexer experiments.

Subcommands mirror the experiment runners: ``run`` (generic grid), ``niah``
(needle-retrieval grid), ``head-sweep``, ``block-sweep``, ``ablate-router``,
``iou`` (agreement curves), and ``bench`` (timed runs). All output is CSV with
a fixed header; identical invocations produce identical files, except for the
measured wall-clock column of ``bench``.

A ``--config`` file holds flat ``key=value`` lines using the long flag names;
flags given on the command line override the file.

Exit codes: 0 on success, 2 for invalid configuration, 3 for I/O failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import (
    BASELINE_BLOCK_SIZE,
    PRECISION_MODES,
    REFERENCE64,
    ROUTER_SCORE_KINDS,
    IndexerConfig,
)
from .estimators import METHODS
from .harness import (
    DEFAULT_DEPTH_GRID,
    DEFAULT_HEAD_SWEEP,
    DEFAULT_L_GRID,
    WORKLOAD_KINDS,
    ExperimentSpec,
    GridResult,
    _build_indexer,
    _make_workload,
    _row_from_result,
    cell_seed,
    resolve_budget,
    resolve_kprime,
    run_bench,
    run_block_sweep,
    run_grid,
    run_head_sweep,
    run_iou_curves,
    run_niah_grid,
    run_router_ablation,
)
from .workload import load_workload, save_workload

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


class ConfigError(ValueError):
    """Invalid flag or configuration-file input."""


def _csv_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in str(text).split(",") if part != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _csv_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in str(text).split(",") if part != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# dest -> converter used when reading values from a config file
_CONVERTERS = {
    "method": str,
    "workload_kind": str,
    "seed": int,
    "out": str,
    "L_grid": _csv_ints,
    "depth_grid": _csv_floats,
    "repeats": int,
    "n_heads": int,
    "head_dim": int,
    "budget_k": int,
    "candidate_kprime": int,
    "active_heads_h": int,
    "block_size": int,
    "hisa_block_m": int,
    "router_kind": str,
    "margin": float,
    "needle_len": int,
    "noise_scale": float,
    "precision_mode": str,
    "raw_gates": _bool,
    "rotate_align": _bool,
    "scale_budgets": _bool,
    "h_values": _csv_ints,
    "B_values": _csv_ints,
    "save_workloads": str,
    "from_workload": str,
}

# config-file keys (long flag spellings) -> dests
_KEY_TO_DEST = {
    "method": "method",
    "workload": "workload_kind",
    "seed": "seed",
    "out": "out",
    "lengths": "L_grid",
    "depths": "depth_grid",
    "repeats": "repeats",
    "n-heads": "n_heads",
    "head-dim": "head_dim",
    "budget-k": "budget_k",
    "kprime": "candidate_kprime",
    "active-heads": "active_heads_h",
    "block-size": "block_size",
    "hisa-m": "hisa_block_m",
    "router-score": "router_kind",
    "margin": "margin",
    "needle-len": "needle_len",
    "noise-scale": "noise_scale",
    "precision": "precision_mode",
    "raw-gates": "raw_gates",
    "rotate-align": "rotate_align",
    "scale-budgets": "scale_budgets",
    "heads": "h_values",
    "block-sizes": "B_values",
}

_DEST_TO_FLAG = {
    dest: "--" + key for key, dest in _KEY_TO_DEST.items() if dest not in ("out",)
}


def _add_common_options(parser: argparse.ArgumentParser, *, method: str, workload: str, repeats: int) -> None:
    parser.add_argument("--method", choices=METHODS, default=method)
    parser.add_argument("--workload", dest="workload_kind", choices=WORKLOAD_KINDS, default=workload)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    parser.add_argument("--config", default=None, help="flat key=value file; flags override it")
    parser.add_argument("--lengths", dest="L_grid", type=_csv_ints, default=DEFAULT_L_GRID)
    parser.add_argument("--depths", dest="depth_grid", type=_csv_floats, default=DEFAULT_DEPTH_GRID)
    parser.add_argument("--repeats", type=int, default=repeats)
    parser.add_argument("--n-heads", dest="n_heads", type=int, default=64)
    parser.add_argument("--head-dim", dest="head_dim", type=int, default=64)
    parser.add_argument("--budget-k", dest="budget_k", type=int, default=2048)
    parser.add_argument("--kprime", dest="candidate_kprime", type=int, default=None)
    parser.add_argument("--active-heads", dest="active_heads_h", type=int, default=8)
    parser.add_argument(
        "--block-size",
        dest="block_size",
        type=int,
        default=None,
        help="pooled partition size; defaults to 1024 for routed methods, 128 for block baselines",
    )
    parser.add_argument("--hisa-m", dest="hisa_block_m", type=int, default=None)
    parser.add_argument("--router-score", dest="router_kind", choices=ROUTER_SCORE_KINDS, default="block_attention")
    parser.add_argument("--margin", type=float, default=10.0)
    parser.add_argument("--needle-len", dest="needle_len", type=int, default=32)
    parser.add_argument("--noise-scale", dest="noise_scale", type=float, default=0.01)
    parser.add_argument("--precision", dest="precision_mode", choices=PRECISION_MODES, default=REFERENCE64)
    parser.add_argument("--raw-gates", dest="raw_gates", action="store_true")
    parser.add_argument("--rotate-align", dest="rotate_align", action="store_true")
    parser.add_argument(
        "--no-scale-budgets",
        dest="scale_budgets",
        action="store_false",
        help="use budget-k and kprime as given instead of scaling them to the prefix",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="misa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="generic grid for one method")
    _add_common_options(run, method="misa", workload="needle", repeats=1)
    run.add_argument("--save-workloads", dest="save_workloads", default=None, metavar="DIR",
                     help="also write every cell workload in the flat binary format")
    run.add_argument("--from-workload", dest="from_workload", default=None, metavar="FILE",
                     help="run on a single serialized workload instead of a grid")

    niah = sub.add_parser("niah", help="needle-retrieval grid (length x depth)")
    _add_common_options(niah, method="misa", workload="needle", repeats=1)

    head = sub.add_parser("head-sweep", help="sweep the number of active heads")
    _add_common_options(head, method="misa", workload="needle", repeats=1)
    head.add_argument("--heads", dest="h_values", type=_csv_ints, default=DEFAULT_HEAD_SWEEP)

    block = sub.add_parser("block-sweep", help="sweep the router block size")
    _add_common_options(block, method="misa", workload="needle", repeats=1)
    block.add_argument("--block-sizes", dest="B_values", type=_csv_ints, default=None)

    ablate = sub.add_parser("ablate-router", help="compare the router score variants")
    _add_common_options(ablate, method="misa", workload="needle", repeats=1)

    iou = sub.add_parser("iou", help="agreement with the dense reference vs prefix length")
    _add_common_options(iou, method="misa_hier", workload="random", repeats=3)

    bench = sub.add_parser("bench", help="median wall time and exact product counts per length")
    _add_common_options(bench, method="misa", workload="random", repeats=5)

    return parser


def _parse_kv_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    data: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        data[key.strip()] = value.strip()
    return data


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> None:
    if not args.config:
        return
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token.split("=", 1)[0])
    for key, raw in _parse_kv_file(args.config).items():
        if key == "out":
            dest, flag = "out", "--out"
        elif key in _KEY_TO_DEST:
            dest = _KEY_TO_DEST[key]
            flag = "--" + key
        else:
            raise ConfigError(f"unknown config key {key!r}")
        if not hasattr(args, dest):
            raise ConfigError(f"config key {key!r} does not apply to this subcommand")
        if flag in explicit:
            continue
        try:
            setattr(args, dest, _CONVERTERS[dest](raw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for config key {key!r}: {raw!r}") from exc


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    block_size = args.block_size
    if block_size is None:
        block_size = BASELINE_BLOCK_SIZE if args.method in ("block_sparse", "hisa") else 1024
    kprime = args.candidate_kprime
    if kprime is None:
        kprime = max(8192, args.budget_k)
    cfg = IndexerConfig(
        n_heads=args.n_heads,
        head_dim=args.head_dim,
        budget_k=args.budget_k,
        block_size=block_size,
        active_heads_h=args.active_heads_h,
        candidate_kprime=kprime,
        hisa_block_m=args.hisa_block_m,
        precision_mode=args.precision_mode,
    )
    return ExperimentSpec(
        method=args.method,
        cfg=cfg,
        workload_kind=args.workload_kind,
        seed=args.seed,
        L_grid=tuple(args.L_grid),
        depth_grid=tuple(args.depth_grid),
        margin=args.margin,
        needle_len=args.needle_len,
        noise_scale=args.noise_scale,
        rotate_align=args.rotate_align,
        router_kind=args.router_kind,
        repeats=args.repeats,
        raw_gates=args.raw_gates,
        scale_budgets=args.scale_budgets,
        output_path=None if args.out == "-" else args.out,
    )


def _emit(result: GridResult, out: str) -> None:
    if out == "-":
        result.write_csv(sys.stdout)
    else:
        result.write_csv(out)


def _save_corpus(spec: ExperimentSpec, directory: str) -> None:
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    depths = spec.depth_grid if spec.workload_kind == "needle" else ("",)
    for li, L in enumerate(spec.L_grid):
        for di, depth in enumerate(depths):
            for rep in range(spec.repeats):
                seed = cell_seed(spec.seed, li, di, rep)
                workload = _make_workload(spec, seed, L, depth if depth != "" else 0.0)
                name = f"workload_L{L}_d{di}_r{rep}_s{seed}.bin"
                save_workload(workload, target / name)


def _run_single_workload(spec: ExperimentSpec, path: str) -> GridResult:
    workload = load_workload(path)
    if workload.n_heads != spec.cfg.n_heads or workload.head_dim != spec.cfg.head_dim:
        raise ConfigError(
            f"workload file has {workload.n_heads} heads of dim {workload.head_dim}, "
            f"flags specify {spec.cfg.n_heads} heads of dim {spec.cfg.head_dim}"
        )
    budget_k = resolve_budget(spec, workload.prefix_len)
    kprime = resolve_kprime(spec, budget_k)
    indexer = _build_indexer(spec, budget_k, kprime)
    result = indexer.select(workload)
    row = _row_from_result(spec, indexer, workload, result, seed=workload.seed)
    return GridResult([row])


def _dispatch(args: argparse.Namespace) -> GridResult:
    spec = _spec_from_args(args)
    command = args.command
    if command == "run":
        if args.from_workload:
            result = _run_single_workload(spec, args.from_workload)
        else:
            result = run_grid(spec)
        if args.save_workloads:
            _save_corpus(spec, args.save_workloads)
        return result
    if command == "niah":
        return run_niah_grid(spec)
    if command == "head-sweep":
        return run_head_sweep(spec, args.h_values)
    if command == "block-sweep":
        return run_block_sweep(spec, args.B_values)
    if command == "ablate-router":
        return run_router_ablation(spec)
    if command == "iou":
        return run_iou_curves(spec)
    if command == "bench":
        return run_bench(spec)
    raise ConfigError(f"unknown command {command!r}")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, argv)
        result = _dispatch(args)
        _emit(result, args.out)
    except OSError as exc:
        print(f"misa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"misa: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

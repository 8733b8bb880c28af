"""Command line: partition graphs, run kernels, simulate cache behavior.

Three subcommands. `partition` splits a graph into column blocks and can
save them in the GCB container. `run` times a kernel (mean of --reps
timed repetitions after one untimed warmup; loading and partitioning are
excluded) and emits one CSV row with a result checksum. `simulate`
replays kernel access traces through the cache model and emits one CSV
row per (mode, width).

Graphs come from --input (edge list or MatrixMarket) or --gen
(rmat:SCALE:EF[:SEED], path:N, cycle:N, star:N, complete:N). Sizes and
widths accept 2^k notation. --threads falls back to the
GRAPHCAGE_THREADS environment variable, then to 1.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from gcb.blocking import (
    DEFAULT_BLOCK_WIDTH,
    block_stats,
    partition_cb,
    partition_tocab,
    write_gcb,
)
from gcb.cachesim import DEFAULT_CACHE, STREAM_CLASSES, CacheConfig
from gcb.graph import (
    GraphCapacityError,
    GraphFormatError,
    GraphGenSpec,
    generate,
    load_graph,
    symmetrize,
    transpose,
)
from gcb.kernels import (
    DEFAULT_RANGE_WIDTH,
    PrParams,
    ScheduleStrategy,
    pr_baseline,
    pr_blocked,
    spmv,
    spmv_blocked,
)
from gcb.traces import PR_MODES, TRAVERSAL_MODES, compare_modes, COMPARE_COLUMNS
from gcb.traversal import DirectionPolicy, bc_single_source, bfs
from gcb.util import (
    parse_size,
    parse_width_list,
    resolve_threads,
    result_checksum,
    write_csv,
)

__all__ = ["main", "build_parser"]

KERNELS = ("pr", "spmv", "bc", "bfs")
VALID_MODES = {
    "pr": PR_MODES,
    "spmv": PR_MODES,
    "bc": TRAVERSAL_MODES,
    "bfs": TRAVERSAL_MODES,
}
RUN_COLUMNS = (
    "graph",
    "kernel",
    "mode",
    "width",
    "k",
    "iterations",
    "wall_time_ms",
    "miss_rate",
    "misses_per_edge",
    "checksum",
)
_POLICY_BY_MODE = {
    "baseline-push": "force-push",
    "tocab-pull": "force-pull",
    "hybrid": "auto",
}


def _add_graph_flags(p):
    p.add_argument("--input", metavar="PATH", help="edge list or .mtx file")
    p.add_argument(
        "--gen",
        metavar="SPEC",
        help="synthetic graph: rmat:SCALE:EF[:SEED] | path:N | cycle:N | star:N | complete:N",
    )
    p.add_argument(
        "--symmetrize", action="store_true", help="mirror every non-loop edge"
    )


def _add_cache_flags(p):
    p.add_argument("--capacity", type=parse_size, default=DEFAULT_CACHE.capacity_bytes)
    p.add_argument("--line", type=parse_size, default=DEFAULT_CACHE.line_bytes)
    p.add_argument("--assoc", type=int, default=DEFAULT_CACHE.associativity)
    p.add_argument(
        "--bypass",
        default="",
        metavar="CLASS[,..]",
        help=f"stream classes that skip the cache; from: {', '.join(STREAM_CLASSES)}",
    )


def _load_graph(args, parser):
    if bool(args.input) == bool(args.gen):
        parser.error("exactly one of --input or --gen is required")
    try:
        if args.gen:
            spec = GraphGenSpec.parse(args.gen)
            g = generate(spec)
            label = spec.label()
        else:
            g = load_graph(args.input)
            label = os.path.basename(args.input)
        if args.symmetrize:
            g = symmetrize(g)
    except (GraphFormatError, GraphCapacityError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2)
    return g, label


def _cache_config(args, parser) -> CacheConfig:
    bypass = frozenset(s for s in args.bypass.split(",") if s)
    try:
        return CacheConfig(args.capacity, args.line, args.assoc, bypass)
    except ValueError as exc:
        parser.error(str(exc))


def _resolve_mode(args, parser) -> str:
    kernel = args.kernel
    mode = args.mode
    if mode is None:
        mode = "baseline-pull" if kernel in ("pr", "spmv") else "hybrid"
    if mode not in VALID_MODES[kernel]:
        parser.error(
            f"kernel {kernel!r} does not support mode {mode!r}; "
            f"choose from: {', '.join(VALID_MODES[kernel])}"
        )
    return mode


def cmd_partition(args, parser) -> int:
    g, label = _load_graph(args, parser)
    if args.scheme == "cb" and args.direction != "pull":
        parser.error("the cb scheme is defined for --direction pull only")
    base = transpose(g) if args.direction == "pull" else g
    if args.scheme == "tocab":
        bg = partition_tocab(base, args.direction, args.width)
    else:
        bg = partition_cb(base, args.width)
    print(f"graph: {label}  |V|={g.num_vertices}  |E|={g.num_edges}")
    for line in block_stats(bg).describe():
        print(line)
    if args.out:
        write_gcb(bg, args.out)
        print(f"wrote {args.out}")
    return 0


def _run_setup(g, kernel, mode, args, threads):
    """Everything the timed loop must not include: transposes, blockings."""
    params = PrParams(args.damping, args.tol, args.max_iters)
    if args.deterministic or threads <= 1:
        strategy = ScheduleStrategy.serial_rows()
    else:
        strategy = ScheduleStrategy.chunked_rows(4096)
    ctx = {"params": params, "strategy": strategy}
    if kernel in ("pr", "spmv"):
        if mode in ("baseline-pull", "tocab-pull", "cb"):
            ctx["gt"] = transpose(g)
        if mode == "tocab-pull":
            ctx["bg"] = partition_tocab(ctx["gt"], "pull", args.width)
        elif mode == "tocab-push":
            ctx["bg"] = partition_tocab(g, "push", args.width)
        elif mode == "cb":
            ctx["bg"] = partition_cb(ctx["gt"], args.width)
        if kernel == "spmv":
            ctx["x"] = np.random.default_rng(42).random(g.num_vertices)
    else:
        ctx["policy"] = DirectionPolicy(
            _POLICY_BY_MODE[mode], cache_capacity_bytes=args.capacity
        )
        if mode != "baseline-push":
            ctx["bg"] = partition_tocab(transpose(g), "pull", args.width)
    return ctx


def _run_once(g, kernel, mode, args, threads, ctx):
    """One compute pass; returns (result array, iterations-style count)."""
    params, strategy = ctx["params"], ctx["strategy"]
    if kernel == "pr":
        if mode == "baseline-pull":
            r = pr_baseline(
                ctx["gt"], "pull", params, strategy, threads, args.deterministic
            )
        elif mode == "baseline-push":
            r = pr_baseline(g, "push", params, strategy, threads, args.deterministic)
        else:
            r = pr_blocked(ctx["bg"], params, args.k, threads)
        return r.ranks, r.iterations
    if kernel == "spmv":
        x = ctx["x"]
        if mode == "baseline-pull":
            return spmv(ctx["gt"], x, "pull"), 1
        if mode == "baseline-push":
            return spmv(g, x, "push"), 1
        return spmv_blocked(ctx["bg"], x, args.k, threads), 1
    if kernel == "bfs":
        r = bfs(g, args.source, ctx.get("bg"), ctx["policy"])
        return r.depth, len(r.levels)
    delta, _state, levels = bc_single_source(g, args.source, ctx.get("bg"), ctx["policy"])
    return delta, len(levels)


def _run_reference(g, kernel, mode, args, ctx):
    """Sequential baseline for --verify, with its comparison tolerance."""
    params = ctx["params"]
    if kernel == "pr":
        gt = ctx.get("gt") or transpose(g)
        ref = pr_baseline(gt, "pull", params).ranks
        return ref, 1e-10 * max(g.num_vertices, 1)
    if kernel == "spmv":
        gt = ctx.get("gt") or transpose(g)
        return spmv(gt, ctx["x"], "pull"), 1e-9
    policy = DirectionPolicy("force-push")
    if kernel == "bfs":
        return bfs(g, args.source, policy=policy).depth, 0.0
    return bc_single_source(g, args.source, policy=policy)[0], 0.0


def cmd_run(args, parser) -> int:
    mode = _resolve_mode(args, parser)
    kernel = args.kernel
    g, label = _load_graph(args, parser)
    if not 0 <= args.source < max(g.num_vertices, 1):
        parser.error(f"--source {args.source} out of range for |V|={g.num_vertices}")
    try:
        threads = resolve_threads(args.threads)
    except ValueError as exc:
        parser.error(str(exc))
    if args.reps < 1:
        parser.error("--reps must be >= 1")
    ctx = _run_setup(g, kernel, mode, args, threads)

    result, iterations = _run_once(g, kernel, mode, args, threads, ctx)  # warmup
    total = 0.0
    for _ in range(args.reps):
        t0 = time.perf_counter()
        result, iterations = _run_once(g, kernel, mode, args, threads, ctx)
        total += time.perf_counter() - t0
    mean_ms = total / args.reps * 1000.0

    status = 0
    if args.verify:
        ref, tol = _run_reference(g, kernel, mode, args, ctx)
        if tol == 0.0:
            ok = np.array_equal(result, ref)
        else:
            ok = float(np.abs(result - ref).max(initial=0.0)) <= tol
        print(f"verify: {'PASS' if ok else 'FAIL'}")
        if not ok:
            status = 1

    uses_width = "bg" in ctx
    uses_k = kernel in ("pr", "spmv") and mode in ("tocab-pull", "cb")
    row = {
        "graph": label,
        "kernel": kernel,
        "mode": mode,
        "width": args.width if uses_width else "-",
        "k": args.k if uses_k else "-",
        "iterations": iterations,
        "wall_time_ms": mean_ms,
        "miss_rate": None,
        "misses_per_edge": None,
        "checksum": result_checksum(result),
    }
    write_csv([row], RUN_COLUMNS, args.out)
    return status


def cmd_simulate(args, parser) -> int:
    kernel = args.kernel
    if args.modes is None:
        modes = list(VALID_MODES[kernel])
    else:
        modes = [m for m in args.modes.split(",") if m]
        if not modes:
            parser.error("empty modes list")
        for m in modes:
            if m not in VALID_MODES[kernel]:
                parser.error(
                    f"kernel {kernel!r} does not support mode {m!r}; "
                    f"choose from: {', '.join(VALID_MODES[kernel])}"
                )
    if args.widths:
        try:
            widths = parse_width_list(args.widths)
        except ValueError as exc:
            parser.error(str(exc))
    elif args.width is not None:
        widths = [args.width]
    else:
        widths = [DEFAULT_BLOCK_WIDTH]
    cfg = _cache_config(args, parser)
    g, label = _load_graph(args, parser)
    if not 0 <= args.source < max(g.num_vertices, 1):
        parser.error(f"--source {args.source} out of range for |V|={g.num_vertices}")
    rows = compare_modes(
        g,
        widths,
        cfg,
        kernel=kernel,
        modes=modes,
        k=args.k,
        include_index_streams=args.index_streams,
        graph_label=label,
        source=args.source,
        iterations=args.iterations,
        policy=DirectionPolicy("auto", cache_capacity_bytes=cfg.capacity_bytes),
    )
    write_csv(rows, COMPARE_COLUMNS, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcb",
        description="cache-aware graph kernels: partition, run, simulate",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="split a graph into column blocks")
    _add_graph_flags(p)
    p.add_argument("--direction", choices=("pull", "push"), default="pull")
    p.add_argument("--scheme", choices=("tocab", "cb"), default="tocab")
    p.add_argument("--width", type=parse_size, default=DEFAULT_BLOCK_WIDTH)
    p.add_argument("--out", metavar="PATH", help="write the blocks as a GCB file")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("run", help="time a kernel and print a CSV record")
    p.add_argument("kernel", choices=KERNELS)
    _add_graph_flags(p)
    p.add_argument("--mode", default=None, help="execution mode (kernel-dependent)")
    p.add_argument("--width", type=parse_size, default=DEFAULT_BLOCK_WIDTH)
    p.add_argument("--k", type=parse_size, default=DEFAULT_RANGE_WIDTH)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--out", metavar="PATH", default=None)
    _add_cache_flags(p)  # hybrid traversal sizes its switch from --capacity
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="replay kernel traces through the cache model")
    p.add_argument("--kernel", choices=KERNELS, default="pr")
    _add_graph_flags(p)
    p.add_argument("--modes", default=None, help="comma list; default: all for kernel")
    p.add_argument("--width", type=parse_size, default=None)
    p.add_argument("--widths", default=None, help="comma list or 2^a..2^b range")
    p.add_argument("--sweep", action="store_true", help="marker for width sweeps")
    p.add_argument("--k", type=parse_size, default=DEFAULT_RANGE_WIDTH)
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--index-streams", action="store_true",
                   help="also trace csr_index / edge_values streams")
    p.add_argument("--source", type=int, default=0)
    p.add_argument("--out", metavar="PATH", default=None)
    _add_cache_flags(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())

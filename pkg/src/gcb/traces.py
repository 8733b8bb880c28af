"""Access-trace builders: replay each kernel's memory behavior as events.

One trace event per vertex-value access, in the order the deterministic
(serial) kernel performs them. Index and weight streams (csr_index,
edge_values) are off by default and enabled with a flag; they model the
structure arrays that stream through the cache alongside the values.

Layout conventions, shared with the cache model:
  contributions  global vertex id
  sums           global vertex id
  partial_sums   arena-global local-row position (each block owns its
                 own buffer, laid out back to back)
  csr_index      [0, L) offset entries, [L, L+E) column entries,
                 [L+E, L+E+M) row-map entries (L = offset-array length)
  frontier       [0, pad) status array, then two queue buffers that
                 alternate by level parity
  sigma_depth    [0, pad) depths, [pad, 2*pad) path counts

Traversal traces cover the forward sweep only and group events by phase
within a level (queue reads, edge checks, then discovery writes); the
per-entry order inside a phase is the kernel's. Block-local staging in
the pull step is not traced: those buffers are a few cache lines.
"""

from __future__ import annotations

import numpy as np

from gcb.blocking import BlockedGraph, partition_cb, partition_tocab
from gcb.cachesim import (
    AccessTrace,
    CacheConfig,
    ELEMENT_BYTES,
    simulate,
    stream_base,
)
from gcb.graph import CsrGraph, transpose
from gcb.kernels import DEFAULT_RANGE_WIDTH
from gcb.traversal import (
    INF_DEPTH,
    DirectionPolicy,
    TraversalState,
    _expand_indices,
    choose_direction,
    forward_pull_step,
    forward_push_step,
)

__all__ = [
    "PR_MODES",
    "TRAVERSAL_MODES",
    "TRACE_KERNELS",
    "kernel_label",
    "trace_kernel",
    "trace_accumulate",
    "compare_modes",
    "COMPARE_COLUMNS",
]

PR_MODES = ("baseline-pull", "baseline-push", "cb", "tocab-pull", "tocab-push")
TRAVERSAL_MODES = ("baseline-push", "tocab-pull", "hybrid")

_PR_LABELS = {
    "baseline-pull": "pull-baseline",
    "baseline-push": "push-baseline",
    "cb": "cb",
    "tocab-pull": "tocab-pull",
    "tocab-push": "tocab-push",
}
_TRAV_LABELS = {"baseline-push": "push", "tocab-pull": "pull", "hybrid": "hybrid"}

TRACE_KERNELS = tuple(
    [f"{k}-{suffix}" for k in ("pr", "spmv") for suffix in _PR_LABELS.values()]
    + [f"{k}-{suffix}" for k in ("bfs", "bc") for suffix in _TRAV_LABELS.values()]
)

# sub-array padding inside the frontier / sigma_depth classes, in elements;
# 4 KiB granularity keeps any power-of-two line <= 4 KiB from straddling
_PAD_ELEMS = 1024


def kernel_label(kernel: str, mode: str) -> str:
    if kernel in ("pr", "spmv"):
        if mode not in _PR_LABELS:
            raise ValueError(f"kernel {kernel!r} does not support mode {mode!r}")
        return f"{kernel}-{_PR_LABELS[mode]}"
    if kernel in ("bfs", "bc"):
        if mode not in _TRAV_LABELS:
            raise ValueError(f"kernel {kernel!r} does not support mode {mode!r}")
        return f"{kernel}-{_TRAV_LABELS[mode]}"
    raise ValueError(f"unknown kernel {kernel!r}")


def _addr(name: str, idx) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    return stream_base(name) + idx * ELEMENT_BYTES


def _pad(n: int) -> int:
    return ((n + _PAD_ELEMS - 1) // _PAD_ELEMS) * _PAD_ELEMS


def _interleave(deg, pre=(), per_edge=(), post=()) -> AccessTrace:
    """Row-major interleave: per row its pre events, each edge's events in
    stream order, then the post events. Streams are (addresses, is_write)
    with addresses aligned to rows (pre/post) or edges (per_edge)."""
    deg = np.asarray(deg, dtype=np.int64)
    n_rows = len(deg)
    n_edges = int(deg.sum())
    p, qa = len(per_edge), len(pre)
    q = qa + len(post)
    total = p * n_edges + q * n_rows
    addrs = np.empty(total, dtype=np.int64)
    wr = np.empty(total, dtype=np.bool_)
    ends = np.cumsum(deg)
    starts = ends - deg
    rows = np.arange(n_rows, dtype=np.int64)
    row_of_edge = np.repeat(rows, deg)
    edge_base = p * np.arange(n_edges, dtype=np.int64) + q * row_of_edge + qa
    for t, (a, w) in enumerate(pre):
        slots = p * starts + q * rows + t
        addrs[slots] = a
        wr[slots] = w
    for t, (a, w) in enumerate(per_edge):
        addrs[edge_base + t] = a
        wr[edge_base + t] = w
    for t, (a, w) in enumerate(post):
        slots = p * ends + q * rows + qa + t
        addrs[slots] = a
        wr[slots] = w
    return AccessTrace(addrs, wr)


def _per_entry(streams) -> AccessTrace:
    """Fixed event tuple per entry: stack stream columns."""
    n = len(streams[0][0])
    s = len(streams)
    addrs = np.empty(n * s, dtype=np.int64)
    wr = np.empty(n * s, dtype=np.bool_)
    for t, (a, w) in enumerate(streams):
        addrs[t::s] = a
        wr[t::s] = w
    return AccessTrace(addrs, wr)


def _trace_baseline_pull(gt: CsrGraph, weighted: bool, with_index: bool) -> AccessTrace:
    """Row-major gather over the transpose; empty rows generate nothing."""
    deg_all = np.diff(gt.row_offsets)
    rows = np.flatnonzero(deg_all > 0)
    deg = deg_all[rows]
    cols = gt.col_indices.astype(np.int64)
    pre, per_edge = [], []
    if with_index:
        pre.append((_addr("csr_index", rows), False))
        offsets_len = gt.num_vertices + 1
        per_edge.append(
            (_addr("csr_index", offsets_len + np.arange(gt.num_edges)), False)
        )
    per_edge.append((_addr("contributions", cols), False))
    if weighted:
        per_edge.append((_addr("edge_values", np.arange(gt.num_edges)), False))
    post = [(_addr("sums", rows), True)]
    return _interleave(deg, pre, per_edge, post)


def _trace_baseline_push(g: CsrGraph, weighted: bool, with_index: bool) -> AccessTrace:
    """Row-major scatter: one source read per row, one sums store per edge."""
    deg_all = np.diff(g.row_offsets)
    rows = np.flatnonzero(deg_all > 0)
    deg = deg_all[rows]
    cols = g.col_indices.astype(np.int64)
    pre, per_edge = [], []
    if with_index:
        pre.append((_addr("csr_index", rows), False))
    pre.append((_addr("contributions", rows), False))
    if with_index:
        offsets_len = g.num_vertices + 1
        per_edge.append(
            (_addr("csr_index", offsets_len + np.arange(g.num_edges)), False)
        )
    if weighted:
        per_edge.append((_addr("edge_values", np.arange(g.num_edges)), False))
    per_edge.append((_addr("sums", cols), True))
    return _interleave(deg, pre, per_edge, post=())


def _csr_regions(bg: BlockedGraph):
    offsets_len = len(bg.lro_arena)
    return offsets_len, offsets_len + len(bg.col_arena)


def _lro_positions(bg: BlockedGraph) -> np.ndarray:
    """Arena position of each local row's offset entry (blocks add a seam)."""
    return np.arange(bg.total_local_rows, dtype=np.int64) + bg.block_of_row()


def _trace_tocab_pull_edges(bg: BlockedGraph, weighted: bool, with_index: bool) -> AccessTrace:
    deg = bg.local_degrees()
    cols = bg.col_arena.astype(np.int64)
    n_edges = len(cols)
    pre, per_edge = [], []
    if with_index:
        pre.append((_addr("csr_index", _lro_positions(bg)), False))
        offsets_len, _ = _csr_regions(bg)
        per_edge.append((_addr("csr_index", offsets_len + np.arange(n_edges)), False))
    per_edge.append((_addr("contributions", cols), False))
    if weighted:
        per_edge.append((_addr("edge_values", np.arange(n_edges)), False))
    post = [(_addr("partial_sums", np.arange(bg.total_local_rows)), True)]
    return _interleave(deg, pre, per_edge, post)


def trace_accumulate(bg: BlockedGraph, k: int = DEFAULT_RANGE_WIDTH, with_index: bool = False) -> AccessTrace:
    """Reduction phase: range-major, block-minor merge of partial sums.

    Per merged entry: read the partial (arena position), map it through
    the row table, store into the global sums slot. The k-wide staging
    buffer itself is not traced; it is the sums window being assembled.
    """
    if bg.total_local_rows == 0:
        return AccessTrace.empty()
    bounds = bg.range_bounds(k)  # arena-global positions, (B, R+1)
    counts = np.diff(bounds, axis=1).T.ravel()  # range-major
    starts = bounds[:, :-1].T.ravel()
    total = int(counts.sum())
    within = np.arange(total, dtype=np.int64) - np.repeat(
        np.cumsum(counts) - counts, counts
    )
    idx = np.repeat(starts, counts) + within
    targets = bg.id_map_arena[idx].astype(np.int64)
    streams = [(_addr("partial_sums", idx), False)]
    if with_index:
        _, cols_end = _csr_regions(bg)
        streams.append((_addr("csr_index", cols_end + idx), False))
    streams.append((_addr("sums", targets), True))
    return _per_entry(streams)


def _trace_tocab_push(bg: BlockedGraph, weighted: bool, with_index: bool) -> AccessTrace:
    deg = bg.local_degrees()
    cols = bg.col_arena.astype(np.int64)
    n_edges = len(cols)
    pre, per_edge = [], []
    if with_index:
        pre.append((_addr("csr_index", _lro_positions(bg)), False))
        offsets_len, cols_end = _csr_regions(bg)
        pre.append((_addr("csr_index", cols_end + np.arange(bg.total_local_rows)), False))
    pre.append((_addr("contributions", bg.id_map_arena.astype(np.int64)), False))
    if with_index:
        per_edge.append((_addr("csr_index", offsets_len + np.arange(n_edges)), False))
    if weighted:
        per_edge.append((_addr("edge_values", np.arange(n_edges)), False))
    per_edge.append((_addr("sums", cols), True))
    return _interleave(deg, pre, per_edge, post=())


def _trace_cb(bg: BlockedGraph, weighted: bool, with_index: bool) -> AccessTrace:
    """Identity row map: every block touches every global sums slot."""
    deg = bg.local_degrees()
    n = bg.num_vertices
    rows_tiled = np.tile(np.arange(n, dtype=np.int64), bg.num_blocks)
    cols = bg.col_arena.astype(np.int64)
    n_edges = len(cols)
    pre, per_edge = [], []
    if with_index:
        pre.append((_addr("csr_index", _lro_positions(bg)), False))
        offsets_len, _ = _csr_regions(bg)
    pre.append((_addr("sums", rows_tiled), False))
    if with_index:
        per_edge.append((_addr("csr_index", offsets_len + np.arange(n_edges)), False))
    per_edge.append((_addr("contributions", cols), False))
    if weighted:
        per_edge.append((_addr("edge_values", np.arange(n_edges)), False))
    post = [(_addr("sums", rows_tiled), True)]
    return _interleave(deg, pre, per_edge, post)


def _ragged_take(offsets: np.ndarray, sel: np.ndarray):
    """Element positions of the selected rows' slices: (positions, counts)."""
    counts = (offsets[sel + 1] - offsets[sel]).astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), counts
    within = np.arange(total, dtype=np.int64) - np.repeat(
        np.cumsum(counts) - counts, counts
    )
    return np.repeat(offsets[sel].astype(np.int64), counts) + within, counts


def _trace_traversal(
    g: CsrGraph,
    bg: BlockedGraph | None,
    policy: DirectionPolicy,
    source: int,
    sigma: bool,
    with_index: bool,
) -> AccessTrace:
    n = g.num_vertices
    if n == 0:
        return AccessTrace.empty()
    pad = _pad(n)
    if policy.mode != "force-push" and bg is None:
        bg = partition_tocab(transpose(g), "pull", max(1, n // 8))
    state = TraversalState.initial(n, source)
    parts = []
    parity = 0
    while state.frontier.size:
        frontier = state.frontier
        q_read = _addr("frontier", pad * (1 + parity) + np.arange(len(frontier)))
        step_dir = choose_direction(g, state, policy)
        if step_dir == "push":
            srcs, dsts, eidx = _expand_indices(g, frontier)
            parts.append(AccessTrace(q_read, np.zeros(len(q_read), dtype=bool)))
            if with_index:
                parts.append(
                    AccessTrace.concat(
                        [
                            AccessTrace(
                                _addr("csr_index", frontier.astype(np.int64)),
                                np.zeros(len(frontier), dtype=bool),
                            ),
                            AccessTrace(
                                _addr("csr_index", g.num_vertices + 1 + eidx),
                                np.zeros(len(eidx), dtype=bool),
                            ),
                        ]
                    )
                )
            parts.append(
                AccessTrace(_addr("sigma_depth", dsts), np.zeros(len(dsts), dtype=bool))
            )
            q_next = forward_push_step(g, state, sigma)
            parts.append(
                AccessTrace(
                    _addr("sigma_depth", q_next.astype(np.int64)),
                    np.ones(len(q_next), dtype=bool),
                )
            )
            if sigma and len(dsts):
                takes = state.depth[dsts] == state.level
                pair = _per_entry(
                    [
                        (_addr("sigma_depth", pad + srcs[takes]), False),
                        (_addr("sigma_depth", pad + dsts[takes]), True),
                    ]
                )
                parts.append(pair)
        else:
            scan_parts = [AccessTrace(q_read, np.zeros(len(q_read), dtype=bool))]
            for blk in bg.blocks():
                rows = blk.id_map.astype(np.int64)
                scan_parts.append(
                    AccessTrace(_addr("sigma_depth", rows), np.zeros(len(rows), dtype=bool))
                )
                unvis = np.flatnonzero(state.depth[rows] == INF_DEPTH)
                if not len(unvis):
                    continue
                pos, _counts = _ragged_take(blk.local_row_offsets, unvis)
                cols = blk.col_indices[pos].astype(np.int64)
                if with_index:
                    offsets_len, _ = _csr_regions(bg)
                    lro_pos = int(bg.row_starts[blk.index]) + blk.index + unvis
                    scan_parts.append(
                        AccessTrace(
                            _addr("csr_index", lro_pos), np.zeros(len(unvis), dtype=bool)
                        )
                    )
                    arena_pos = int(bg.edge_starts[blk.index]) + pos
                    scan_parts.append(
                        AccessTrace(
                            _addr("csr_index", offsets_len + arena_pos),
                            np.zeros(len(arena_pos), dtype=bool),
                        )
                    )
                scan_parts.append(
                    AccessTrace(_addr("frontier", cols), np.zeros(len(cols), dtype=bool))
                )
            q_next = forward_pull_step(bg, state, sigma)
            q64 = q_next.astype(np.int64)
            scan_parts.append(
                AccessTrace(_addr("sigma_depth", q64), np.ones(len(q64), dtype=bool))
            )
            if sigma:
                scan_parts.append(
                    AccessTrace(_addr("sigma_depth", pad + q64), np.ones(len(q64), dtype=bool))
                )
            parts.append(AccessTrace.concat(scan_parts))
        q_write = _addr("frontier", pad * (2 - parity) + np.arange(len(state.frontier)))
        parts.append(AccessTrace(q_write, np.ones(len(q_write), dtype=bool)))
        parity ^= 1
    return AccessTrace.concat(parts)


def trace_kernel(
    kernel: str,
    g: CsrGraph,
    *,
    bg: BlockedGraph | None = None,
    iterations: int = 1,
    width: int | None = None,
    k: int = DEFAULT_RANGE_WIDTH,
    include_index_streams: bool = False,
    source: int = 0,
    policy: DirectionPolicy | None = None,
) -> AccessTrace:
    """Build the access trace of `iterations` passes of the named kernel.

    `kernel` is a combined label like "pr-tocab-pull" or "bc-hybrid" (see
    TRACE_KERNELS). Blocked variants take a prebuilt blocking via `bg` or
    build one from `width`. Traversal kernels run from `source` and trace
    the forward sweep; `policy` overrides the direction choice.
    """
    if kernel not in TRACE_KERNELS:
        raise ValueError(f"unknown kernel label {kernel!r}")
    base, _, suffix = kernel.partition("-")
    weighted = base == "spmv" and g.edge_weights is not None
    if base in ("pr", "spmv"):
        if suffix == "pull-baseline":
            one = _trace_baseline_pull(transpose(g), weighted, include_index_streams)
        elif suffix == "push-baseline":
            one = _trace_baseline_push(g, weighted, include_index_streams)
        elif suffix == "tocab-pull":
            if bg is None:
                bg = partition_tocab(transpose(g), "pull", _need_width(width))
            _check_bg(bg, "tocab", "pull")
            one = AccessTrace.concat(
                [
                    _trace_tocab_pull_edges(bg, weighted, include_index_streams),
                    trace_accumulate(bg, k, include_index_streams),
                ]
            )
        elif suffix == "tocab-push":
            if bg is None:
                bg = partition_tocab(g, "push", _need_width(width))
            _check_bg(bg, "tocab", "push")
            one = _trace_tocab_push(bg, weighted, include_index_streams)
        else:  # cb
            if bg is None:
                bg = partition_cb(transpose(g), _need_width(width))
            _check_bg(bg, "cb", "pull")
            one = _trace_cb(bg, weighted, include_index_streams)
        return one.tile(iterations)
    # traversal
    mode = {"push": "force-push", "pull": "force-pull", "hybrid": "auto"}[suffix]
    if policy is None:
        policy = DirectionPolicy(mode)
    elif policy.mode != mode:
        policy = DirectionPolicy(mode, policy.cache_capacity_bytes, policy.value_bytes)
    one = _trace_traversal(g, bg, policy, source, base == "bc", include_index_streams)
    return one.tile(iterations)


def _need_width(width) -> int:
    if width is None:
        raise ValueError("blocked kernel labels need a width or a prebuilt blocking")
    return width


def _check_bg(bg: BlockedGraph, scheme: str, direction: str) -> None:
    if bg.scheme != scheme or bg.direction != direction:
        raise ValueError(
            f"blocking is {bg.scheme}/{bg.direction}, kernel needs {scheme}/{direction}"
        )


COMPARE_COLUMNS = (
    "graph",
    "kernel",
    "mode",
    "width",
    "k",
    "accesses",
    "misses",
    "miss_rate",
    "misses_per_edge",
)


def compare_modes(
    g: CsrGraph,
    widths,
    cfg: CacheConfig,
    *,
    kernel: str = "pr",
    modes=None,
    k: int = DEFAULT_RANGE_WIDTH,
    include_index_streams: bool = False,
    graph_label: str = "g",
    source: int = 0,
    iterations: int = 1,
    policy: DirectionPolicy | None = None,
) -> list:
    """One row of cache metrics per (mode, width); baselines once with '-'.

    Returns dict rows keyed by COMPARE_COLUMNS. Modes that consume a
    blocking (cb/tocab for value kernels, pull/hybrid traversal) are
    re-partitioned per width; pure baselines ignore the width list.
    """
    widths = list(widths)
    if modes is None:
        modes = PR_MODES if kernel in ("pr", "spmv") else TRAVERSAL_MODES
    if not modes:
        raise ValueError("modes list is empty")
    rows = []
    gt_cache = {}

    def transpose_of():
        if "gt" not in gt_cache:
            gt_cache["gt"] = transpose(g)
        return gt_cache["gt"]

    for mode in modes:
        label = kernel_label(kernel, mode)
        if kernel in ("pr", "spmv"):
            needs_bg = mode in ("cb", "tocab-pull", "tocab-push")
        else:
            needs_bg = mode in ("tocab-pull", "hybrid")
        mode_widths = widths if needs_bg else [None]
        if needs_bg and not widths:
            raise ValueError("widths list is empty")
        for width in mode_widths:
            bg = None
            if needs_bg:
                if kernel in ("bfs", "bc") or mode == "tocab-pull":
                    bg = partition_tocab(transpose_of(), "pull", width)
                elif mode == "tocab-push":
                    bg = partition_tocab(g, "push", width)
                else:
                    bg = partition_cb(transpose_of(), width)
            trace = trace_kernel(
                label,
                g,
                bg=bg,
                k=k,
                iterations=iterations,
                include_index_streams=include_index_streams,
                source=source,
                policy=policy,
            )
            metrics = simulate(trace, cfg, num_edges=g.num_edges)
            rows.append(
                {
                    "graph": graph_label,
                    "kernel": kernel,
                    "mode": mode,
                    "width": width if width is not None else "-",
                    "k": k,
                    "accesses": metrics.accesses,
                    "misses": metrics.misses,
                    "miss_rate": metrics.miss_rate,
                    "misses_per_edge": metrics.misses_per_edge,
                }
            )
    return rows

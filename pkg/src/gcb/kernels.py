"""Rank-propagation and SpMV kernels, baseline and blocked.

Per-row gather sums run in storage order through a jitted sequential loop,
so a brute-force in-order reference reproduces them bit for bit. Scatter
accumulation uses np.bincount, which also adds in storage order.

The blocked pull kernel writes per-block partial sums into a dense local
buffer (indexed by compact local row ids) and a separate accumulation
phase merges those partials into the global output, one contiguous value
range at a time: a range-sized staging buffer collects each block's
contribution (block segments located by binary search on the ascending
id_map), then the range is written back once. The blocked push kernel
scatters directly into the global output, but every write lands inside
the block's value range. The cb scheme has no compaction: each block
reads and writes the global output array across its full height, which
costs one global access pair per (block, row) even for rows with no edges
in the block.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from numba import njit

from gcb.blocking import BlockedGraph, SubgraphBlock
from gcb.graph import CsrGraph
from gcb.util import map_ordered

__all__ = [
    "PrParams",
    "PrResult",
    "VertexValueSet",
    "ScheduleStrategy",
    "compute_contributions",
    "pr_baseline",
    "pr_blocked",
    "process_block_pull",
    "process_block_push",
    "accumulate_ranges",
    "spmv",
    "spmv_blocked",
    "segment_row_sums",
]

DEFAULT_RANGE_WIDTH = 1024


@dataclasses.dataclass(frozen=True)
class PrParams:
    damping: float = 0.85
    tol: float = 1e-4
    max_iters: int = 100

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")
        if self.tol < 0.0:
            raise ValueError("tol must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclasses.dataclass
class PrResult:
    ranks: np.ndarray
    iterations: int
    converged: bool


@dataclasses.dataclass
class VertexValueSet:
    """The per-vertex working arrays one propagation iteration touches."""

    ranks: np.ndarray
    contributions: np.ndarray
    sums: np.ndarray
    partial_sums: np.ndarray | None = None  # arena, blocked pull only

    @classmethod
    def initial(cls, n: int, total_local_rows: int | None = None):
        ranks = np.full(n, 1.0 / n if n else 0.0, dtype=np.float64)
        partial = (
            np.zeros(total_local_rows, dtype=np.float64)
            if total_local_rows is not None
            else None
        )
        return cls(ranks, np.zeros(n), np.zeros(n), partial)


@dataclasses.dataclass(frozen=True)
class ScheduleStrategy:
    """Work-division policy for parallel runs.

    Deterministic runs evaluate in canonical order whatever the strategy,
    which is what makes strategies interchangeable there. In parallel runs
    the strategy picks row-chunk boundaries: chunked-rows cuts fixed row
    counts, edge-balanced cuts at roughly equal edge counts. Fine-grained
    (edge-balanced) division is a push-side tool only: pull rows own their
    output slot exclusively, so they are divided coarsely.
    """

    kind: str = "serial-rows"
    chunk: int = 0
    grain: int = 0

    KINDS = ("serial-rows", "chunked-rows", "edge-balanced")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown schedule strategy {self.kind!r}")
        if self.kind == "chunked-rows" and self.chunk < 1:
            raise ValueError("chunked-rows needs chunk >= 1")
        if self.kind == "edge-balanced" and self.grain < 1:
            raise ValueError("edge-balanced needs grain >= 1")

    @classmethod
    def serial_rows(cls):
        return cls("serial-rows")

    @classmethod
    def chunked_rows(cls, chunk: int):
        return cls("chunked-rows", chunk=chunk)

    @classmethod
    def edge_balanced(cls, grain: int):
        return cls("edge-balanced", grain=grain)

    def row_chunks(self, row_offsets: np.ndarray) -> list[tuple[int, int]]:
        n = len(row_offsets) - 1
        if n == 0:
            return []
        if self.kind == "serial-rows":
            return [(0, n)]
        if self.kind == "chunked-rows":
            bounds = list(range(0, n, self.chunk)) + [n]
            return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        # edge-balanced: cut rows where the cumulative edge count crosses grain
        total = int(row_offsets[-1])
        targets = np.arange(self.grain, total, self.grain, dtype=np.int64)
        cuts = np.searchsorted(row_offsets[1:], targets, side="left") + 1
        bounds = [0] + sorted(set(int(c) for c in cuts if 0 < c < n)) + [n]
        return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def validate_direction(self, direction: str):
        if direction == "pull" and self.kind == "edge-balanced":
            raise ValueError("edge-balanced division is allowed in push only")


# ---------------------------------------------------------------------------
# jitted inner loops (sequential order inside each row)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _gather_rows(values, col, offsets, lo, hi, out):
    for r in range(lo, hi):
        s = 0.0
        for e in range(offsets[r], offsets[r + 1]):
            s += values[col[e]]
        out[r] = s


@njit(cache=True)
def _gather_rows_weighted(values, weights, col, offsets, lo, hi, out):
    for r in range(lo, hi):
        s = 0.0
        for e in range(offsets[r], offsets[r + 1]):
            s += weights[e] * values[col[e]]
        out[r] = s


def segment_row_sums(values, col, offsets, weights=None, out=None):
    """Per-row sum of values[col[e]] (optionally weighted), storage order."""
    nrows = len(offsets) - 1
    if out is None:
        out = np.zeros(nrows, dtype=np.float64)
    if weights is None:
        _gather_rows(values, col, offsets, 0, nrows, out)
    else:
        _gather_rows_weighted(values, weights, col, offsets, 0, nrows, out)
    return out


def compute_contributions(ranks, out_degrees, out=None):
    """rank / out_degree per vertex; vertices with no out-edges contribute 0."""
    if out is None:
        out = np.zeros(len(ranks), dtype=np.float64)
    np.divide(ranks, out_degrees, out=out, where=out_degrees > 0)
    out[out_degrees == 0] = 0.0
    return out


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def _out_degrees_for(g: CsrGraph, direction: str, out_degrees):
    if out_degrees is not None:
        return np.asarray(out_degrees, dtype=np.int64)
    if direction == "push":
        return g.out_degrees
    # pull consumes the transpose, whose column counts are forward out-degrees
    return np.bincount(g.col_indices, minlength=g.num_vertices).astype(np.int64)


def pr_baseline(
    g: CsrGraph,
    direction: str,
    params: PrParams = PrParams(),
    strategy: ScheduleStrategy = ScheduleStrategy.serial_rows(),
    threads: int = 1,
    deterministic: bool = True,
    out_degrees=None,
) -> PrResult:
    """Unblocked rank propagation. For pull, g must be the transposed graph."""
    if direction not in ("pull", "push"):
        raise ValueError(f"direction must be pull or push, got {direction!r}")
    strategy.validate_direction(direction)
    n = g.num_vertices
    deg = _out_degrees_for(g, direction, out_degrees)
    vv = VertexValueSet.initial(n)
    base = (1.0 - params.damping) / n
    iterations = 0
    converged = False
    serial = deterministic or threads <= 1

    for _ in range(params.max_iters):
        compute_contributions(vv.ranks, deg, out=vv.contributions)
        if direction == "pull":
            if serial:
                segment_row_sums(vv.contributions, g.col_indices, g.row_offsets, out=vv.sums)
            else:
                chunks = strategy.row_chunks(g.row_offsets)

                def run(chunk):
                    lo, hi = chunk
                    _gather_rows(vv.contributions, g.col_indices, g.row_offsets, lo, hi, vv.sums)

                map_ordered(run, chunks, threads)
        else:
            if serial:
                per_edge = np.repeat(vv.contributions, g.out_degrees)
                vv.sums = np.bincount(g.col_indices, weights=per_edge, minlength=n)
            else:
                chunks = strategy.row_chunks(g.row_offsets)

                def run(chunk):
                    lo, hi = chunk
                    es, ee = g.row_offsets[lo], g.row_offsets[hi]
                    per_edge = np.repeat(
                        vv.contributions[lo:hi], g.out_degrees[lo:hi]
                    )
                    return np.bincount(
                        g.col_indices[es:ee], weights=per_edge, minlength=n
                    )
                parts = map_ordered(run, chunks, threads)
                vv.sums = np.zeros(n)
                for part in parts:  # fixed chunk order keeps runs reproducible
                    vv.sums += part
        new_ranks = base + params.damping * vv.sums
        delta = float(np.abs(new_ranks - vv.ranks).sum())
        vv.ranks = new_ranks
        iterations += 1
        if delta < params.tol:
            converged = True
            break
    return PrResult(vv.ranks, iterations, converged)


# ---------------------------------------------------------------------------
# blocked kernels
# ---------------------------------------------------------------------------

def process_block_pull(block: SubgraphBlock, contributions, out=None):
    """Partial sums for one pull block, indexed by compact local row id."""
    if out is None:
        out = np.zeros(block.n_local, dtype=np.float64)
    _gather_rows(
        contributions, block.col_indices, block.local_row_offsets, 0, block.n_local, out
    )
    return out


def process_block_push(block: SubgraphBlock, contributions, sums):
    """Scatter one push block's contributions into sums[value_lo:value_hi)."""
    lo, hi = block.value_lo, block.value_hi
    if block.num_edges == 0:
        return sums
    per_edge = np.repeat(
        contributions[block.id_map], np.diff(block.local_row_offsets)
    )
    local = np.bincount(
        block.col_indices.astype(np.int64) - lo, weights=per_edge, minlength=hi - lo
    )
    sums[lo:hi] += local
    return sums


def accumulate_ranges(bg: BlockedGraph, partials, k: int = DEFAULT_RANGE_WIDTH, out=None):
    """Merge per-block partial sums into the global output, range by range."""
    n = bg.num_vertices
    if out is None:
        out = np.zeros(n, dtype=np.float64)
    if k < 1:
        raise ValueError("range width k must be >= 1")
    bounds = bg.range_bounds(k)
    n_ranges = bounds.shape[1] - 1
    buf = np.zeros(min(k, n) if n else 0, dtype=np.float64)
    for j in range(n_ranges):
        lo = j * k
        hi = min(lo + k, n)
        width = hi - lo
        buf[:width] = 0.0
        for b in range(bg.num_blocks):
            s, e = bounds[b, j], bounds[b, j + 1]
            if s < e:
                idx = bg.id_map_arena[s:e].astype(np.int64) - lo
                buf[idx] += partials[s:e]
        out[lo:hi] = buf[:width]
    return out


def _blocked_out_degrees(bg: BlockedGraph) -> np.ndarray:
    if bg.direction == "pull":
        # columns are forward sources; every forward edge appears once
        return np.bincount(bg.col_arena, minlength=bg.num_vertices).astype(np.int64)
    # push: rows are forward sources, possibly split across blocks
    per_row_src = np.repeat(bg.id_map_arena, bg.local_degrees())
    return np.bincount(per_row_src, minlength=bg.num_vertices).astype(np.int64)


def _pull_partials(bg: BlockedGraph, contributions, partials, threads: int):
    def run(b):
        rs, re = int(bg.row_starts[b]), int(bg.row_starts[b + 1])
        es, ee = int(bg.edge_starts[b]), int(bg.edge_starts[b + 1])
        ls = rs + b
        _gather_rows(
            contributions,
            bg.col_arena[es:ee],
            bg.lro_arena[ls : ls + (re - rs) + 1],
            0,
            re - rs,
            partials[rs:re],
        )

    map_ordered(run, range(bg.num_blocks), threads)


def _cb_sums(bg: BlockedGraph, contributions, sums, threads: int):
    """cb: every block accumulates over the full global output array."""
    n = bg.num_vertices

    def run(b):
        out = np.zeros(n, dtype=np.float64)
        seg = bg.lro_arena[b * (n + 1) : (b + 1) * (n + 1)]
        es, ee = int(bg.edge_starts[b]), int(bg.edge_starts[b + 1])
        _gather_rows(contributions, bg.col_arena[es:ee], seg, 0, n, out)
        return out

    parts = map_ordered(run, range(bg.num_blocks), threads)
    sums[:] = 0.0
    for part in parts:  # block order, matching the trace model
        sums += part


def pr_blocked(
    bg: BlockedGraph,
    params: PrParams = PrParams(),
    k: int = DEFAULT_RANGE_WIDTH,
    threads: int = 1,
) -> PrResult:
    """Rank propagation over a blocked graph (tocab pull/push or cb)."""
    n = bg.num_vertices
    deg = _blocked_out_degrees(bg)
    vv = VertexValueSet.initial(
        n, bg.total_local_rows if (bg.scheme == "tocab" and bg.direction == "pull") else None
    )
    base = (1.0 - params.damping) / n
    iterations = 0
    converged = False

    for _ in range(params.max_iters):
        compute_contributions(vv.ranks, deg, out=vv.contributions)
        if bg.scheme == "cb":
            _cb_sums(bg, vv.contributions, vv.sums, threads)
        elif bg.direction == "pull":
            _pull_partials(bg, vv.contributions, vv.partial_sums, threads)
            accumulate_ranges(bg, vv.partial_sums, k, out=vv.sums)
        else:
            vv.sums[:] = 0.0

            def run(b):
                process_block_push(bg.block(b), vv.contributions, vv.sums)

            # blocks own disjoint destination ranges, so this is race-free
            map_ordered(run, range(bg.num_blocks), threads)
        new_ranks = base + params.damping * vv.sums
        delta = float(np.abs(new_ranks - vv.ranks).sum())
        vv.ranks = new_ranks
        iterations += 1
        if delta < params.tol:
            converged = True
            break
    return PrResult(vv.ranks, iterations, converged)


# ---------------------------------------------------------------------------
# sparse matrix-vector product
# ---------------------------------------------------------------------------

def spmv(g: CsrGraph, x, direction: str = "pull") -> np.ndarray:
    """y = A @ x with A given as CSR; unweighted edges count as 1.

    pull: rows of g are output entries (y[r] = sum over stored (r, c) of
    w * x[c]). push: rows are inputs, scattered into their columns.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.num_vertices,):
        raise ValueError("x length must equal num_vertices")
    if direction == "pull":
        return segment_row_sums(x, g.col_indices, g.row_offsets, weights=g.edge_weights)
    if direction != "push":
        raise ValueError(f"direction must be pull or push, got {direction!r}")
    per_edge = np.repeat(x, g.out_degrees)
    if g.edge_weights is not None:
        per_edge = per_edge * g.edge_weights
    return np.bincount(g.col_indices, weights=per_edge, minlength=g.num_vertices)


def spmv_blocked(bg: BlockedGraph, x, k: int = DEFAULT_RANGE_WIDTH, threads: int = 1):
    """Blocked y = A @ x over a tocab or cb blocking."""
    x = np.asarray(x, dtype=np.float64)
    n = bg.num_vertices
    if x.shape != (n,):
        raise ValueError("x length must equal num_vertices")
    y = np.zeros(n, dtype=np.float64)
    if bg.scheme == "cb":
        def run(b):
            out = np.zeros(n, dtype=np.float64)
            seg = bg.lro_arena[b * (n + 1) : (b + 1) * (n + 1)]
            es, ee = int(bg.edge_starts[b]), int(bg.edge_starts[b + 1])
            if bg.weighted:
                _gather_rows_weighted(
                    x, bg.weight_arena[es:ee], bg.col_arena[es:ee], seg, 0, n, out
                )
            else:
                _gather_rows(x, bg.col_arena[es:ee], seg, 0, n, out)
            return out

        for part in map_ordered(run, range(bg.num_blocks), threads):
            y += part
        return y
    if bg.direction == "pull":
        partials = np.zeros(bg.total_local_rows, dtype=np.float64)

        def run(b):
            blk = bg.block(b)
            rs = int(bg.row_starts[b])
            if bg.weighted:
                _gather_rows_weighted(
                    x, blk.edge_weights, blk.col_indices, blk.local_row_offsets,
                    0, blk.n_local, partials[rs : rs + blk.n_local],
                )
            else:
                _gather_rows(
                    x, blk.col_indices, blk.local_row_offsets,
                    0, blk.n_local, partials[rs : rs + blk.n_local],
                )

        map_ordered(run, range(bg.num_blocks), threads)
        return accumulate_ranges(bg, partials, k, out=y)

    def run(b):
        blk = bg.block(b)
        if blk.num_edges == 0:
            return
        per_edge = np.repeat(x[blk.id_map], np.diff(blk.local_row_offsets))
        if bg.weighted:
            per_edge = per_edge * blk.edge_weights
        lo, hi = blk.value_lo, blk.value_hi
        y[lo:hi] += np.bincount(
            blk.col_indices.astype(np.int64) - lo, weights=per_edge, minlength=hi - lo
        )

    map_ordered(run, range(bg.num_blocks), threads)
    return y

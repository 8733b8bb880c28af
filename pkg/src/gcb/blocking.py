"""1D cache blocking of CSR graphs, with compacted or identity row maps.

A blocking splits the column space of a CSR graph into fixed-width
contiguous value ranges and groups edges by the range their column falls
in. For pull-style kernels the input is the transposed graph (rows are
destinations, columns are sources), so blocks bound the source range each
kernel pass reads; for push-style kernels the input is the forward graph
and blocks bound the destination range each pass writes. Either way the
same partitioning code runs on the appropriately oriented CSR.

Two row-map schemes:

* tocab: within each block, only rows with at least one edge get a local
  id; id_map (ascending global ids) translates local back to global. Local
  buffers indexed by these compact ids stay dense.
* cb: every block carries the full identity row map, empty rows included
  with zero-length ranges. Kernels then address the global output array
  from every block, which is exactly the repeated-access overhead the
  compact scheme removes.

All per-block arrays live in contiguous arenas with per-block offset
tables; SubgraphBlock objects are zero-copy views.
"""

from __future__ import annotations

import dataclasses
import struct
import zlib

import numpy as np

from gcb.graph import CsrGraph, GraphFormatError

__all__ = [
    "DEFAULT_BLOCK_WIDTH",
    "SubgraphBlock",
    "BlockedGraph",
    "BlockStats",
    "partition_tocab",
    "partition_cb",
    "block_stats",
    "num_blocks_for",
    "write_gcb",
    "read_gcb",
]

GCB_MAGIC = b"GCB1"
DEFAULT_BLOCK_WIDTH = 262_144  # 2^18 values per block: 1 MiB of 4-byte reals
_FLAG_WEIGHTS = 1  # bit0
_FLAG_CB = 2  # bit1 (reserved space): identity row-map scheme

DEGREE_BINS = ((0, 7), (8, 15), (16, 31), (32, None))


@dataclasses.dataclass(eq=False, repr=False)
class SubgraphBlock:
    """One value-range block; arrays are views into the parent arenas."""

    index: int
    value_lo: int
    value_hi: int
    id_map: np.ndarray  # uint32[n_local], strictly ascending global row ids
    local_row_offsets: np.ndarray  # int64[n_local + 1], starts at 0
    col_indices: np.ndarray  # uint32[num_edges], in [value_lo, value_hi)
    edge_weights: np.ndarray | None = None

    @property
    def n_local(self) -> int:
        return len(self.id_map)

    @property
    def num_edges(self) -> int:
        return int(self.local_row_offsets[-1]) if len(self.local_row_offsets) else 0

    def local_degrees(self) -> np.ndarray:
        return np.diff(self.local_row_offsets)

    def __repr__(self):
        return (
            f"SubgraphBlock(#{self.index}, range=[{self.value_lo},{self.value_hi}), "
            f"rows={self.n_local}, edges={self.num_edges})"
        )


@dataclasses.dataclass(eq=False, repr=False)
class BlockedGraph:
    direction: str  # "pull" | "push"
    scheme: str  # "tocab" | "cb"
    width: int
    num_vertices: int
    num_edges: int
    row_starts: np.ndarray  # int64[B+1], prefix over per-block n_local
    lro_arena: np.ndarray  # int64, per-block (n_local+1)-long segments
    id_map_arena: np.ndarray  # uint32[total_rows]
    edge_starts: np.ndarray  # int64[B+1], prefix over per-block edge counts
    col_arena: np.ndarray  # uint32[num_edges]
    weight_arena: np.ndarray | None = None

    @property
    def num_blocks(self) -> int:
        return len(self.row_starts) - 1

    @property
    def total_local_rows(self) -> int:
        return int(self.row_starts[-1])

    @property
    def weighted(self) -> bool:
        return self.weight_arena is not None

    def value_range(self, b: int) -> tuple[int, int]:
        return b * self.width, min((b + 1) * self.width, self.num_vertices)

    def block(self, b: int) -> SubgraphBlock:
        if not 0 <= b < self.num_blocks:
            raise IndexError(b)
        rs, re = int(self.row_starts[b]), int(self.row_starts[b + 1])
        es, ee = int(self.edge_starts[b]), int(self.edge_starts[b + 1])
        ls = rs + b  # each earlier block contributes one extra offset entry
        lo, hi = self.value_range(b)
        return SubgraphBlock(
            index=b,
            value_lo=lo,
            value_hi=hi,
            id_map=self.id_map_arena[rs:re],
            local_row_offsets=self.lro_arena[ls : ls + (re - rs) + 1],
            col_indices=self.col_arena[es:ee],
            edge_weights=None if self.weight_arena is None else self.weight_arena[es:ee],
        )

    def blocks(self):
        for b in range(self.num_blocks):
            yield self.block(b)

    def local_degrees(self) -> np.ndarray:
        """Per local row edge count, arena order (all blocks concatenated)."""
        if self.total_local_rows == 0:
            return np.zeros(0, dtype=np.int64)
        deg = np.diff(self.lro_arena)
        joints = self.row_starts[1:-1] + np.arange(1, self.num_blocks)
        keep = np.ones(len(deg), dtype=bool)
        keep[joints - 1] = False  # drop the seam between consecutive blocks
        return deg[keep]

    def block_of_row(self) -> np.ndarray:
        """Owning block id per arena row."""
        counts = np.diff(self.row_starts)
        return np.repeat(np.arange(self.num_blocks, dtype=np.int64), counts)

    def range_bounds(self, k: int) -> np.ndarray:
        """Arena positions of each k-wide value range inside every block's id_map.

        bounds[b, j] .. bounds[b, j+1] spans block b's rows whose global id
        falls in [j*k, (j+1)*k); found by binary search on the ascending
        id_map. Cached per k — the accumulate phase asks every iteration.
        """
        cache = getattr(self, "_range_bounds_cache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_range_bounds_cache", cache)
        if k not in cache:
            n_ranges = num_blocks_for(self.num_vertices, k) if self.num_vertices else 0
            grid = np.arange(1, n_ranges + 1, dtype=np.int64) * k
            bounds = np.zeros((self.num_blocks, n_ranges + 1), dtype=np.int64)
            for b in range(self.num_blocks):
                rs, re = int(self.row_starts[b]), int(self.row_starts[b + 1])
                bounds[b, 0] = rs
                bounds[b, 1:] = rs + np.searchsorted(
                    self.id_map_arena[rs:re], grid, side="left"
                )
            cache[k] = bounds
        return cache[k]

    def __repr__(self):
        return (
            f"BlockedGraph({self.scheme}/{self.direction}, width={self.width}, "
            f"blocks={self.num_blocks}, |V|={self.num_vertices}, |E|={self.num_edges})"
        )


def num_blocks_for(num_vertices: int, width: int) -> int:
    """ceil(|V| / width); the block-count law every partition obeys."""
    if width < 1:
        raise ValueError("width must be >= 1")
    return -(-int(num_vertices) // int(width))


def _distribute_edges(g: CsrGraph, width: int):
    """Stable block-major ordering of edges; returns per-edge permutation data.

    Input rows are already canonical (row-major, ascending columns), so a
    stable partition by block keeps rows ascending within each block and
    columns ascending within each (block, row) run.
    """
    n_blocks = num_blocks_for(g.num_vertices, width)
    col = g.col_indices.astype(np.int64)
    blk = col // width
    order = np.argsort(blk, kind="stable")
    row_of_edge = g.edge_sources().astype(np.int64)
    return n_blocks, blk[order], row_of_edge[order], g.col_indices[order], order


def partition_tocab(g: CsrGraph, direction: str, width: int) -> BlockedGraph:
    """Compacted 1D blocking: per block, only rows with edges get local ids."""
    if direction not in ("pull", "push"):
        raise ValueError(f"direction must be pull or push, got {direction!r}")
    n, m = g.num_vertices, g.num_edges
    n_blocks, sblk, srow, scol, order = _distribute_edges(g, width)
    edges_per_block = np.bincount(sblk, minlength=n_blocks).astype(np.int64)
    edge_starts = np.zeros(n_blocks + 1, dtype=np.int64)
    np.cumsum(edges_per_block, out=edge_starts[1:])

    if m:
        new_run = np.empty(m, dtype=bool)
        new_run[0] = True
        new_run[1:] = (sblk[1:] != sblk[:-1]) | (srow[1:] != srow[:-1])
        run_pos = np.flatnonzero(new_run)
        id_map_arena = srow[run_pos].astype(np.uint32)
        run_block = sblk[run_pos]
        run_len = np.diff(np.append(run_pos, m))
    else:
        id_map_arena = np.zeros(0, dtype=np.uint32)
        run_block = np.zeros(0, dtype=np.int64)
        run_len = np.zeros(0, dtype=np.int64)

    rows_per_block = np.bincount(run_block, minlength=n_blocks).astype(np.int64)
    row_starts = np.zeros(n_blocks + 1, dtype=np.int64)
    np.cumsum(rows_per_block, out=row_starts[1:])

    # per-block local offsets from the global run-length prefix sum
    global_cum = np.zeros(len(run_len) + 1, dtype=np.int64)
    np.cumsum(run_len, out=global_cum[1:])
    lro_arena = np.zeros(row_starts[-1] + n_blocks, dtype=np.int64)
    for b in range(n_blocks):
        rs, re = row_starts[b], row_starts[b + 1]
        seg = global_cum[rs : re + 1] - edge_starts[b]
        lro_arena[rs + b : re + b + 1] = seg

    w = None if g.edge_weights is None else g.edge_weights[order]
    return BlockedGraph(
        direction=direction,
        scheme="tocab",
        width=int(width),
        num_vertices=n,
        num_edges=m,
        row_starts=row_starts,
        lro_arena=lro_arena,
        id_map_arena=id_map_arena,
        edge_starts=edge_starts,
        col_arena=scol,
        weight_arena=w,
    )


def partition_cb(g: CsrGraph, width: int) -> BlockedGraph:
    """Conventional blocking: same edge split, identity row map per block."""
    n, m = g.num_vertices, g.num_edges
    n_blocks, sblk, srow, scol, order = _distribute_edges(g, width)
    edges_per_block = np.bincount(sblk, minlength=n_blocks).astype(np.int64)
    edge_starts = np.zeros(n_blocks + 1, dtype=np.int64)
    np.cumsum(edges_per_block, out=edge_starts[1:])

    row_starts = np.arange(n_blocks + 1, dtype=np.int64) * n
    id_map_arena = np.tile(np.arange(n, dtype=np.uint32), n_blocks)
    lro_arena = np.zeros(n_blocks * (n + 1), dtype=np.int64)
    for b in range(n_blocks):
        es, ee = edge_starts[b], edge_starts[b + 1]
        counts = np.bincount(srow[es:ee], minlength=n)
        seg = lro_arena[b * (n + 1) : (b + 1) * (n + 1)]
        np.cumsum(counts, out=seg[1:])

    w = None if g.edge_weights is None else g.edge_weights[order]
    return BlockedGraph(
        direction="pull",
        scheme="cb",
        width=int(width),
        num_vertices=n,
        num_edges=m,
        row_starts=row_starts,
        lro_arena=lro_arena,
        id_map_arena=id_map_arena,
        edge_starts=edge_starts,
        col_arena=scol,
        weight_arena=w,
    )


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class BlockStats:
    num_blocks: int
    rows_per_block: np.ndarray  # int64[B]
    edges_per_block: np.ndarray  # int64[B]
    mean_local_degree: np.ndarray  # float64[B]
    degree_fractions: np.ndarray  # float64[4], bins 0-7 / 8-15 / 16-31 / 32+

    def describe(self) -> list[str]:
        lines = [
            f"blocks: {self.num_blocks}",
            f"local rows: {int(self.rows_per_block.sum())}",
            f"edges: {int(self.edges_per_block.sum())}",
        ]
        for (lo, hi), frac in zip(DEGREE_BINS, self.degree_fractions):
            label = f"{lo}-{hi}" if hi is not None else f"{lo}+"
            lines.append(f"local degree {label}: {100.0 * frac:.1f}%")
        return lines


def block_stats(bg: BlockedGraph) -> BlockStats:
    rows = np.diff(bg.row_starts)
    edges = np.diff(bg.edge_starts)
    with np.errstate(invalid="ignore"):
        mean = np.where(rows > 0, edges / np.maximum(rows, 1), 0.0)
    deg = bg.local_degrees()
    fractions = np.zeros(len(DEGREE_BINS), dtype=np.float64)
    if deg.size:
        edges_bins = np.array([b[0] for b in DEGREE_BINS] + [np.iinfo(np.int64).max])
        hist, _ = np.histogram(deg, bins=edges_bins)
        fractions = hist / deg.size
    return BlockStats(bg.num_blocks, rows, edges, mean, fractions)


# ---------------------------------------------------------------------------
# on-disk container (GCB)
# ---------------------------------------------------------------------------
#
# Little-endian. Header: magic "GCB1", u8 direction (0=pull, 1=push),
# u8 flags (bit0 weights, bit1 identity row-map scheme), u16 reserved,
# u64 num_vertices, num_edges, width, num_blocks. Per block: u64 n_local,
# u64 n_edges, u32 id_map[n_local], u64 local_row_offsets[n_local+1],
# u32 col_indices[n_edges], f64 weights[n_edges] when bit0. Trailing u32
# CRC32 of every preceding byte.

_HEADER = struct.Struct("<4sBBH4Q")


def write_gcb(bg: BlockedGraph, path) -> None:
    parts = [
        _HEADER.pack(
            GCB_MAGIC,
            0 if bg.direction == "pull" else 1,
            (_FLAG_WEIGHTS if bg.weighted else 0) | (_FLAG_CB if bg.scheme == "cb" else 0),
            0,
            bg.num_vertices,
            bg.num_edges,
            bg.width,
            bg.num_blocks,
        )
    ]
    for blk in bg.blocks():
        parts.append(struct.pack("<2Q", blk.n_local, blk.num_edges))
        parts.append(blk.id_map.astype("<u4").tobytes())
        parts.append(blk.local_row_offsets.astype("<u8").tobytes())
        parts.append(blk.col_indices.astype("<u4").tobytes())
        if bg.weighted:
            parts.append(blk.edge_weights.astype("<f8").tobytes())
    payload = b"".join(parts)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    with open(path, "wb") as f:
        f.write(payload)
        f.write(struct.pack("<I", crc))


def read_gcb(path) -> BlockedGraph:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size + 4:
        raise GraphFormatError(f"{path}: truncated container")
    payload, crc_bytes = blob[:-4], blob[-4:]
    (stored_crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise GraphFormatError(f"{path}: CRC mismatch, file is corrupt")
    magic, dir_code, flags, _, n, m, width, n_blocks = _HEADER.unpack_from(payload, 0)
    if magic != GCB_MAGIC:
        raise GraphFormatError(f"{path}: bad magic {magic!r}")
    if dir_code not in (0, 1):
        raise GraphFormatError(f"{path}: bad direction byte {dir_code}")
    weighted = bool(flags & _FLAG_WEIGHTS)
    scheme = "cb" if flags & _FLAG_CB else "tocab"

    pos = _HEADER.size
    id_parts, lro_parts, col_parts, w_parts = [], [], [], []
    rows_per_block = np.zeros(n_blocks, dtype=np.int64)
    edges_per_block = np.zeros(n_blocks, dtype=np.int64)

    def take(dtype, count):
        nonlocal pos
        arr = np.frombuffer(payload, dtype=dtype, count=count, offset=pos)
        pos += arr.nbytes
        return arr

    for b in range(n_blocks):
        if pos + 16 > len(payload):
            raise GraphFormatError(f"{path}: truncated block table")
        n_local, n_edges = struct.unpack_from("<2Q", payload, pos)
        pos += 16
        rows_per_block[b] = n_local
        edges_per_block[b] = n_edges
        id_parts.append(take("<u4", n_local))
        lro = take("<u8", n_local + 1)
        if n_edges != int(lro[-1]):
            raise GraphFormatError(f"{path}: block {b} edge count disagrees")
        lro_parts.append(lro.astype(np.int64))
        col_parts.append(take("<u4", n_edges))
        if weighted:
            w_parts.append(take("<f8", n_edges))
    if pos != len(payload):
        raise GraphFormatError(f"{path}: trailing bytes after last block")

    row_starts = np.zeros(n_blocks + 1, dtype=np.int64)
    np.cumsum(rows_per_block, out=row_starts[1:])
    edge_starts = np.zeros(n_blocks + 1, dtype=np.int64)
    np.cumsum(edges_per_block, out=edge_starts[1:])
    bg = BlockedGraph(
        direction="pull" if dir_code == 0 else "push",
        scheme=scheme,
        width=int(width),
        num_vertices=int(n),
        num_edges=int(m),
        row_starts=row_starts,
        lro_arena=np.concatenate(lro_parts) if lro_parts else np.zeros(0, np.int64),
        id_map_arena=(
            np.concatenate(id_parts).astype(np.uint32)
            if id_parts
            else np.zeros(0, np.uint32)
        ),
        edge_starts=edge_starts,
        col_arena=(
            np.concatenate(col_parts).astype(np.uint32)
            if col_parts
            else np.zeros(0, np.uint32)
        ),
        weight_arena=np.concatenate(w_parts) if weighted and w_parts else None,
    )
    if bg.num_edges != int(edge_starts[-1]):
        raise GraphFormatError(f"{path}: total edges disagree with header")
    return bg

"""CSR graph container, loaders, writers, and synthetic generators.

Graphs are immutable CSR: row_offsets (int64, length n+1), col_indices
(uint32), optional float64 edge weights. Rows are kept in canonical order:
row-major, columns ascending within each row, duplicate edges preserved
(multigraphs are legal input). Vertex ids must fit in 32 bits.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

__all__ = [
    "CsrGraph",
    "GraphFormatError",
    "GraphCapacityError",
    "GraphGenSpec",
    "from_edges",
    "load_edge_list",
    "load_matrix_market",
    "load_graph",
    "write_edge_list",
    "generate",
    "transpose",
    "symmetrize",
]

VERTEX_ID_MAX = 2**32 - 1

# R-MAT quadrant probabilities (top-left, top-right, bottom-left, bottom-right).
RMAT_A, RMAT_B, RMAT_C, RMAT_D = 0.57, 0.19, 0.19, 0.05


class GraphFormatError(ValueError):
    """Malformed input: bad tokens, broken CSR structure, header mismatch."""


class GraphCapacityError(ValueError):
    """Input exceeds the 32-bit vertex id space."""


@dataclasses.dataclass(eq=False, repr=False)
class CsrGraph:
    num_vertices: int
    num_edges: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    edge_weights: np.ndarray | None = None

    def __post_init__(self):
        ro = np.asarray(self.row_offsets, dtype=np.int64)
        col = np.asarray(self.col_indices, dtype=np.uint32)
        n, m = int(self.num_vertices), int(self.num_edges)
        if ro.shape != (n + 1,):
            raise GraphFormatError("row_offsets must have length num_vertices+1")
        if ro[0] != 0 or ro[-1] != m or col.shape != (m,):
            raise GraphFormatError("row_offsets/col_indices disagree with num_edges")
        if m:
            if np.any(np.diff(ro) < 0):
                raise GraphFormatError("row_offsets must be non-decreasing")
            if int(col.max()) >= n:
                raise GraphFormatError("column index out of range")
            # canonical order: ascending within each row
            inner = np.ones(m, dtype=bool)
            inner[0] = False
            starts = ro[1:-1]
            inner[starts[starts < m]] = False
            if m > 1 and np.any(np.diff(col.astype(np.int64))[inner[1:]] < 0):
                raise GraphFormatError("rows must be stored with ascending columns")

        if self.edge_weights is not None:
            w = np.asarray(self.edge_weights, dtype=np.float64)
            if w.shape != (m,):
                raise GraphFormatError("edge_weights length must equal num_edges")
            self.edge_weights = w
        self.row_offsets = ro
        self.col_indices = col
        self._out_degrees = None

    def __repr__(self):
        kind = "weighted" if self.edge_weights is not None else "unweighted"
        return f"CsrGraph(|V|={self.num_vertices}, |E|={self.num_edges}, {kind})"

    @property
    def out_degrees(self) -> np.ndarray:
        if self._out_degrees is None:
            self._out_degrees = np.diff(self.row_offsets)
        return self._out_degrees

    @property
    def weighted(self) -> bool:
        return self.edge_weights is not None

    def row(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v] : self.row_offsets[v + 1]]

    def edge_sources(self) -> np.ndarray:
        """Per-edge source row id, in storage order."""
        return np.repeat(
            np.arange(self.num_vertices, dtype=np.uint32), self.out_degrees
        )

    def transpose(self) -> "CsrGraph":
        return transpose(self)


def from_edges(src, dst, num_vertices=None, weights=None) -> CsrGraph:
    """Build a canonical CSR graph from parallel edge arrays."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if src.shape != dst.shape:
        raise GraphFormatError("src/dst arrays must have equal length")
    m = src.size
    if m and (src.min() < 0 or dst.min() < 0):
        raise GraphFormatError("negative vertex id")
    max_id = int(max(src.max(), dst.max())) if m else -1
    if max_id > VERTEX_ID_MAX:
        raise GraphCapacityError(f"vertex id {max_id} exceeds 32-bit id space")
    n = max_id + 1 if num_vertices is None else int(num_vertices)
    if n <= max_id:
        raise GraphFormatError(f"num_vertices={n} but saw vertex id {max_id}")
    order = np.lexsort((dst, src))
    counts = np.bincount(src, minlength=n)
    ro = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ro[1:])
    w = None if weights is None else np.asarray(weights, dtype=np.float64)[order]
    return CsrGraph(n, m, ro, dst[order].astype(np.uint32), w)


def transpose(g: CsrGraph) -> CsrGraph:
    """Reverse every edge; output is canonical again."""
    src = g.edge_sources()
    w = g.edge_weights
    return from_edges(g.col_indices.astype(np.int64), src.astype(np.int64),
                      num_vertices=g.num_vertices, weights=w)


def symmetrize(g: CsrGraph) -> CsrGraph:
    """Add the reverse of every non-loop edge; weights ride along."""
    src = g.edge_sources()
    dst = g.col_indices.astype(np.int64)
    keep = src != dst
    s2 = np.concatenate([src, dst[keep]])
    d2 = np.concatenate([dst, src[keep]])
    w = None
    if g.edge_weights is not None:
        w = np.concatenate([g.edge_weights, g.edge_weights[keep]])
    return from_edges(s2, d2, num_vertices=g.num_vertices, weights=w)


# ---------------------------------------------------------------------------
# text loaders / writers
# ---------------------------------------------------------------------------

def load_edge_list(path, base="auto", symmetrize=False, num_vertices=None) -> CsrGraph:
    """Load whitespace-separated "src dst [weight]" lines.

    Lines starting with '#' or '%' are comments. base: "zero", "one", or
    "auto" (treat ids as 1-based when no id 0 appears anywhere).
    """
    if base not in ("auto", "zero", "one"):
        raise ValueError(f"base must be auto/zero/one, got {base!r}")
    srcs: list[int] = []
    dsts: list[int] = []
    wts: list[float] = []
    saw_weight = False
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            s = line.strip()
            if not s or s[0] in "#%":
                continue
            parts = s.split()
            if len(parts) not in (2, 3):
                raise GraphFormatError(f"{path}:{lineno}: expected 2 or 3 fields")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: bad vertex id") from None
            if u < 0 or v < 0:
                raise GraphFormatError(f"{path}:{lineno}: negative vertex id")
            if max(u, v) > VERTEX_ID_MAX:
                raise GraphCapacityError(f"{path}:{lineno}: id exceeds 32-bit space")
            if len(parts) == 3:
                try:
                    wts.append(float(parts[2]))
                except ValueError:
                    raise GraphFormatError(f"{path}:{lineno}: bad weight") from None
                saw_weight = True
            elif saw_weight:
                raise GraphFormatError(f"{path}:{lineno}: missing weight field")
            srcs.append(u)
            dsts.append(v)
    src = np.array(srcs, dtype=np.int64)
    dst = np.array(dsts, dtype=np.int64)
    w = np.array(wts, dtype=np.float64) if saw_weight else None
    if src.size:
        lowest = int(min(src.min(), dst.min()))
        if base == "one" and lowest < 1:
            raise GraphFormatError("base=one but found id 0")
        if base == "one" or (base == "auto" and lowest >= 1):
            src -= 1
            dst -= 1
    if symmetrize and src.size:
        keep = src != dst  # self-loops stay single
        src, dst = np.concatenate([src, dst[keep]]), np.concatenate([dst, src[keep]])
        if w is not None:
            w = np.concatenate([w, w[keep]])
    return from_edges(src, dst, num_vertices=num_vertices, weights=w)


def load_matrix_market(path, num_vertices=None) -> CsrGraph:
    """Load a MatrixMarket coordinate file as an adjacency matrix.

    Accepts pattern/real/integer entries, general or symmetric symmetry
    (symmetric expands off-diagonal entries to both directions). Entries are
    1-based: entry (i, j) becomes the directed edge i-1 -> j-1.
    """
    with open(path, "r", encoding="utf-8") as f:
        banner = f.readline()
        tokens = banner.strip().lower().split()
        if len(tokens) != 5 or tokens[0] != "%%matrixmarket" or tokens[1] != "matrix":
            raise GraphFormatError(f"{path}: not a MatrixMarket header")
        fmt, field, symmetry = tokens[2], tokens[3], tokens[4]
        if fmt != "coordinate":
            raise GraphFormatError(f"{path}: only coordinate format supported")
        if field not in ("pattern", "real", "integer"):
            raise GraphFormatError(f"{path}: unsupported field type {field!r}")
        if symmetry not in ("general", "symmetric"):
            raise GraphFormatError(f"{path}: unsupported symmetry {symmetry!r}")
        dims = None
        entries_expected = 0
        srcs: list[int] = []
        dsts: list[int] = []
        wts: list[float] = []
        for lineno, line in enumerate(f, 2):
            s = line.strip()
            if not s or s[0] == "%":
                continue
            parts = s.split()
            if dims is None:
                if len(parts) != 3:
                    raise GraphFormatError(f"{path}:{lineno}: bad dimensions line")
                rows, cols, entries_expected = (int(p) for p in parts)
                dims = (rows, cols)
                continue
            want = 2 if field == "pattern" else 3
            if len(parts) != want:
                raise GraphFormatError(f"{path}:{lineno}: expected {want} fields")
            i, j = int(parts[0]), int(parts[1])
            if not (1 <= i <= dims[0] and 1 <= j <= dims[1]):
                raise GraphFormatError(f"{path}:{lineno}: entry out of bounds")
            srcs.append(i - 1)
            dsts.append(j - 1)
            if field != "pattern":
                wts.append(float(parts[2]))
        if dims is None:
            raise GraphFormatError(f"{path}: missing dimensions line")
        if len(srcs) != entries_expected:
            raise GraphFormatError(
                f"{path}: header promises {entries_expected} entries, found {len(srcs)}"
            )
    src = np.array(srcs, dtype=np.int64)
    dst = np.array(dsts, dtype=np.int64)
    w = np.array(wts, dtype=np.float64) if field != "pattern" else None
    if symmetry == "symmetric" and src.size:
        keep = src != dst  # diagonal entries are not doubled
        src, dst = np.concatenate([src, dst[keep]]), np.concatenate([dst, src[keep]])
        if w is not None:
            w = np.concatenate([w, w[keep]])
    n = max(dims) if num_vertices is None else int(num_vertices)
    return from_edges(src, dst, num_vertices=n, weights=w)


def write_edge_list(g: CsrGraph, path) -> None:
    """Write "src dst [weight]" lines in storage order (round-trips exactly)."""
    src = g.edge_sources()
    with open(path, "w", encoding="utf-8") as f:
        if g.weighted:
            for u, v, w in zip(src, g.col_indices, g.edge_weights):
                f.write(f"{u} {v} {float(w)!r}\n")
        else:
            for u, v in zip(src, g.col_indices):
                f.write(f"{u} {v}\n")


def load_graph(path, **kwargs) -> CsrGraph:
    """Dispatch on extension: .mtx -> MatrixMarket, anything else edge list."""
    if str(path).endswith(".mtx"):
        kwargs.pop("base", None)
        kwargs.pop("symmetrize", None)
        return load_matrix_market(path, **kwargs)
    return load_edge_list(path, **kwargs)


# ---------------------------------------------------------------------------
# synthetic generators
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class GraphGenSpec:
    """Synthetic graph request: rmat:SCALE:EF:SEED or path/cycle/star/complete:N."""

    kind: str
    scale: int = 0
    size: int = 0
    edge_factor: int = 8
    seed: int = 1

    KINDS = ("rmat", "path", "cycle", "star", "complete")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.kind == "rmat":
            if not (1 <= self.scale <= 31):
                raise GraphCapacityError("rmat scale must be in [1, 31]")
            if self.edge_factor < 1:
                raise ValueError("edge_factor must be >= 1")
        elif self.size < 1:
            raise ValueError(f"{self.kind} size must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "GraphGenSpec":
        parts = str(text).split(":")
        kind = parts[0]
        if kind == "rmat":
            if len(parts) not in (3, 4):
                raise ValueError("expected rmat:SCALE:EDGE_FACTOR[:SEED]")
            seed = int(parts[3]) if len(parts) == 4 else 1
            return cls("rmat", scale=int(parts[1]), edge_factor=int(parts[2]), seed=seed)
        if kind in ("path", "cycle", "star", "complete") and len(parts) == 2:
            return cls(kind, size=int(parts[1]))
        raise ValueError(f"cannot parse generator spec {text!r}")

    def label(self) -> str:
        if self.kind == "rmat":
            return f"rmat:{self.scale}:{self.edge_factor}:{self.seed}"
        return f"{self.kind}:{self.size}"

    @property
    def num_vertices(self) -> int:
        return 2**self.scale if self.kind == "rmat" else self.size


def generate(spec: GraphGenSpec) -> CsrGraph:
    """Deterministic synthetic graphs; same spec always yields the same bytes."""
    if spec.kind == "rmat":
        return _generate_rmat(spec.scale, spec.edge_factor, spec.seed)
    n = spec.size
    if spec.kind == "path":
        src = np.arange(n - 1, dtype=np.int64)
        return from_edges(src, src + 1, num_vertices=n)
    if spec.kind == "cycle":
        src = np.arange(n, dtype=np.int64)
        return from_edges(src, (src + 1) % n, num_vertices=n)
    if spec.kind == "star":
        dst = np.arange(1, n, dtype=np.int64)
        return from_edges(np.zeros(n - 1, dtype=np.int64), dst, num_vertices=n)
    if spec.kind == "complete":
        src = np.repeat(np.arange(n, dtype=np.int64), n - 1)
        dst = np.concatenate(
            [np.delete(np.arange(n, dtype=np.int64), v) for v in range(n)]
        ) if n > 1 else np.array([], np.int64)
        return from_edges(src, dst, num_vertices=n)
    raise ValueError(spec.kind)


def _generate_rmat(scale: int, edge_factor: int, seed: int) -> CsrGraph:
    """Recursive-quadrant generator; duplicates and self-loops are kept."""
    n = 1 << scale
    m = edge_factor * n
    rng = np.random.default_rng(seed)
    src = np.zeros(m, dtype=np.int64)
    dst = np.zeros(m, dtype=np.int64)
    t_ab = RMAT_A + RMAT_B
    t_abc = t_ab + RMAT_C
    for _ in range(scale):
        r = rng.random(m)
        src_bit = r >= t_ab
        dst_bit = ((r >= RMAT_A) & (r < t_ab)) | (r >= t_abc)
        src = (src << 1) | src_bit
        dst = (dst << 1) | dst_bit
    return from_edges(src, dst, num_vertices=n)

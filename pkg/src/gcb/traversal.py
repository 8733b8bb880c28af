"""Level-synchronous BFS and betweenness centrality with direction switching.

The forward phase expands one level per step. A push step walks the
frontier queue and stamps unvisited out-neighbors; a compare-and-set
discipline admits each vertex into the next queue at most once per level.
A pull step runs over a column blocking of the transposed graph: each
block scans its not-yet-visited rows for in-range frontier sources,
recording discovery flags and partial path counts in block-local arrays
that a reduce pass merges in the same sweep. Path counts (sigma) ride
along with discovery in both directions, so the backward dependency pass
is direction-agnostic.

Direction choice per level: blocked pull when the frontier's total
out-degree, in value bytes, exceeds the cache capacity; the thresholds
live in DirectionPolicy and can be forced either way.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from gcb.blocking import BlockedGraph, partition_tocab
from gcb.graph import CsrGraph, transpose
from gcb.kernels import segment_row_sums

__all__ = [
    "INF_DEPTH",
    "DirectionPolicy",
    "TraversalState",
    "BfsResult",
    "BcResult",
    "choose_direction",
    "forward_push_step",
    "forward_pull_step",
    "bfs",
    "bc",
    "bc_single_source",
    "bc_backward",
]

INF_DEPTH = np.iinfo(np.int32).max  # unvisited sentinel


@dataclasses.dataclass(frozen=True)
class DirectionPolicy:
    """When to pull: frontier working set (sum of out-degrees times the
    per-vertex value size) larger than the cache capacity."""

    mode: str = "auto"  # auto | force-push | force-pull
    cache_capacity_bytes: int = 2_883_584
    value_bytes: int = 4

    MODES = ("auto", "force-push", "force-pull")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ValueError(f"unknown direction mode {self.mode!r}")
        if self.cache_capacity_bytes < 1 or self.value_bytes < 1:
            raise ValueError("capacity and value size must be positive")


@dataclasses.dataclass
class TraversalState:
    depth: np.ndarray  # int32, INF_DEPTH = unvisited
    sigma: np.ndarray  # float64 shortest-path counts
    frontier: np.ndarray  # uint32 queue, ascending within a level
    level: int = 0

    @classmethod
    def initial(cls, n: int, source: int) -> "TraversalState":
        depth = np.full(n, INF_DEPTH, dtype=np.int32)
        sigma = np.zeros(n, dtype=np.float64)
        depth[source] = 0
        sigma[source] = 1.0
        return cls(depth, sigma, np.array([source], dtype=np.uint32))


@dataclasses.dataclass
class BfsResult:
    depth: np.ndarray
    levels: list  # per-level frontier queues, level 0 first
    directions: list  # "push" | "blocked-pull" chosen per expansion


@dataclasses.dataclass
class BcResult:
    centrality: np.ndarray
    sources: np.ndarray


def choose_direction(g: CsrGraph, state: TraversalState, policy: DirectionPolicy) -> str:
    if policy.mode == "force-push":
        return "push"
    if policy.mode == "force-pull":
        return "blocked-pull"
    working_set = int(g.out_degrees[state.frontier].sum()) * policy.value_bytes
    return "blocked-pull" if working_set > policy.cache_capacity_bytes else "push"


def _expand_indices(g: CsrGraph, frontier: np.ndarray):
    """Out-edges of the frontier in queue order: (sources, dsts, edge ids)."""
    counts = g.out_degrees[frontier]
    total = int(counts.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    starts = g.row_offsets[frontier]
    bases = np.repeat(np.cumsum(counts) - counts, counts)
    edge_idx = np.repeat(starts, counts) + (np.arange(total) - bases)
    srcs = np.repeat(frontier.astype(np.int64), counts)
    return srcs, g.col_indices[edge_idx].astype(np.int64), edge_idx


def _expand(g: CsrGraph, frontier: np.ndarray):
    srcs, dsts, _ = _expand_indices(g, frontier)
    return srcs, dsts


def forward_push_step(g: CsrGraph, state: TraversalState, accumulate_sigma: bool):
    """Expand one level through the frontier queue (data-driven).

    Each newly seen destination is stamped with level+1 and enters the
    next queue exactly once; path counts flow along every edge whose
    endpoint sits one level deeper.
    """
    srcs, dsts = _expand(g, state.frontier)
    next_level = state.level + 1
    unvisited = state.depth[dsts] == INF_DEPTH
    state.depth[dsts[unvisited]] = next_level
    q_next = np.unique(dsts[unvisited]).astype(np.uint32)
    if accumulate_sigma and dsts.size:
        takes = state.depth[dsts] == next_level
        state.sigma += np.bincount(
            dsts[takes], weights=state.sigma[srcs[takes]], minlength=len(state.sigma)
        )
    state.frontier = q_next
    state.level = next_level
    return q_next


def forward_pull_step(
    g_blocked: BlockedGraph, state: TraversalState, accumulate_sigma: bool
):
    """Expand one level by scanning unvisited rows of each pull block.

    Per block: a row (global destination) that is still unvisited checks
    its in-range sources against the frontier status array; discovery
    flags and partial sigma land in block-local buffers merged here in
    the same pass. Depth updates apply after the sweep so every block
    sees the pre-level state.
    """
    n = len(state.depth)
    front_mask = np.zeros(n, dtype=np.float64)
    front_mask[state.frontier] = 1.0
    sigma_gather = state.sigma * front_mask if accumulate_sigma else front_mask
    found = np.zeros(n, dtype=bool)
    sigma_add = np.zeros(n, dtype=np.float64)
    for blk in g_blocked.blocks():
        rows = blk.id_map.astype(np.int64)
        unvis = state.depth[rows] == INF_DEPTH
        if not unvis.any():
            continue
        partial = segment_row_sums(sigma_gather, blk.col_indices, blk.local_row_offsets)
        hits = unvis & (partial > 0.0)
        if hits.any():
            found[rows[hits]] = True
            sigma_add[rows[hits]] += partial[hits]
    q_next = np.flatnonzero(found).astype(np.uint32)
    state.depth[q_next] = state.level + 1
    if accumulate_sigma:
        state.sigma[q_next] += sigma_add[q_next]
    state.frontier = q_next
    state.level += 1
    return q_next


def _forward(g, g_blocked, source, policy, accumulate_sigma):
    n = g.num_vertices
    if not 0 <= source < n:
        raise ValueError(f"source {source} out of range")
    state = TraversalState.initial(n, source)
    levels = [state.frontier.copy()]
    directions = []
    needs_pull = policy.mode != "force-push"
    if needs_pull and g_blocked is None:
        g_blocked = partition_tocab(transpose(g), "pull", max(1, n // 8))
    while state.frontier.size:
        step_dir = choose_direction(g, state, policy)
        directions.append(step_dir)
        if step_dir == "push":
            forward_push_step(g, state, accumulate_sigma)
        else:
            forward_pull_step(g_blocked, state, accumulate_sigma)
        if state.frontier.size:
            levels.append(state.frontier.copy())
    return state, levels, directions


def bfs(
    g: CsrGraph,
    source: int,
    g_blocked: BlockedGraph | None = None,
    policy: DirectionPolicy = DirectionPolicy(),
) -> BfsResult:
    """Level-synchronous BFS; depth carries INF_DEPTH for unreached vertices."""
    state, levels, directions = _forward(g, g_blocked, source, policy, False)
    return BfsResult(state.depth, levels, directions)


def bc_backward(g: CsrGraph, depth: np.ndarray, sigma: np.ndarray, source: int):
    """Dependency accumulation over the shortest-path DAG, deepest level first.

    delta[v] = sum over out-edges v->w one level deeper of
    (sigma[v]/sigma[w]) * (1 + delta[w]); parallel edges count once each.
    """
    n = g.num_vertices
    delta = np.zeros(n, dtype=np.float64)
    reached = depth != INF_DEPTH
    if not reached.any():
        return delta
    max_level = int(depth[reached].max())
    for level in range(max_level - 1, -1, -1):
        verts = np.flatnonzero(reached & (depth == level)).astype(np.uint32)
        if not verts.size:
            continue
        srcs, dsts = _expand(g, verts)
        if not srcs.size:
            continue
        ok = depth[dsts] == level + 1
        if not ok.any():
            continue
        contrib = (sigma[srcs[ok]] / sigma[dsts[ok]]) * (1.0 + delta[dsts[ok]])
        delta += np.bincount(srcs[ok], weights=contrib, minlength=n)
    delta[source] = 0.0
    return delta


def bc_single_source(
    g: CsrGraph,
    source: int,
    g_blocked: BlockedGraph | None = None,
    policy: DirectionPolicy = DirectionPolicy(),
):
    """One source's forward sweep + dependency pass.

    Returns (delta, state, levels): delta is this source's centrality
    contribution (endpoints excluded, no normalization).
    """
    state, levels, _ = _forward(g, g_blocked, source, policy, True)
    delta = bc_backward(g, state.depth, state.sigma, source)
    return delta, state, levels


def bc(
    g: CsrGraph,
    sources,
    g_blocked: BlockedGraph | None = None,
    policy: DirectionPolicy = DirectionPolicy(),
) -> BcResult:
    """Betweenness centrality accumulated over the given sources.

    Ordered-pair dependencies; run over all vertices as sources for the
    classic directed definition (symmetrize the graph at load time for the
    undirected one).
    """
    sources = np.asarray(sources, dtype=np.int64)
    centrality = np.zeros(g.num_vertices, dtype=np.float64)
    needs_pull = policy.mode != "force-push"
    if needs_pull and g_blocked is None:
        g_blocked = partition_tocab(
            transpose(g), "pull", max(1, g.num_vertices // 8)
        )
    for s in sources:
        delta, _, _ = bc_single_source(g, int(s), g_blocked, policy)
        centrality += delta
    return BcResult(centrality, sources)


def sample_sources(g: CsrGraph, count: int, seed: int = 12345) -> np.ndarray:
    """Deterministic uniform source sample (without replacement when possible)."""
    rng = np.random.default_rng(seed)
    n = g.num_vertices
    if count >= n:
        return np.arange(n, dtype=np.int64)
    return np.sort(rng.choice(n, size=count, replace=False)).astype(np.int64)

import numpy as np
import pytest

from gcb.blocking import partition_cb, partition_tocab
from gcb.cachesim import CLASS_IDS, CacheConfig, class_of, simulate
from gcb.graph import GraphGenSpec, from_edges, generate, transpose
from gcb.traces import (
    COMPARE_COLUMNS,
    PR_MODES,
    TRACE_KERNELS,
    TRAVERSAL_MODES,
    compare_modes,
    kernel_label,
    trace_accumulate,
    trace_kernel,
)
from gcb.traversal import DirectionPolicy
from oracles import random_digraph

PAD = 1024  # sub-array padding used by the traversal trace layout


def gen(text):
    return generate(GraphGenSpec.parse(text))


def fmt(events):
    return [f"{c} {i} {'write' if w else 'read'}" for c, i, w in events]


def lines(trace):
    return list(trace.dump())


# ---------------------------------------------------------------------------
# reference builders: straight python loops, one append per traced event
# ---------------------------------------------------------------------------

def ref_pull_baseline(gt, weighted=False, with_index=False):
    L = gt.num_vertices + 1
    ev = []
    for r in range(gt.num_vertices):
        lo, hi = int(gt.row_offsets[r]), int(gt.row_offsets[r + 1])
        if lo == hi:
            continue
        if with_index:
            ev.append(("csr_index", r, False))
        for p in range(lo, hi):
            if with_index:
                ev.append(("csr_index", L + p, False))
            ev.append(("contributions", int(gt.col_indices[p]), False))
            if weighted:
                ev.append(("edge_values", p, False))
        ev.append(("sums", r, True))
    return ev


def ref_push_baseline(g, weighted=False, with_index=False):
    L = g.num_vertices + 1
    ev = []
    for r in range(g.num_vertices):
        lo, hi = int(g.row_offsets[r]), int(g.row_offsets[r + 1])
        if lo == hi:
            continue
        if with_index:
            ev.append(("csr_index", r, False))
        ev.append(("contributions", r, False))
        for p in range(lo, hi):
            if with_index:
                ev.append(("csr_index", L + p, False))
            if weighted:
                ev.append(("edge_values", p, False))
            ev.append(("sums", int(g.col_indices[p]), True))
    return ev


def ref_tocab_pull_edges(bg, weighted=False, with_index=False):
    L = len(bg.lro_arena)
    ev = []
    pos = 0
    for b in range(bg.num_blocks):
        blk = bg.block(b)
        for i in range(blk.n_local):
            if with_index:
                ev.append(("csr_index", pos + b, False))
            for e in range(int(blk.local_row_offsets[i]), int(blk.local_row_offsets[i + 1])):
                ge = int(bg.edge_starts[b]) + e
                if with_index:
                    ev.append(("csr_index", L + ge, False))
                ev.append(("contributions", int(blk.col_indices[e]), False))
                if weighted:
                    ev.append(("edge_values", ge, False))
            ev.append(("partial_sums", pos, True))
            pos += 1
    return ev


def ref_accumulate(bg, k, with_index=False):
    if bg.total_local_rows == 0:
        return []
    L, E = len(bg.lro_arena), len(bg.col_arena)
    ev = []
    n_ranges = (bg.num_vertices + k - 1) // k
    for j in range(n_ranges):
        lo, hi = j * k, (j + 1) * k
        for b in range(bg.num_blocks):
            for pos in range(int(bg.row_starts[b]), int(bg.row_starts[b + 1])):
                t = int(bg.id_map_arena[pos])
                if lo <= t < hi:
                    ev.append(("partial_sums", pos, False))
                    if with_index:
                        ev.append(("csr_index", L + E + pos, False))
                    ev.append(("sums", t, True))
    return ev


def ref_tocab_push(bg, weighted=False, with_index=False):
    L, E = len(bg.lro_arena), len(bg.col_arena)
    ev = []
    pos = 0
    for b in range(bg.num_blocks):
        blk = bg.block(b)
        for i in range(blk.n_local):
            if with_index:
                ev.append(("csr_index", pos + b, False))
                ev.append(("csr_index", L + E + pos, False))
            ev.append(("contributions", int(bg.id_map_arena[pos]), False))
            for e in range(int(blk.local_row_offsets[i]), int(blk.local_row_offsets[i + 1])):
                ge = int(bg.edge_starts[b]) + e
                if with_index:
                    ev.append(("csr_index", L + ge, False))
                if weighted:
                    ev.append(("edge_values", ge, False))
                ev.append(("sums", int(blk.col_indices[e]), True))
            pos += 1
    return ev


def ref_cb(bg, weighted=False, with_index=False):
    L = len(bg.lro_arena)
    n = bg.num_vertices
    ev = []
    for b in range(bg.num_blocks):
        seg = bg.lro_arena[b * (n + 1) : (b + 1) * (n + 1)]
        for r in range(n):
            if with_index:
                ev.append(("csr_index", b * (n + 1) + r, False))
            ev.append(("sums", r, False))
            for e in range(int(seg[r]), int(seg[r + 1])):
                ge = int(bg.edge_starts[b]) + e
                if with_index:
                    ev.append(("csr_index", L + ge, False))
                ev.append(("contributions", int(bg.col_arena[ge]), False))
                if weighted:
                    ev.append(("edge_values", ge, False))
            ev.append(("sums", r, True))
    return ev


class TestKernelLabels:
    def test_value_kernel_labels(self):
        assert kernel_label("pr", "baseline-pull") == "pr-pull-baseline"
        assert kernel_label("spmv", "tocab-push") == "spmv-tocab-push"
        assert kernel_label("pr", "cb") == "pr-cb"

    def test_traversal_labels(self):
        assert kernel_label("bfs", "baseline-push") == "bfs-push"
        assert kernel_label("bc", "tocab-pull") == "bc-pull"
        assert kernel_label("bfs", "hybrid") == "bfs-hybrid"

    def test_rejects_mismatches(self):
        with pytest.raises(ValueError):
            kernel_label("bfs", "cb")
        with pytest.raises(ValueError):
            kernel_label("pr", "hybrid")
        with pytest.raises(ValueError):
            kernel_label("sort", "baseline-pull")

    def test_all_labels_enumerated(self):
        assert len(TRACE_KERNELS) == 2 * 5 + 2 * 3
        assert "pr-tocab-pull" in TRACE_KERNELS
        assert "bc-hybrid" in TRACE_KERNELS


class TestHandExamples:
    def test_pull_baseline_two_edge_chain(self):
        t = trace_kernel("pr-pull-baseline", gen("path:3"))
        assert lines(t) == [
            "contributions 0 read",
            "sums 1 write",
            "contributions 1 read",
            "sums 2 write",
        ]

    def test_push_baseline_two_edge_chain(self):
        t = trace_kernel("pr-push-baseline", gen("path:3"))
        assert lines(t) == [
            "contributions 0 read",
            "sums 1 write",
            "contributions 1 read",
            "sums 2 write",
        ]

    def test_tocab_pull_chain_width_two(self):
        t = trace_kernel("pr-tocab-pull", gen("path:4"), width=2, k=2)
        assert lines(t) == [
            # edge phase: compact rows write the partial arena in order
            "contributions 0 read",
            "partial_sums 0 write",
            "contributions 1 read",
            "partial_sums 1 write",
            "contributions 2 read",
            "partial_sums 2 write",
            # merge phase: range-major, block-minor
            "partial_sums 0 read",
            "sums 1 write",
            "partial_sums 1 read",
            "sums 2 write",
            "partial_sums 2 read",
            "sums 3 write",
        ]

    def test_cb_touches_every_row_in_every_block(self):
        g = gen("path:4")
        t = trace_kernel("pr-cb", g, width=2)
        got = lines(t)
        # 2 blocks x 4 rows, read-before/write-after around each row's edges
        assert len(got) == 2 * 4 * 2 + g.num_edges
        assert got[:3] == ["sums 0 read", "sums 0 write", "sums 1 read"]
        assert got.count("sums 3 read") == 2 and got.count("sums 3 write") == 2

    def test_bfs_push_star_event_sequence(self):
        t = trace_kernel("bfs-push", gen("star:5"))
        assert lines(t) == (
            [f"frontier {PAD} read"]
            + [f"sigma_depth {v} read" for v in (1, 2, 3, 4)]
            + [f"sigma_depth {v} write" for v in (1, 2, 3, 4)]
            + [f"frontier {2 * PAD + i} write" for i in range(4)]
            + [f"frontier {2 * PAD + i} read" for i in range(4)]
        )

    def test_bc_push_star_adds_sigma_pairs(self):
        t = trace_kernel("bc-push", gen("star:5"))
        pairs = []
        for v in (1, 2, 3, 4):
            pairs += [f"sigma_depth {PAD} read", f"sigma_depth {PAD + v} write"]
        assert lines(t) == (
            [f"frontier {PAD} read"]
            + [f"sigma_depth {v} read" for v in (1, 2, 3, 4)]
            + [f"sigma_depth {v} write" for v in (1, 2, 3, 4)]
            + pairs
            + [f"frontier {2 * PAD + i} write" for i in range(4)]
            + [f"frontier {2 * PAD + i} read" for i in range(4)]
        )

    def test_bfs_pull_chain_event_sequence(self):
        g = gen("path:3")
        bg = partition_tocab(transpose(g), "pull", 3)
        t = trace_kernel("bfs-pull", g, bg=bg)
        assert lines(t) == [
            # level 0: scan both unvisited rows, find vertex 1
            f"frontier {PAD} read",
            "sigma_depth 1 read",
            "sigma_depth 2 read",
            "frontier 0 read",
            "frontier 1 read",
            "sigma_depth 1 write",
            f"frontier {2 * PAD} write",
            # level 1: row 2 remains, finds vertex 2
            f"frontier {2 * PAD} read",
            "sigma_depth 1 read",
            "sigma_depth 2 read",
            "frontier 1 read",
            "sigma_depth 2 write",
            f"frontier {PAD} write",
            # level 2: nothing unvisited, queue drains
            f"frontier {PAD} read",
            "sigma_depth 1 read",
            "sigma_depth 2 read",
        ]


class TestAgainstReferenceBuilders:
    @pytest.mark.parametrize("with_index", [False, True])
    def test_pull_baseline(self, rng, with_index):
        g = random_digraph(rng, 30, 120)
        got = lines(trace_kernel("pr-pull-baseline", g, include_index_streams=with_index))
        assert got == fmt(ref_pull_baseline(transpose(g), False, with_index))

    @pytest.mark.parametrize("with_index", [False, True])
    def test_push_baseline(self, rng, with_index):
        g = random_digraph(rng, 30, 120)
        got = lines(trace_kernel("pr-push-baseline", g, include_index_streams=with_index))
        assert got == fmt(ref_push_baseline(g, False, with_index))

    @pytest.mark.parametrize("with_index", [False, True])
    @pytest.mark.parametrize("k", [1, 4, 16, 1024])
    def test_tocab_pull(self, rng, with_index, k):
        g = random_digraph(rng, 40, 200)
        bg = partition_tocab(transpose(g), "pull", 8)
        got = lines(
            trace_kernel("pr-tocab-pull", g, bg=bg, k=k, include_index_streams=with_index)
        )
        want = fmt(
            ref_tocab_pull_edges(bg, False, with_index) + ref_accumulate(bg, k, with_index)
        )
        assert got == want

    @pytest.mark.parametrize("with_index", [False, True])
    def test_tocab_push(self, rng, with_index):
        g = random_digraph(rng, 40, 200)
        bg = partition_tocab(g, "push", 8)
        got = lines(trace_kernel("pr-tocab-push", g, bg=bg, include_index_streams=with_index))
        assert got == fmt(ref_tocab_push(bg, False, with_index))

    @pytest.mark.parametrize("with_index", [False, True])
    def test_cb(self, rng, with_index):
        g = random_digraph(rng, 40, 200)
        bg = partition_cb(transpose(g), 8)
        got = lines(trace_kernel("pr-cb", g, bg=bg, include_index_streams=with_index))
        assert got == fmt(ref_cb(bg, False, with_index))

    @pytest.mark.parametrize("label_mode", ["pull-baseline", "push-baseline", "tocab-pull", "tocab-push", "cb"])
    def test_spmv_weighted_streams(self, rng, label_mode):
        g = random_digraph(rng, 30, 150, weights=True)
        kwargs = {} if "baseline" in label_mode else {"width": 8}
        t = trace_kernel(f"spmv-{label_mode}", g, **kwargs)
        counts = t.class_counts()
        assert counts.get("edge_values", 0) == g.num_edges
        # the same mode under pr never streams weights
        t_pr = trace_kernel(f"pr-{label_mode}", g, **kwargs)
        assert "edge_values" not in t_pr.class_counts()

    def test_spmv_weighted_cb_full_order(self, rng):
        g = random_digraph(rng, 25, 100, weights=True)
        bg = partition_cb(transpose(g), 8)
        got = lines(trace_kernel("spmv-cb", g, bg=bg, include_index_streams=True))
        assert got == fmt(ref_cb(bg, True, True))

    def test_spmv_weighted_tocab_pull_full_order(self, rng):
        g = random_digraph(rng, 25, 100, weights=True)
        bg = partition_tocab(transpose(g), "pull", 8)
        got = lines(trace_kernel("spmv-tocab-pull", g, bg=bg, k=8, include_index_streams=True))
        assert got == fmt(ref_tocab_pull_edges(bg, True, True) + ref_accumulate(bg, 8, True))


class TestTraceProperties:
    def test_partial_writes_strictly_increase(self, rng):
        g = random_digraph(rng, 60, 400)
        bg = partition_tocab(transpose(g), "pull", 16)
        t = trace_kernel("pr-tocab-pull", g, bg=bg)
        cls = class_of(t.addresses)
        writes = t.is_write & (cls == CLASS_IDS["partial_sums"])
        idx = t.element_indices()[writes]
        assert (np.diff(idx) > 0).all()
        assert idx[0] == 0 and idx[-1] == bg.total_local_rows - 1

    def test_contribution_reads_stay_in_block_range(self, rng):
        g = random_digraph(rng, 60, 400)
        bg = partition_tocab(transpose(g), "pull", 16)
        t = trace_kernel("pr-tocab-pull", g, bg=bg)
        cls = class_of(t.addresses)
        reads = t.element_indices()[(cls == CLASS_IDS["contributions"]) & ~t.is_write]
        # reads appear in arena edge order, so split them by block edge counts
        splits = np.cumsum(np.diff(bg.edge_starts))[:-1]
        for b, chunk in enumerate(np.split(reads, splits)):
            lo, hi = bg.value_range(b)
            if len(chunk):
                assert chunk.min() >= lo and chunk.max() < hi

    def test_cb_store_counts_exceed_tocab(self, rng):
        g = random_digraph(rng, 48, 220)
        cb = partition_cb(transpose(g), 8)
        toc = partition_tocab(transpose(g), "pull", 8)
        assert toc.total_local_rows < cb.num_blocks * g.num_vertices  # some row omitted
        cb_stores = trace_kernel("pr-cb", g, bg=cb).store_counts()["sums"]
        toc_stores = trace_kernel("pr-tocab-pull", g, bg=toc).store_counts()["partial_sums"]
        assert cb_stores == cb.num_blocks * g.num_vertices
        assert cb_stores > toc_stores

    def test_single_block_matches_baseline_miss_rate(self):
        # a blocking wider than the graph degenerates to the baseline plus
        # an arena detour; the cache should barely notice
        cfg = CacheConfig(capacity_bytes=8192, line_bytes=64, associativity=4)
        for spec in ("rmat:12:16:3", "rmat:12:32:3"):
            g = gen(spec)
            base = simulate(trace_kernel("pr-pull-baseline", g), cfg, num_edges=g.num_edges)
            bg = partition_tocab(transpose(g), "pull", g.num_vertices)
            assert bg.num_blocks == 1
            toc = simulate(
                trace_kernel("pr-tocab-pull", g, bg=bg, k=64), cfg, num_edges=g.num_edges
            )
            rel = abs(toc.miss_rate - base.miss_rate) / base.miss_rate
            assert rel <= 0.10

    def test_blocked_pull_beats_cb_when_values_spill(self):
        # footprint 16 KiB vs an 8 KiB cache; staged ranges kept well under
        # a quarter of capacity
        cfg = CacheConfig(capacity_bytes=8192, line_bytes=64, associativity=4)
        for spec in ("rmat:12:4:5", "rmat:12:8:5"):
            g = gen(spec)
            gt = transpose(g)
            toc = simulate(
                trace_kernel("pr-tocab-pull", g, bg=partition_tocab(gt, "pull", 512), k=64),
                cfg,
                num_edges=g.num_edges,
            )
            cb = simulate(
                trace_kernel("pr-cb", g, bg=partition_cb(gt, 512)), cfg, num_edges=g.num_edges
            )
            assert toc.misses_per_edge <= cb.misses_per_edge

    def test_traversal_queue_lives_past_padding(self, rng):
        g = random_digraph(rng, 50, 260)
        for label in ("bfs-push", "bfs-pull", "bc-pull", "bc-hybrid"):
            t = trace_kernel(label, g, source=1)
            cls = class_of(t.addresses)
            frontier_id = CLASS_IDS["frontier"]
            f_idx = t.element_indices()[cls == frontier_id]
            f_writes = t.element_indices()[(cls == frontier_id) & t.is_write]
            if len(f_writes):
                assert f_writes.min() >= PAD  # queues only; status array is read-only
            status_reads = f_idx[f_idx < PAD]
            if label.endswith("-pull"):
                assert len(status_reads)  # forced pull levels scan the status array
            if label == "bfs-push":
                assert not len(status_reads)

    def test_empty_graph_traces_are_empty(self):
        g = from_edges([], [], num_vertices=0)
        for label in TRACE_KERNELS:
            t = trace_kernel(label, g, width=4)
            assert len(t) == 0


class TestTraceKernelContract:
    def test_unknown_label(self):
        with pytest.raises(ValueError):
            trace_kernel("pr-warp", gen("path:3"))

    def test_blocked_label_needs_width(self):
        with pytest.raises(ValueError):
            trace_kernel("pr-tocab-pull", gen("path:3"))

    def test_wrong_blocking_rejected(self, rng):
        g = random_digraph(rng, 20, 60)
        push_bg = partition_tocab(g, "push", 8)
        with pytest.raises(ValueError):
            trace_kernel("pr-tocab-pull", g, bg=push_bg)
        cb_bg = partition_cb(transpose(g), 8)
        with pytest.raises(ValueError):
            trace_kernel("pr-tocab-push", g, bg=cb_bg)

    def test_iterations_tile(self, rng):
        g = random_digraph(rng, 20, 80)
        one = trace_kernel("pr-pull-baseline", g)
        three = trace_kernel("pr-pull-baseline", g, iterations=3)
        assert np.array_equal(three.addresses, one.tile(3).addresses)
        assert np.array_equal(three.is_write, one.tile(3).is_write)

    def test_policy_mode_is_overridden_by_label(self, rng):
        g = random_digraph(rng, 30, 120)
        t_default = trace_kernel("bfs-pull", g)
        t_forced = trace_kernel("bfs-pull", g, policy=DirectionPolicy("force-push"))
        assert np.array_equal(t_default.addresses, t_forced.addresses)

    def test_accumulate_empty_blocking(self):
        g = from_edges([], [], num_vertices=6)
        bg = partition_tocab(g, "pull", 2)
        assert len(trace_accumulate(bg, 4)) == 0


class TestCompareModes:
    CFG = CacheConfig(capacity_bytes=2048, line_bytes=64, associativity=2)

    def test_value_kernel_row_layout(self, rng):
        g = random_digraph(rng, 40, 160)
        rows = compare_modes(g, [8, 16], self.CFG, kernel="pr", graph_label="r40")
        assert len(rows) == 2 + 3 * 2  # two baselines, three blocked modes x two widths
        by_mode = {}
        for row in rows:
            assert tuple(row.keys()) == COMPARE_COLUMNS
            assert row["graph"] == "r40" and row["kernel"] == "pr"
            by_mode.setdefault(row["mode"], []).append(row["width"])
        assert by_mode["baseline-pull"] == ["-"]
        assert by_mode["baseline-push"] == ["-"]
        for mode in ("cb", "tocab-pull", "tocab-push"):
            assert by_mode[mode] == [8, 16]

    def test_traversal_defaults(self, rng):
        g = random_digraph(rng, 30, 90)
        rows = compare_modes(g, [8], self.CFG, kernel="bfs", source=2)
        modes = [row["mode"] for row in rows]
        assert modes == ["baseline-push", "tocab-pull", "hybrid"]

    def test_modes_subset(self, rng):
        g = random_digraph(rng, 30, 90)
        rows = compare_modes(g, [8], self.CFG, kernel="spmv", modes=["baseline-pull"])
        assert len(rows) == 1 and rows[0]["width"] == "-"

    def test_empty_modes_rejected(self, rng):
        g = random_digraph(rng, 10, 30)
        with pytest.raises(ValueError):
            compare_modes(g, [8], self.CFG, modes=[])

    def test_empty_widths_rejected_for_blocked(self, rng):
        g = random_digraph(rng, 10, 30)
        with pytest.raises(ValueError):
            compare_modes(g, [], self.CFG, modes=["tocab-pull"])

    def test_empty_widths_fine_for_baselines(self, rng):
        g = random_digraph(rng, 10, 30)
        rows = compare_modes(g, [], self.CFG, modes=["baseline-push"])
        assert len(rows) == 1

    def test_metrics_populated(self, rng):
        g = random_digraph(rng, 40, 160)
        rows = compare_modes(g, [16], self.CFG, kernel="pr", modes=["tocab-pull"])
        row = rows[0]
        assert row["accesses"] > 0 and row["misses"] > 0
        assert 0.0 < row["miss_rate"] <= 1.0
        assert row["misses_per_edge"] > 0.0

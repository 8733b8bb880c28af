#!/usr/bin/env python3
"""Report block structure and simulated locality for a graph at several widths.

For each width: partition, print the block-shape summary, then the miss
rate of the blocked kernel trace next to the unblocked baseline.

Example:
    python scripts/locality_report.py --gen rmat:14:8:1 --widths 2^10,2^12,2^14
"""

import argparse
import sys

from gcb.blocking import block_stats, partition_cb, partition_tocab
from gcb.cachesim import DESK_CACHE, CacheConfig, simulate
from gcb.graph import GraphGenSpec, generate, load_graph, transpose
from gcb.traces import trace_kernel
from gcb.util import parse_size, parse_width_list


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--input", metavar="PATH", help="edge list or .mtx file")
    p.add_argument("--gen", metavar="SPEC", help="synthetic graph spec, e.g. rmat:14:8:1")
    p.add_argument("--widths", default="2^12,2^14,2^16", help="comma list or 2^a..2^b range")
    p.add_argument("--scheme", choices=("tocab", "cb"), default="tocab")
    p.add_argument("--direction", choices=("pull", "push"), default="pull")
    p.add_argument("--capacity", type=parse_size, default=DESK_CACHE.capacity_bytes)
    p.add_argument("--line", type=parse_size, default=DESK_CACHE.line_bytes)
    p.add_argument("--assoc", type=int, default=DESK_CACHE.associativity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if bool(args.input) == bool(args.gen):
        parser.error("give exactly one of --input or --gen")
    if args.scheme == "cb" and args.direction == "push":
        parser.error("conventional blocking is pull-only")

    if args.gen:
        spec = GraphGenSpec.parse(args.gen)
        g, label = generate(spec), spec.label()
    else:
        g, label = load_graph(args.input), args.input

    cfg = CacheConfig(args.capacity, args.line, args.assoc)
    print(f"graph {label}: |V|={g.num_vertices} |E|={g.num_edges}  cache {cfg.describe()}")

    base_label = "pr-pull-baseline" if args.direction == "pull" else "pr-push-baseline"
    base = simulate(trace_kernel(base_label, g), cfg, num_edges=g.num_edges)
    print(f"baseline {args.direction}: miss_rate={base.miss_rate:.4f} "
          f"transactions/edge={base.misses_per_edge:.4f}")

    gt = transpose(g)
    blocked_label = {
        ("tocab", "pull"): "pr-tocab-pull",
        ("tocab", "push"): "pr-tocab-push",
        ("cb", "pull"): "pr-cb",
    }[(args.scheme, args.direction)]
    for width in parse_width_list(args.widths):
        if args.scheme == "cb":
            bg = partition_cb(gt, width)
        elif args.direction == "pull":
            bg = partition_tocab(gt, "pull", width)
        else:
            bg = partition_tocab(g, "push", width)
        m = simulate(trace_kernel(blocked_label, g, bg=bg), cfg, num_edges=g.num_edges)
        print(f"\nwidth {width}:")
        for line in block_stats(bg).describe():
            print(f"  {line}")
        print(f"  miss_rate={m.miss_rate:.4f} transactions/edge={m.misses_per_edge:.4f} "
              f"({m.miss_rate / base.miss_rate:.3f}x baseline)")
    return 0


if __name__ == "__main__":
    sys.exit(main())

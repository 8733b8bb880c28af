#!/usr/bin/env python3
"""Sweep block widths and tabulate simulated cache behavior per mode.

Example:
    python scripts/width_sweep.py --gen rmat:16:8:1 --kernel pr \
        --widths 2^10..2^18 --capacity 256K --out sweep.csv
"""

import argparse
import sys

from gcb.cachesim import DESK_CACHE, CacheConfig
from gcb.graph import GraphGenSpec, generate, load_graph
from gcb.traces import COMPARE_COLUMNS, compare_modes
from gcb.util import fmt_cell, parse_size, parse_width_list, write_csv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--input", metavar="PATH", help="edge list or .mtx file")
    p.add_argument("--gen", metavar="SPEC", help="synthetic graph spec, e.g. rmat:16:8:1")
    p.add_argument("--kernel", default="pr", choices=("pr", "spmv", "bfs", "bc"))
    p.add_argument("--modes", default=None, help="comma list; default: all for the kernel")
    p.add_argument("--widths", default="2^10..2^18", help="comma list or 2^a..2^b range")
    p.add_argument("--k", type=parse_size, default=None, help="merge range width")
    p.add_argument("--capacity", type=parse_size, default=DESK_CACHE.capacity_bytes)
    p.add_argument("--line", type=parse_size, default=DESK_CACHE.line_bytes)
    p.add_argument("--assoc", type=int, default=DESK_CACHE.associativity)
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--index-streams", action="store_true",
                   help="include offset/index array traffic in the traces")
    p.add_argument("--source", type=int, default=0, help="traversal root")
    p.add_argument("--out", metavar="PATH", help="also write the rows as CSV")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if bool(args.input) == bool(args.gen):
        parser.error("give exactly one of --input or --gen")

    if args.gen:
        spec = GraphGenSpec.parse(args.gen)
        g, label = generate(spec), spec.label()
    else:
        g, label = load_graph(args.input), args.input

    cfg = CacheConfig(args.capacity, args.line, args.assoc)
    widths = parse_width_list(args.widths)
    modes = args.modes.split(",") if args.modes else None
    kwargs = {} if args.k is None else {"k": args.k}
    rows = compare_modes(
        g,
        widths,
        cfg,
        kernel=args.kernel,
        modes=modes,
        include_index_streams=args.index_streams,
        graph_label=label,
        source=args.source,
        iterations=args.iterations,
        **kwargs,
    )

    print(f"graph {label}: |V|={g.num_vertices} |E|={g.num_edges}  cache {cfg.describe()}")
    header = COMPARE_COLUMNS[2:]  # graph and kernel are constant here
    print("  ".join(f"{h:>15}" for h in header))
    for row in rows:
        print("  ".join(f"{fmt_cell(row[h]):>15}" for h in header))
    if args.out:
        write_csv(rows, COMPARE_COLUMNS, args.out)
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

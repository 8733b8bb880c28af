"""Small shared helpers: size expressions, thread resolution, checksums, CSV."""

from __future__ import annotations

import concurrent.futures
import hashlib
import os
import sys
from typing import Callable, Iterable, Sequence

THREADS_ENV_VAR = "GRAPHCAGE_THREADS"


def parse_size(text: str) -> int:
    """Parse a positive integer, allowing power-of-two notation like "2^18"."""
    s = str(text).strip()
    if "^" in s:
        base, _, exp = s.partition("^")
        if int(exp) < 0:
            raise ValueError(f"expected a positive size, got {text!r}")
        value = int(base) ** int(exp)
    else:
        value = int(s)
    if value <= 0:
        raise ValueError(f"expected a positive size, got {text!r}")
    return value


def parse_width_list(text: str) -> list[int]:
    """Parse widths: a comma list of sizes, or a power range "2^8..2^18"."""
    s = text.strip()
    if ".." in s:
        lo_s, _, hi_s = s.partition("..")
        lo, hi = parse_size(lo_s), parse_size(hi_s)
        if lo > hi or lo & (lo - 1) or hi & (hi - 1):
            raise ValueError(f"width range must be ascending powers of two: {text!r}")
        widths = []
        w = lo
        while w <= hi:
            widths.append(w)
            w *= 2
        return widths
    return [parse_size(part) for part in s.split(",") if part.strip()]


def resolve_threads(cli_value: int | None) -> int:
    """--threads wins; else the GRAPHCAGE_THREADS env var; else 1."""
    if cli_value is not None:
        return max(1, int(cli_value))
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}")
    return 1


def map_ordered(fn: Callable, items: Sequence, threads: int) -> list:
    """Apply fn to each item, preserving order; thread pool when threads > 1."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def result_checksum(array) -> str:
    """Stable digest of a result vector (bit-stable in deterministic mode)."""
    import numpy as np

    arr = np.ascontiguousarray(array)
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


def fmt_cell(value) -> str:
    """CSV cell: floats at 6 significant digits, None as empty."""
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_csv(rows: Iterable[dict], header: Sequence[str], out_path: str | None) -> None:
    """Write rows (dicts) as CSV with the given column order; '-' or None -> stdout."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_cell(row.get(col)) for col in header))
    text = "\n".join(lines) + "\n"
    if out_path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(text)

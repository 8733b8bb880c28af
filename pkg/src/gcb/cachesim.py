"""Set-associative LRU cache model for kernel access traces.

Traces are flat arrays of (address, is_write) events. Addresses encode a
stream class in the high bits so unrelated arrays never alias: class k
occupies [k << CLASS_SHIFT, (k+1) << CLASS_SHIFT), which keeps every
class base line-aligned for any plausible line size. Every traced
element is ELEMENT_BYTES wide regardless of its in-memory type; the
model cares about reuse distance, not payload width.

The cache is write-allocate / write-back. A miss counts one memory read;
evicting a dirty line counts one memory write; a bypassed access goes
straight to memory (one transaction, never cached). miss_rate covers
cached accesses only; transactions-per-edge is the figure of merit for
comparing kernel layouts.

Capacity need not be a power of two (the default models a 2.75 MB shared
cache) but must be a whole number of sets: line size and associativity
are powers of two and capacity divides evenly into line * assoc chunks.
The set index is line_id modulo num_sets.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from numba import njit

__all__ = [
    "STREAM_CLASSES",
    "CLASS_IDS",
    "ELEMENT_BYTES",
    "CLASS_SHIFT",
    "DEFAULT_CACHE",
    "DESK_CACHE",
    "CacheConfig",
    "AccessTrace",
    "SimResult",
    "ClassStats",
    "CacheMetrics",
    "stream_base",
    "class_of",
    "simulate",
    "simulate_outcomes",
    "compute_metrics",
]

STREAM_CLASSES = (
    "contributions",
    "sums",
    "partial_sums",
    "frontier",
    "sigma_depth",
    "csr_index",
    "edge_values",
)
CLASS_IDS = {name: i for i, name in enumerate(STREAM_CLASSES)}
ELEMENT_BYTES = 4
CLASS_SHIFT = 42

OUTCOME_HIT = 0
OUTCOME_MISS = 1
OUTCOME_BYPASS = 2


def stream_base(name: str) -> int:
    return CLASS_IDS[name] << CLASS_SHIFT


def class_of(addresses: np.ndarray) -> np.ndarray:
    return (addresses >> CLASS_SHIFT).astype(np.int64)


def _is_pow2(x: int) -> bool:
    return x > 0 and (x & (x - 1)) == 0


@dataclasses.dataclass(frozen=True)
class CacheConfig:
    capacity_bytes: int = 2_883_584
    line_bytes: int = 128
    associativity: int = 16
    bypass_classes: frozenset = frozenset()

    def __post_init__(self):
        if not _is_pow2(self.line_bytes):
            raise ValueError(f"line size must be a power of two, got {self.line_bytes}")
        if not _is_pow2(self.associativity):
            raise ValueError(
                f"associativity must be a power of two, got {self.associativity}"
            )
        if self.line_bytes % ELEMENT_BYTES:
            raise ValueError("line size must hold whole elements")
        set_bytes = self.line_bytes * self.associativity
        if self.capacity_bytes < set_bytes or self.capacity_bytes % set_bytes:
            raise ValueError(
                f"capacity {self.capacity_bytes} not a whole number of "
                f"{set_bytes}-byte sets"
            )
        object.__setattr__(self, "bypass_classes", frozenset(self.bypass_classes))
        bad = self.bypass_classes - set(STREAM_CLASSES)
        if bad:
            raise ValueError(f"unknown stream class(es): {sorted(bad)}")

    @property
    def num_sets(self) -> int:
        return self.capacity_bytes // (self.line_bytes * self.associativity)

    @property
    def num_lines(self) -> int:
        return self.num_sets * self.associativity

    def with_bypass(self, names) -> "CacheConfig":
        return dataclasses.replace(self, bypass_classes=frozenset(names))

    def describe(self) -> str:
        tail = f", bypass={sorted(self.bypass_classes)}" if self.bypass_classes else ""
        return (
            f"{self.capacity_bytes} B, {self.line_bytes} B lines, "
            f"{self.associativity}-way, {self.num_sets} sets{tail}"
        )


DEFAULT_CACHE = CacheConfig()
# small enough that a scale-18 vertex value array (1 MiB as 4-byte reals)
# overflows it, keeping locality experiments seconds-long
DESK_CACHE = CacheConfig(capacity_bytes=262_144, line_bytes=128, associativity=16)


@dataclasses.dataclass
class AccessTrace:
    """Flat event stream: parallel address / is_write arrays."""

    addresses: np.ndarray  # int64, class-tagged byte addresses
    is_write: np.ndarray  # bool

    def __post_init__(self):
        self.addresses = np.ascontiguousarray(self.addresses, dtype=np.int64)
        self.is_write = np.ascontiguousarray(self.is_write, dtype=np.bool_)
        if self.addresses.shape != self.is_write.shape or self.addresses.ndim != 1:
            raise ValueError("addresses and is_write must be parallel 1-d arrays")

    def __len__(self) -> int:
        return len(self.addresses)

    @classmethod
    def empty(cls) -> "AccessTrace":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.bool_))

    @classmethod
    def concat(cls, parts) -> "AccessTrace":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.addresses for p in parts]),
            np.concatenate([p.is_write for p in parts]),
        )

    def tile(self, reps: int) -> "AccessTrace":
        if reps < 1:
            raise ValueError("reps must be >= 1")
        if reps == 1:
            return self
        return AccessTrace(np.tile(self.addresses, reps), np.tile(self.is_write, reps))

    def class_counts(self, writes_only: bool = False) -> dict:
        ids = class_of(self.addresses)
        if writes_only:
            ids = ids[self.is_write]
        counts = np.bincount(ids, minlength=len(STREAM_CLASSES))
        return {name: int(counts[i]) for name, i in CLASS_IDS.items() if counts[i]}

    def store_counts(self) -> dict:
        return self.class_counts(writes_only=True)

    def element_indices(self) -> np.ndarray:
        base = class_of(self.addresses) << CLASS_SHIFT
        return (self.addresses - base) // ELEMENT_BYTES

    def dump(self):
        """Debug text form, one 'class index kind' line per event."""
        ids = class_of(self.addresses)
        idx = self.element_indices()
        for i in range(len(self.addresses)):
            kind = "write" if self.is_write[i] else "read"
            yield f"{STREAM_CLASSES[ids[i]]} {idx[i]} {kind}"


@njit(cache=True)
def _lru_run(line_ids, is_write, bypass_flag, num_sets, assoc):
    tags = np.full(num_sets * assoc, -1, dtype=np.int64)
    stamp = np.zeros(num_sets * assoc, dtype=np.int64)
    dirty = np.zeros(num_sets * assoc, dtype=np.bool_)
    clock = np.int64(0)
    n = len(line_ids)
    outcomes = np.empty(n, dtype=np.int8)
    writebacks = np.int64(0)
    for i in range(n):
        if bypass_flag[i]:
            outcomes[i] = 2
            continue
        line = line_ids[i]
        s = line % num_sets
        base = s * assoc
        clock += 1
        way = -1
        for w in range(assoc):
            if tags[base + w] == line:
                way = w
                break
        if way >= 0:
            outcomes[i] = 0
            stamp[base + way] = clock
            if is_write[i]:
                dirty[base + way] = True
            continue
        outcomes[i] = 1
        victim = 0
        oldest = stamp[base]
        for w in range(assoc):
            if tags[base + w] == -1:
                victim = w
                oldest = -1
                break
            if stamp[base + w] < oldest:
                victim = w
                oldest = stamp[base + w]
        if oldest != -1 and dirty[base + victim]:
            writebacks += 1
        tags[base + victim] = line
        stamp[base + victim] = clock
        dirty[base + victim] = is_write[i]
    # lines still dirty at the end are not flushed: the model measures
    # traffic during the kernel, not teardown
    return outcomes, writebacks


@dataclasses.dataclass
class SimResult:
    outcomes: np.ndarray  # int8 per event: 0 hit, 1 miss, 2 bypass
    writebacks: int

    @property
    def miss_flags(self) -> np.ndarray:
        return self.outcomes == OUTCOME_MISS


def simulate_outcomes(trace: AccessTrace, config: CacheConfig = DEFAULT_CACHE) -> SimResult:
    """Run the trace through an empty cache, keeping the per-event outcome."""
    line_ids = trace.addresses // config.line_bytes
    if config.bypass_classes:
        bypass_ids = np.array(
            [CLASS_IDS[b] for b in config.bypass_classes], dtype=np.int64
        )
        bypass_flag = np.isin(class_of(trace.addresses), bypass_ids)
    else:
        bypass_flag = np.zeros(len(trace), dtype=np.bool_)
    outcomes, writebacks = _lru_run(
        line_ids, trace.is_write, bypass_flag, config.num_sets, config.associativity
    )
    return SimResult(outcomes, int(writebacks))


@dataclasses.dataclass(frozen=True)
class ClassStats:
    accesses: int
    misses: int
    bypassed: int
    stores: int

    @property
    def miss_rate(self) -> float:
        cached = self.accesses - self.bypassed
        return self.misses / cached if cached else 0.0


@dataclasses.dataclass(frozen=True)
class CacheMetrics:
    accesses: int
    cached_accesses: int
    misses: int
    writebacks: int
    bypassed: int
    num_edges: int
    per_class: dict

    @property
    def miss_rate(self) -> float:
        return self.misses / self.cached_accesses if self.cached_accesses else 0.0

    @property
    def transactions(self) -> int:
        """Memory transactions: line fills + dirty evictions + bypasses."""
        return self.misses + self.writebacks + self.bypassed

    @property
    def misses_per_edge(self) -> float:
        return self.transactions / self.num_edges if self.num_edges else 0.0

    def describe(self) -> str:
        lines = [
            f"accesses: {self.accesses} (bypassed {self.bypassed})",
            f"misses: {self.misses}  writebacks: {self.writebacks}",
            f"miss rate: {self.miss_rate:.4f}",
            f"transactions/edge: {self.misses_per_edge:.4f}",
        ]
        for name, st in self.per_class.items():
            lines.append(
                f"  {name}: {st.accesses} accesses, {st.misses} misses"
                f" ({st.miss_rate:.4f})"
            )
        return "\n".join(lines)


def compute_metrics(trace: AccessTrace, result: SimResult, num_edges: int = 0) -> CacheMetrics:
    ids = class_of(trace.addresses)
    n_classes = len(STREAM_CLASSES)
    acc = np.bincount(ids, minlength=n_classes)
    miss = np.bincount(ids[result.outcomes == OUTCOME_MISS], minlength=n_classes)
    byp = np.bincount(ids[result.outcomes == OUTCOME_BYPASS], minlength=n_classes)
    sto = np.bincount(ids[trace.is_write], minlength=n_classes)
    per_class = {
        name: ClassStats(int(acc[i]), int(miss[i]), int(byp[i]), int(sto[i]))
        for name, i in CLASS_IDS.items()
        if acc[i]
    }
    bypassed = int(byp.sum())
    return CacheMetrics(
        accesses=len(trace),
        cached_accesses=len(trace) - bypassed,
        misses=int(miss.sum()),
        writebacks=result.writebacks,
        bypassed=bypassed,
        num_edges=num_edges,
        per_class=per_class,
    )


def simulate(
    trace: AccessTrace, config: CacheConfig = DEFAULT_CACHE, num_edges: int = 0
) -> CacheMetrics:
    """Simulate and summarize in one step; num_edges feeds misses_per_edge."""
    return compute_metrics(trace, simulate_outcomes(trace, config), num_edges)

"""Containment similarity search over a GB-KMV index.

The accelerated path never changes the answer, only the work: it returns
exactly the records a full scan with :func:`estimate_overlap_gbkmv` would.
Buffer overlaps come from a popcount over packed bitmap columns; tail match
counts ``K`` come from inverted lists over the tail sketches. Since the
estimate can only reach ``theta`` when ``K >= U_(k) * (theta - o1)`` and
``U_(k)`` is at least the query's and the partition's smallest tail maximum,
records failing that bound are skipped before the estimate is evaluated.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .gbkmv import GbkmvIndex, GbkmvRecordSketch, estimate_overlap_gbkmv, sketch_query

DEFAULT_PARTITIONS = 32


@dataclass(frozen=True)
class SearchThresholds:
    t_star: float
    q: int
    theta: float

    @classmethod
    def of(cls, t_star: float, q: int) -> SearchThresholds:
        if not 0.0 <= t_star <= 1.0:
            raise InvalidParameterError(f"threshold {t_star} outside [0, 1]")
        if q < 1:
            raise InvalidParameterError("query must be non-empty")
        return cls(t_star, q, t_star * q)

    def residual(self, o1: float, u_k: float) -> float:
        """Tail matches needed once ``o1`` buffer matches are known."""
        return max(0.0, u_k * (self.theta - o1))


def equal_depth_partitions(sizes: np.ndarray, g: int) -> list[np.ndarray]:
    """Split record ids into ``g`` groups of near-equal count, ordered by size."""
    order = np.lexsort((np.arange(sizes.size), sizes))
    return [p for p in np.array_split(order, min(g, sizes.size)) if p.size]


@dataclass
class SizePartitionIndex:
    partitions: list[np.ndarray]
    lower_sizes: np.ndarray
    upper_sizes: np.ndarray
    u_lower: np.ndarray  # per record: smallest tail maximum within its partition
    post_ptr: np.ndarray
    post_records: np.ndarray
    buffer_words: np.ndarray  # (m, words) uint64, records in id order
    tail_len: np.ndarray
    tail_max: np.ndarray

    @classmethod
    def build(cls, index: GbkmvIndex, g: int = DEFAULT_PARTITIONS) -> SizePartitionIndex:
        m = index.m
        parts = equal_depth_partitions(index.sizes, g)
        tail_len = index.tail_sizes()
        tail_max = np.zeros(m)
        nz = tail_len > 0
        tail_max[nz] = index.tail_hashes[index.tail_ptr[1:][nz] - 1]
        u_lower = np.zeros(m)
        for p in parts:
            has = tail_max[p] > 0
            u_lower[p] = tail_max[p][has].min() if has.any() else 0.0

        owner = np.repeat(np.arange(m), tail_len)
        elems = index.tail_elements
        universe = int(elems.max()) + 1 if elems.size else 0
        order = np.lexsort((owner, elems))
        ptr = np.zeros(universe + 1, dtype=np.int64)
        np.cumsum(np.bincount(elems, minlength=universe), out=ptr[1:])

        words32 = index.buffer_words
        if words32.shape[1] % 2:
            words32 = np.concatenate([words32, np.zeros((m, 1), dtype=np.uint32)], axis=1)
        words64 = np.ascontiguousarray(words32).view(np.uint64)

        return cls(
            partitions=parts,
            lower_sizes=np.array([index.sizes[p].min() for p in parts]),
            upper_sizes=np.array([index.sizes[p].max() for p in parts]),
            u_lower=u_lower, post_ptr=ptr, post_records=owner[order],
            buffer_words=words64, tail_len=tail_len, tail_max=tail_max,
        )

    def postings(self, e: int) -> np.ndarray:
        if e + 1 >= self.post_ptr.size:
            return self.post_records[:0]
        return self.post_records[self.post_ptr[e]: self.post_ptr[e + 1]]


def _query_words(sq: GbkmvRecordSketch) -> np.ndarray:
    w = sq.buffer
    if w.size % 2:
        w = np.concatenate([w, np.zeros(1, dtype=np.uint32)])
    return w.view(np.uint64)


def query(
    index: GbkmvIndex,
    accel: SizePartitionIndex,
    Q: Sequence[int] | np.ndarray,
    t_star: float,
) -> list[tuple[int, float]]:
    """Records whose estimated overlap with ``Q`` reaches ``t_star * |Q|``.

    Returns ``(record id, estimated containment)`` sorted by record id.
    """
    Q = np.unique(np.asarray(Q, dtype=np.int64))
    th = SearchThresholds.of(t_star, int(Q.size))
    sq = sketch_query(Q, index)
    return query_sketch(index, accel, sq, th)


def _match_counts(
    index: GbkmvIndex, accel: SizePartitionIndex, sq: GbkmvRecordSketch
) -> tuple[np.ndarray, np.ndarray]:
    """Buffer overlaps ``o1`` and tail match counts ``K`` against every record."""
    m = index.m
    if accel.buffer_words.shape[1]:
        o1 = np.bitwise_count(accel.buffer_words & _query_words(sq)).sum(axis=1, dtype=np.int64)
    else:
        o1 = np.zeros(m, dtype=np.int64)
    if len(sq.tail):
        hits = np.concatenate([accel.postings(e) for e in sq.tail.elements.tolist()])
        K = np.bincount(hits, minlength=m)
    else:
        K = np.zeros(m, dtype=np.int64)
    return o1, K


def overlap_estimates(
    index: GbkmvIndex, accel: SizePartitionIndex, Q: Sequence[int] | np.ndarray
) -> np.ndarray:
    """Unclipped overlap estimates of ``Q`` against all records, in id order."""
    sq = sketch_query(np.unique(np.asarray(Q, dtype=np.int64)), index)
    o1, K = _match_counts(index, accel, sq)
    ids = np.arange(index.m)
    return o1 + _tail_estimates(index, accel, K, ids, len(sq.tail), sq.tail.max_hash)


def query_sketch(
    index: GbkmvIndex, accel: SizePartitionIndex, sq: GbkmvRecordSketch, th: SearchThresholds
) -> list[tuple[int, float]]:
    o1, K = _match_counts(index, accel, sq)
    tail = sq.tail
    uq = tail.max_hash
    lower_u = np.maximum(accel.u_lower, uq)
    need = th.theta - o1
    # slack keeps the bound conservative under float rounding
    cand = (need <= 0) | ((K > 0) & (K >= lower_u * need * (1.0 - 1e-9)))
    ids = np.flatnonzero(cand)
    est = o1[ids] + _tail_estimates(index, accel, K[ids], ids, len(tail), uq)
    keep = est >= th.theta
    ids, est = ids[keep], est[keep]
    cont = np.clip(est / th.q, 0.0, 1.0)
    return list(zip(ids.tolist(), cont.tolist()))


def _tail_estimates(
    index: GbkmvIndex, accel: SizePartitionIndex, K: np.ndarray, ids: np.ndarray,
    nq: int, uq: float,
) -> np.ndarray:
    """Vectorised twin of ``estimate_intersection_gkmv`` for the given records."""
    if index.tau >= 1.0:
        return K.astype(np.float64)
    k = nq + accel.tail_len[ids] - K
    u = np.maximum(accel.tail_max[ids], uq)
    out = np.zeros(ids.size)
    big = k >= 2
    out[big] = (K[big] / k[big]) * ((k[big] - 1) / u[big])
    small = ~big & (K > 0)
    out[small] = K[small] / index.tau
    return out


def scan_query(index: GbkmvIndex, Q: Sequence[int] | np.ndarray, t_star: float) -> list[tuple[int, float]]:
    """Reference full scan: evaluate the estimator against every record."""
    Q = np.unique(np.asarray(Q, dtype=np.int64))
    th = SearchThresholds.of(t_star, int(Q.size))
    sq = sketch_query(Q, index)
    out = []
    for i in range(index.m):
        d = estimate_overlap_gbkmv(sq, index.sketch(i))
        if d >= th.theta:
            out.append((i, min(max(d / th.q, 0.0), 1.0)))
    return out


class ExactIndex:
    """Inverted lists over raw records for exact overlap counting."""

    def __init__(self, records: Sequence[np.ndarray]) -> None:
        self.m = len(records)
        sizes = np.fromiter((len(r) for r in records), dtype=np.int64, count=self.m)
        flat = np.concatenate(records)
        owner = np.repeat(np.arange(self.m), sizes)
        order = np.lexsort((owner, flat))
        n = int(flat.max()) + 1
        self.ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(flat, minlength=n), out=self.ptr[1:])
        self.owners = owner[order]

    def overlaps(self, Q: np.ndarray) -> np.ndarray:
        Q = Q[Q + 1 < self.ptr.size]
        if Q.size == 0:
            return np.zeros(self.m, dtype=np.int64)
        hits = np.concatenate([self.owners[self.ptr[e]: self.ptr[e + 1]] for e in Q.tolist()])
        return np.bincount(hits, minlength=self.m)


def intersection_size(a: np.ndarray, b: np.ndarray) -> int:
    """Sorted-merge intersection count of two strictly increasing arrays."""
    i = j = c = 0
    a, b = a.tolist(), b.tolist()
    while i < len(a) and j < len(b):
        if a[i] < b[j]:
            i += 1
        elif a[i] > b[j]:
            j += 1
        else:
            c += 1
            i += 1
            j += 1
    return c


def exact_search(
    records: Sequence[np.ndarray],
    Q: Sequence[int] | np.ndarray,
    t_star: float,
    exact_index: ExactIndex | None = None,
) -> list[tuple[int, float]]:
    """Records with ``|Q & X| / |Q| >= t_star``, with their exact containment."""
    Q = np.unique(np.asarray(Q, dtype=np.int64))
    th = SearchThresholds.of(t_star, int(Q.size))
    if exact_index is not None:
        ov = exact_index.overlaps(Q)
    else:
        ov = np.array([intersection_size(Q, r) for r in records], dtype=np.int64)
    ids = np.flatnonzero(ov >= th.theta)
    return [(int(i), float(ov[i] / th.q)) for i in ids]

"""G-KMV and GB-KMV sketches.

A GB-KMV record sketch has two parts: a bitmap over the ``r`` globally most
frequent elements (stored exactly) and a threshold-mode KMV sketch of the
remaining elements holding every hash ``<= tau``. One ``tau`` is shared by
the whole index, which lets any pair of tails be combined into a valid
sketch of their union.

Budgets are in element units: one stored tail entry is one unit and one
32-bit bitmap word is one unit, so a buffer of ``r`` bits costs ``r / 32``.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, DatasetStats
from .errors import (
    BudgetExhaustedError,
    IncompatibleSketchError,
    InvalidParameterError,
)
from .hashing import HashSource, check_collisions
from .kmv import IntersectionEstimate, KmvSketch, merge_sketches, plug_in_variance

log = logging.getLogger(__name__)

WORD_BITS = 32


def n_words(r: int) -> int:
    return (r + WORD_BITS - 1) // WORD_BITS


@dataclass(frozen=True)
class GbkmvRecordSketch:
    buffer: np.ndarray  # uint32 words; bit i <=> i-th most frequent element
    tail: KmvSketch

    @property
    def buffer_count(self) -> int:
        return int(np.bitwise_count(self.buffer).sum())

    def buffer_ranks(self) -> list[int]:
        bits = np.unpackbits(self.buffer.view(np.uint8), bitorder="little")
        return np.flatnonzero(bits).tolist()


@dataclass
class GbkmvIndex:
    """Immutable GB-KMV index over ``m`` records.

    Tails are stored in CSR form: record ``i`` owns entries
    ``tail_ptr[i]:tail_ptr[i + 1]`` of ``tail_elements`` / ``tail_hashes``,
    each run sorted by hash.
    """

    r: int
    buffer_elements: np.ndarray
    tau: float
    hasher: HashSource
    budget: float
    n: int
    sizes: np.ndarray
    buffer_words: np.ndarray
    tail_ptr: np.ndarray
    tail_elements: np.ndarray
    tail_hashes: np.ndarray
    tokens: list[str] = field(default_factory=list)
    stats: DatasetStats | None = None

    def __post_init__(self) -> None:
        self._rank = {int(e): i for i, e in enumerate(self.buffer_elements.tolist())}

    @property
    def m(self) -> int:
        return int(self.sizes.size)

    @property
    def seed(self) -> int:
        return self.hasher.seed

    @property
    def space_units(self) -> float:
        return self.m * self.r / WORD_BITS + int(self.tail_elements.size)

    def rank_of(self, e: int) -> int:
        return self._rank.get(int(e), -1)

    def tail(self, i: int) -> KmvSketch:
        a, b = self.tail_ptr[i], self.tail_ptr[i + 1]
        return KmvSketch(self.tail_elements[a:b], self.tail_hashes[a:b], tau=self.tau,
                         complete=self.tau >= 1.0)

    def sketch(self, i: int) -> GbkmvRecordSketch:
        return GbkmvRecordSketch(self.buffer_words[i], self.tail(i))

    def tail_sizes(self) -> np.ndarray:
        return np.diff(self.tail_ptr)


def compute_tau(
    records: Sequence[np.ndarray],
    buffer_elements: np.ndarray,
    tail_budget: float,
    h: HashSource,
    n: int | None = None,
) -> float:
    """Largest element hash whose retained tail occurrences fit ``tail_budget``.

    Candidate thresholds are the hashes of non-buffer elements; a threshold
    at ``h(e)`` retains every occurrence of every element hashing ``<= h(e)``.
    Returns 0 when nothing fits and 1 when every occurrence fits.
    """
    if tail_budget < 0:
        raise InvalidParameterError("tail_budget must be >= 0")
    flat = np.concatenate(records) if len(records) else np.empty(0, dtype=np.int64)
    freq = np.bincount(flat, minlength=n or 0)
    freq[np.asarray(buffer_elements, dtype=np.int64)] = 0
    elems = np.flatnonzero(freq)
    B = int(np.floor(tail_budget))
    total = int(freq.sum())
    if B >= total:
        return 1.0
    if B == 0 or elems.size == 0:
        return 0.0
    hv = h.hash_many(elems)
    order = np.lexsort((elems, hv))
    retained = np.cumsum(freq[elems[order]])
    last = int(np.searchsorted(retained, B, side="right")) - 1
    if last < 0:
        return 0.0
    return float(hv[order[last]])


def build_gbkmv_index(
    dataset: Dataset,
    b: float,
    r: int | str = "auto",
    h: HashSource | None = None,
    tau: float | None = None,
    tuner_pairs: int = 10_000,
    tuner_seed: int = 0,
) -> GbkmvIndex:
    """Build a GB-KMV index under budget ``b`` (element units).

    ``r="auto"`` asks the tuner for the buffer width. ``tau`` pins the global
    threshold instead of deriving it from the budget (worked examples only).
    """
    h = h or HashSource(0)
    stats = dataset.stats
    records = dataset.records
    m, n = stats.m, stats.n
    if r == "auto":
        from .tuner import CostModelInputs, choose_buffer_size

        inputs = CostModelInputs.from_stats(stats, b, n_pairs=tuner_pairs, seed=tuner_seed)
        r = choose_buffer_size(inputs)
        log.info("tuner chose r=%d", r)
    r = int(r)
    if r < 0:
        raise InvalidParameterError("r must be >= 0")
    if b < m * r / WORD_BITS:
        raise BudgetExhaustedError(f"budget {b} cannot hold {m} buffers of {r} bits")

    buffer_elements = stats.order[: min(r, n)].astype(np.int64)
    all_hashes = h.hash_many(np.arange(n))
    check_collisions(all_hashes)
    if tau is None:
        tau = compute_tau(records, buffer_elements, b - m * r / WORD_BITS, h, n)

    rank = np.full(n, -1, dtype=np.int64)
    rank[buffer_elements] = np.arange(buffer_elements.size)
    sizes = stats.sizes.copy()
    flat = np.concatenate(records)
    owner = np.repeat(np.arange(m), sizes)
    occ_rank = rank[flat]

    W = n_words(r)
    words = np.zeros((m, W), dtype=np.uint32)
    buffered = occ_rank >= 0
    if buffered.any():
        br = occ_rank[buffered]
        np.bitwise_or.at(
            words,
            (owner[buffered], br // WORD_BITS),
            (np.uint32(1) << (br % WORD_BITS).astype(np.uint32)),
        )

    occ_hash = all_hashes[flat]
    in_tail = ~buffered & (occ_hash <= tau)
    t_owner, t_elem, t_hash = owner[in_tail], flat[in_tail], occ_hash[in_tail]
    order = np.lexsort((t_elem, t_hash, t_owner))
    ptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(t_owner, minlength=m), out=ptr[1:])

    return GbkmvIndex(
        r=r, buffer_elements=buffer_elements, tau=float(tau), hasher=h, budget=float(b),
        n=n, sizes=sizes, buffer_words=words, tail_ptr=ptr,
        tail_elements=t_elem[order], tail_hashes=t_hash[order],
        tokens=list(dataset.tokens), stats=stats,
    )


def sketch_query(Q: Sequence[int] | np.ndarray, index: GbkmvIndex) -> GbkmvRecordSketch:
    """Sketch a query with the index's buffer elements, ``tau`` and hash."""
    elems = np.unique(np.asarray(Q, dtype=np.int64))
    if elems.size == 0:
        raise InvalidParameterError("query must be non-empty")
    words = np.zeros(n_words(index.r), dtype=np.uint32)
    rest = []
    for e in elems.tolist():
        i = index.rank_of(e)
        if i >= 0:
            words[i // WORD_BITS] |= np.uint32(1 << (i % WORD_BITS))
        else:
            rest.append(e)
    rest = np.array(rest, dtype=np.int64)
    hashes = index.hasher.hash_many(rest)
    keep = hashes <= index.tau
    te, th = rest[keep], hashes[keep]
    order = np.lexsort((te, th))
    tail = KmvSketch(te[order], th[order], tau=index.tau, complete=index.tau >= 1.0)
    return GbkmvRecordSketch(words, tail)


def estimate_intersection_gkmv(Lq: KmvSketch, Lx: KmvSketch) -> IntersectionEstimate:
    """Intersection estimate from two threshold sketches sharing one ``tau``.

    ``k`` is the full union size and ``U_(k)`` its largest hash. With
    ``k < 2`` the ratio estimator is undefined; each retained common element
    then stands for ``1 / tau`` elements.
    """
    if Lq.tau is None or Lx.tau is None:
        raise IncompatibleSketchError("threshold-mode sketches required")
    if Lq.tau != Lx.tau:
        raise IncompatibleSketchError(f"tau mismatch: {Lq.tau} vs {Lx.tau}")
    union, common = merge_sketches(Lq, Lx)
    k, K = len(union), len(common)
    u_k = union[-1][0] if union else 0.0
    if Lq.complete:
        return IntersectionEstimate(k, K, u_k, float(K), estimator="exact")
    if k >= 2:
        d = (K / k) * ((k - 1) / u_k)
        return IntersectionEstimate(k, K, u_k, d, plug_in_variance(d, k, u_k))
    d = K / Lq.tau if K else 0.0
    return IntersectionEstimate(k, K, u_k, d, estimator="fallback")


def estimate_overlap_gbkmv(Sq: GbkmvRecordSketch, Sx: GbkmvRecordSketch) -> float:
    """Estimated ``|Q & X|``: exact buffer overlap plus the tail estimate."""
    if Sq.buffer.size != Sx.buffer.size:
        raise IncompatibleSketchError("buffer widths differ")
    o1 = int(np.bitwise_count(Sq.buffer & Sx.buffer).sum())
    return o1 + estimate_intersection_gkmv(Sq.tail, Sx.tail).d_cap_hat


def estimate_containment_gbkmv(Sq: GbkmvRecordSketch, Sx: GbkmvRecordSketch, q: int) -> float:
    """Estimated ``|Q & X| / q`` clamped to ``[0, 1]``."""
    if q < 1:
        raise InvalidParameterError("query size must be >= 1")
    return min(max(estimate_overlap_gbkmv(Sq, Sx) / q, 0.0), 1.0)


def validate_gkmv_union(
    Lq: KmvSketch, Lx: KmvSketch, full_hashes: Mapping[int, float]
) -> bool:
    """Check that ``Lq | Lx`` is the bottom-``k`` sketch of the full union.

    ``full_hashes`` maps every element of ``Q | X`` to its hash.
    """
    union, _ = merge_sketches(Lq, Lx)
    k = len(union)
    truth = sorted((v, e) for e, v in full_hashes.items())[:k]
    return [e for _, e in union] == [e for _, e in truth]

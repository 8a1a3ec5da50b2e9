"""Bottom-k (KMV) sketches, their union/intersection estimators and variance.

Sketch entries are matched by element id, never by float equality: under a
single collision-free hash function, common hash values are exactly common
elements.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientSketchError, InvalidParameterError
from .hashing import HashSource


@dataclass(frozen=True)
class KmvSketch:
    """Entries sorted ascending by ``(hash, element)``.

    Exactly one of ``capacity`` (bottom-k mode) and ``tau`` (threshold mode)
    is set. ``complete`` means the sketch holds every element of its set.
    """

    elements: np.ndarray
    hashes: np.ndarray
    capacity: int | None = None
    tau: float | None = None
    complete: bool = False

    def __len__(self) -> int:
        return int(self.elements.size)

    @property
    def mode(self) -> str:
        return "threshold" if self.tau is not None else "bottom-k"

    @property
    def max_hash(self) -> float:
        return float(self.hashes[-1]) if self.hashes.size else 0.0

    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.elements.tolist(), self.hashes.tolist()))

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.elements.tolist(), self.hashes.tolist()))


@dataclass(frozen=True)
class IntersectionEstimate:
    k: int
    K_cap: int
    U_k: float
    d_cap_hat: float
    variance_hat: float | None = None
    estimator: str = "kmv"


def _sorted_entries(elements: np.ndarray, hashes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((elements, hashes))
    return elements[order], hashes[order]


def build_kmv(X: Sequence[int] | np.ndarray, k: int, h: HashSource) -> KmvSketch:
    """The ``min(k, |X|)`` smallest hashes of ``X``."""
    if k < 1:
        raise InvalidParameterError("capacity must be >= 1")
    elems = np.unique(np.asarray(X, dtype=np.int64))
    elems, hashes = _sorted_entries(elems, h.hash_many(elems))
    return KmvSketch(elems[:k], hashes[:k], capacity=k, complete=elems.size <= k)


def build_threshold_sketch(
    X: Sequence[int] | np.ndarray, tau: float, h: HashSource
) -> KmvSketch:
    """Every element of ``X`` whose hash is ``<= tau``."""
    elems = np.unique(np.asarray(X, dtype=np.int64))
    hashes = h.hash_many(elems)
    keep = hashes <= tau
    elems, hashes = _sorted_entries(elems[keep], hashes[keep])
    return KmvSketch(elems, hashes, tau=float(tau), complete=tau >= 1.0)


def estimate_distinct(L: KmvSketch) -> float:
    """``(k - 1) / U_(k)``; the exact count when the sketch is complete."""
    if L.complete:
        return float(len(L))
    if len(L) < 2:
        raise InsufficientSketchError(f"need >= 2 entries, sketch has {len(L)}")
    return (len(L) - 1) / float(L.hashes[-1])


def variance_kmv(D_cap: float, D_cup: float, k: int) -> float:
    """Variance of the KMV intersection estimator for true sizes and sketch size k."""
    if k < 3:
        raise DomainError(f"variance defined for k >= 3, got k={k}")
    if D_cap < 0 or D_cap > D_cup:
        raise DomainError("need 0 <= D_cap <= D_cup")
    return D_cap * (k * D_cup - k * k - D_cup + k + D_cap) / (k * (k - 2))


def merge_sketches(a: KmvSketch, b: KmvSketch) -> tuple[list[tuple[float, int]], set[int]]:
    table = a.as_dict()
    common = set()
    for e, v in zip(b.elements.tolist(), b.hashes.tolist()):
        if e in table:
            common.add(e)
        else:
            table[e] = v
    union = sorted((v, e) for e, v in table.items())
    return union, common


def plug_in_variance(d_cap: float, k: int, u_k: float) -> float | None:
    if k < 3:
        return None
    d_cup = (k - 1) / u_k
    return variance_kmv(min(d_cap, d_cup), d_cup, k)


def estimate_intersection_kmv(Lx: KmvSketch, Ly: KmvSketch) -> IntersectionEstimate:
    """Intersection estimate from two bottom-k sketches with ``k = min(|Lx|, |Ly|)``."""
    if Lx.mode != "bottom-k" or Ly.mode != "bottom-k":
        raise InvalidParameterError("estimate_intersection_kmv needs bottom-k sketches")
    union, common = merge_sketches(Lx, Ly)
    if Lx.complete and Ly.complete:
        u = union[-1][0] if union else 0.0
        return IntersectionEstimate(len(union), len(common), u, float(len(common)),
                                    estimator="exact")
    k = min(len(Lx), len(Ly))
    if k < 2:
        raise InsufficientSketchError(f"need min sketch size >= 2, got {k}")
    head = union[:k]
    u_k = head[-1][0]
    K = sum(1 for _, e in head if e in common)
    d = (K / k) * ((k - 1) / u_k)
    return IntersectionEstimate(k, K, u_k, d, plug_in_variance(d, k, u_k))


@dataclass
class KmvIndex:
    """Equal-capacity bottom-k sketches for a whole dataset."""

    capacity: int
    sketches: list[KmvSketch]
    hasher: HashSource

    @property
    def space_units(self) -> int:
        return sum(len(s) for s in self.sketches)

    def padded(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Sketches as ``(m, capacity)`` matrices padded with ``inf`` / ``-1``."""
        m = len(self.sketches)
        H = np.full((m, self.capacity), np.inf)
        E = np.full((m, self.capacity), -1, dtype=np.int64)
        sizes = np.zeros(m, dtype=np.int64)
        complete = np.zeros(m, dtype=bool)
        for i, s in enumerate(self.sketches):
            H[i, : len(s)] = s.hashes
            E[i, : len(s)] = s.elements
            sizes[i] = len(s)
            complete[i] = s.complete
        return H, E, sizes, complete


def build_kmv_index(records: Sequence[np.ndarray], b: float, h: HashSource) -> KmvIndex:
    """Every record keeps ``floor(b / m)`` minimum hashes (equal allocation)."""
    m = len(records)
    if b < 2 * m:
        raise InvalidParameterError(f"budget {b} below 2 entries per record (m={m})")
    k = int(b // m)
    return KmvIndex(k, [build_kmv(r, k, h) for r in records], h)


def scan_kmv(index: KmvIndex, Lq: KmvSketch, padded=None) -> tuple[np.ndarray, np.ndarray]:
    """Intersection estimates of ``Lq`` against every sketch in ``index``.

    Vectorised twin of :func:`estimate_intersection_kmv`; pairs whose sketch
    size is below 2 yield 0 and are flagged in the returned boolean mask.
    """
    H, E, sizes, complete = padded if padded is not None else index.padded()
    m = H.shape[0]
    kq = len(Lq)
    Hc = np.concatenate([np.broadcast_to(Lq.hashes, (m, kq)), H], axis=1)
    Ec = np.concatenate([np.broadcast_to(Lq.elements, (m, kq)), E], axis=1)
    order = np.lexsort((Ec, Hc), axis=1)
    Hs = np.take_along_axis(Hc, order, axis=1)
    Es = np.take_along_axis(Ec, order, axis=1)
    valid = Es >= 0
    dup = np.zeros_like(valid)
    dup[:, 1:] = (Es[:, 1:] == Es[:, :-1]) & valid[:, 1:]
    uniq = valid & ~dup
    pos = np.cumsum(uniq, axis=1)

    exact = complete & Lq.complete
    k = np.minimum(sizes, kq)
    at_k = uniq & (pos == k[:, None])
    u_k = np.where(at_k.any(axis=1), Hs[np.arange(m), at_k.argmax(axis=1)], 1.0)
    K = (dup & (pos <= k[:, None])).sum(axis=1)
    K_all = dup.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (K / k) * ((k - 1) / u_k)
    insufficient = (k < 2) & ~exact
    d = np.where(exact, K_all.astype(np.float64), np.where(insufficient, 0.0, d))
    return d, insufficient

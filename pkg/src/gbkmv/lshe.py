"""MinHash signatures and the LSH-Ensemble containment baseline.

Records are split into equal-depth partitions by size. A query converts the
containment threshold into a Jaccard threshold per partition, using the
partition's largest record size in place of the unknown exact size, and
keeps every record whose estimated Jaccard similarity reaches it. Candidates
are found by comparing signatures directly; no banding structure is built.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .hashing import HashSource, splitmix64
from .search import SearchThresholds, equal_depth_partitions

DEFAULT_K_PRIME = 256
DEFAULT_PARTITIONS = 32


def minhash_signature(X: Sequence[int] | np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Minimum of each derived hash function over ``X``."""
    ids = np.asarray(X, dtype=np.int64).astype(np.uint64)
    if ids.size == 0:
        raise InvalidParameterError("cannot sign an empty set")
    base = splitmix64(ids)
    return splitmix64(base[None, :] ^ seeds[:, None]).min(axis=1)


def minhash_signatures(records: Sequence[np.ndarray], seeds: np.ndarray) -> np.ndarray:
    """``(m, k')`` signature matrix, one function at a time over all occurrences."""
    sizes = np.fromiter((len(r) for r in records), dtype=np.int64, count=len(records))
    flat = splitmix64(np.concatenate(records).astype(np.uint64))
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    out = np.empty((len(records), seeds.size), dtype=np.uint64)
    for i, s in enumerate(seeds):
        out[:, i] = np.minimum.reduceat(splitmix64(flat ^ s), starts)
    return out


def estimate_jaccard(sig_a: np.ndarray, sig_b: np.ndarray) -> float:
    if sig_a.shape != sig_b.shape:
        raise InvalidParameterError("signatures differ in length")
    return float(np.mean(sig_a == sig_b))


def containment_to_jaccard(t: float, x: float, q: float) -> float:
    if q <= 0 or x / q + 1.0 - t <= 0:
        raise InvalidParameterError("non-positive denominator")
    return t / (x / q + 1.0 - t)


def jaccard_to_containment(s: float, x: float, q: float) -> float:
    if q <= 0 or s <= -1:
        raise InvalidParameterError("non-positive denominator")
    return (x / q + 1.0) * s / (1.0 + s)


def estimate_containment_minhash(s_hat: float, x: float, q: float) -> float:
    """Containment from a Jaccard estimate when the record size ``x`` is known."""
    return jaccard_to_containment(s_hat, x, q)


def estimate_containment_lshe(s_hat: float, u: float, q: float) -> float:
    """As :func:`estimate_containment_minhash` with the partition bound ``u`` for ``x``."""
    return jaccard_to_containment(s_hat, u, q)


@dataclass
class LsheIndex:
    k_prime: int
    signatures: np.ndarray
    sizes: np.ndarray
    partitions: list[np.ndarray]
    upper: np.ndarray  # largest record size per partition
    record_upper: np.ndarray  # upper bound of each record's partition
    seeds: np.ndarray

    @classmethod
    def build(
        cls,
        records: Sequence[np.ndarray],
        h: HashSource,
        k_prime: int = DEFAULT_K_PRIME,
        g: int = DEFAULT_PARTITIONS,
    ) -> LsheIndex:
        if k_prime < 1:
            raise InvalidParameterError("k_prime must be >= 1")
        if h.is_fixture:
            raise InvalidParameterError("MinHash needs a computed hash source")
        seeds = h.family(k_prime)
        sizes = np.fromiter((len(r) for r in records), dtype=np.int64, count=len(records))
        parts = equal_depth_partitions(sizes, g)
        upper = np.array([sizes[p].max() for p in parts], dtype=np.int64)
        record_upper = np.empty_like(sizes)
        for p, u in zip(parts, upper):
            record_upper[p] = u
        return cls(k_prime, minhash_signatures(records, seeds), sizes, parts, upper,
                   record_upper, seeds)

    @property
    def space_units(self) -> int:
        return int(self.signatures.size)

    def jaccard_estimates(self, Q: np.ndarray) -> np.ndarray:
        sig = minhash_signature(Q, self.seeds)
        return (self.signatures == sig).mean(axis=1)


def lshe_query(index: LsheIndex, Q: Sequence[int] | np.ndarray, t_star: float) -> list[tuple[int, float]]:
    """Union over partitions of records with estimated Jaccard ``>= s*(u)``.

    Returns ``(record id, inflated containment estimate)`` sorted by id.
    """
    Q = np.unique(np.asarray(Q, dtype=np.int64))
    th = SearchThresholds.of(t_star, int(Q.size))
    q = float(th.q)
    s_hat = index.jaccard_estimates(Q)
    u = index.record_upper.astype(np.float64)
    s_star = t_star / (u / q + 1.0 - t_star)
    ids = np.flatnonzero(s_hat >= s_star)
    t_hat = (u[ids] / q + 1.0) * s_hat[ids] / (1.0 + s_hat[ids])
    return list(zip(ids.tolist(), t_hat.tolist()))

"""Seedable element hashing onto the unit interval.

All sketches in an index share one :class:`HashSource`. In computed mode the
value of element ``e`` is a splitmix64 avalanche of ``(seed, e)`` scaled to
``(0, 1]``; in fixture mode values come from an explicit table, which is how
hand-worked examples are replayed.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from pathlib import Path

import numpy as np

from .errors import HashCollisionError, MissingFixtureError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_POW_64 = float(2**64)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorised splitmix64 finaliser over a uint64 array (wrapping arithmetic)."""
    z = np.asarray(x, dtype=np.uint64) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _seed_word(seed: int) -> np.uint64:
    return splitmix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]


def raw_hash64(ids: np.ndarray, seed: int) -> np.ndarray:
    """64-bit avalanche of ``(seed, id)`` for every id."""
    ids = np.asarray(ids, dtype=np.int64).astype(np.uint64)
    return splitmix64(splitmix64(ids) ^ _seed_word(seed))


def to_unit(u: np.ndarray) -> np.ndarray:
    """Map uint64 words to ``(0, 1]`` via ``(u + 1) / 2**64`` in float64."""
    return (u.astype(np.float64) + 1.0) / _TWO_POW_64


class HashSource:
    """Deterministic hash of element ids onto ``(0, 1]``.

    Use ``HashSource(seed)`` for computed hashes or :meth:`fixture` to pin
    values explicitly.
    """

    def __init__(self, seed: int = 0, table: Mapping[int, float] | None = None) -> None:
        self.seed = int(seed)
        self.table: dict[int, float] | None = None
        if table is not None:
            self.table = {int(k): float(v) for k, v in table.items()}
            bad = [v for v in self.table.values() if not 0.0 < v <= 1.0]
            if bad:
                raise ValueError(f"fixture hashes must lie in (0, 1], got {bad[:3]}")

    @classmethod
    def fixture(cls, table: Mapping[int, float], seed: int = 0) -> HashSource:
        return cls(seed=seed, table=table)

    @classmethod
    def from_fixture_file(
        cls, path: str | Path, token_ids: Mapping[str, int], seed: int = 0
    ) -> HashSource:
        """Load a two-column ``token hash`` text file.

        Tokens absent from ``token_ids`` are skipped; they cannot be queried
        through this id mapping anyway.
        """
        table: dict[int, float] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts or parts[0].startswith("#"):
                    continue
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'token hash'")
                if parts[0] in token_ids:
                    table[token_ids[parts[0]]] = float(parts[1])
        return cls(seed=seed, table=table)

    @property
    def is_fixture(self) -> bool:
        return self.table is not None

    def hash(self, e: int) -> float:
        if self.table is not None:
            try:
                return self.table[int(e)]
            except KeyError:
                raise MissingFixtureError(f"no fixture hash for element {e}") from None
        return float(self.hash_many(np.array([e]))[0])

    def hash_many(self, ids: Iterable[int] | np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if self.table is None:
            return to_unit(raw_hash64(ids, self.seed))
        out = np.empty(ids.shape, dtype=np.float64)
        for i, e in enumerate(ids.ravel()):
            try:
                out.flat[i] = self.table[int(e)]
            except KeyError:
                raise MissingFixtureError(f"no fixture hash for element {e}") from None
        return out

    def family(self, k: int) -> np.ndarray:
        """Seeds of ``k`` independent functions derived from this source's seed."""
        idx = np.arange(1, k + 1, dtype=np.uint64)
        return splitmix64(idx ^ _seed_word(self.seed))

    def __repr__(self) -> str:
        mode = f"fixture[{len(self.table)}]" if self.table is not None else "computed"
        return f"HashSource(seed={self.seed}, mode={mode})"


def check_collisions(hashes: np.ndarray) -> None:
    """Raise if two distinct elements share a hash value."""
    if np.unique(hashes).size != hashes.size:
        raise HashCollisionError("hash collision among dictionary elements; pick another seed")

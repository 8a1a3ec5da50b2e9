"""Dataset ingestion, frequency statistics and synthetic Zipf workloads."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateFitError, EmptyDatasetError, InvalidParameterError

log = logging.getLogger(__name__)

ALPHA_MIN = 0.05
ALPHA_MAX = 20.0

# A record is a strictly increasing int64 array of element ids.
Record = np.ndarray


@dataclass(frozen=True)
class DatasetStats:
    m: int
    n: int
    N: int
    freq: np.ndarray
    sizes: np.ndarray
    alpha1: float
    alpha2: float
    order: np.ndarray
    f_prefix: np.ndarray
    f_prefix_sq: np.ndarray
    fit_method: str = "discrete-truncated-mle"

    @property
    def f_n2(self) -> float:
        return float(self.f_prefix_sq[-1])


@dataclass
class Dataset:
    records: list[Record]
    stats: DatasetStats
    tokens: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def token_ids(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}


def frequency_order(freq: np.ndarray) -> np.ndarray:
    """Element ids by descending frequency, ties broken by ascending id."""
    return np.lexsort((np.arange(freq.size), -freq))


def compute_stats(records: Sequence[Record], n: int | None = None) -> DatasetStats:
    if not records:
        raise EmptyDatasetError("dataset has no records")
    sizes = np.fromiter((len(r) for r in records), dtype=np.int64, count=len(records))
    flat = np.concatenate(records)
    if n is None:
        n = int(flat.max()) + 1
    freq = np.bincount(flat, minlength=n).astype(np.int64)
    N = int(freq.sum())
    order = frequency_order(freq)
    f_sorted = freq[order].astype(np.float64)
    f_prefix = np.concatenate(([0.0], np.cumsum(f_sorted) / N))
    f_prefix_sq = np.concatenate(([0.0], np.cumsum(f_sorted**2) / float(N) ** 2))
    f_prefix[-1] = 1.0

    nonzero = freq[freq > 0]
    try:
        alpha1 = zipf_rank_exponent(nonzero)
    except DegenerateFitError:
        alpha1 = 0.0
    try:
        alpha2 = fit_power_law(sizes)
    except DegenerateFitError:
        alpha2 = ALPHA_MAX
    return DatasetStats(
        m=len(records), n=n, N=N, freq=freq, sizes=sizes, alpha1=alpha1, alpha2=alpha2,
        order=order, f_prefix=f_prefix, f_prefix_sq=f_prefix_sq,
    )


def parse_record(line: str, token_ids: dict[str, int], tokens: list[str]) -> Record:
    ids = set()
    for tok in line.split():
        idx = token_ids.get(tok)
        if idx is None:
            idx = token_ids[tok] = len(tokens)
            tokens.append(tok)
        ids.add(idx)
    return np.array(sorted(ids), dtype=np.int64)


def ingest(
    source: str | Path | TextIO | Iterable[str],
    min_size: int = 10,
    preprocess: Callable[[list[str]], list[str]] | None = None,
) -> Dataset:
    """Read one whitespace-tokenised record per line.

    Duplicate tokens within a line collapse; lines with fewer than
    ``min_size`` distinct tokens are dropped before ids are assigned, so the
    dictionary covers only retained records. ``preprocess`` may filter a
    line's tokens (stop-word removal and the like).
    """
    if min_size < 1:
        raise InvalidParameterError("min_size must be >= 1")
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    else:
        lines = list(source)

    kept: list[list[str]] = []
    for line in lines:
        toks = line.split()
        if preprocess is not None:
            toks = preprocess(toks)
        if len(set(toks)) >= min_size:
            kept.append(toks)
    if not kept:
        raise EmptyDatasetError("no record reaches min_size")

    token_ids: dict[str, int] = {}
    tokens: list[str] = []
    records = [parse_record(" ".join(toks), token_ids, tokens) for toks in kept]
    return Dataset(records=records, stats=compute_stats(records, len(tokens)), tokens=tokens)


def from_records(records: Iterable[Iterable[int]], n: int | None = None) -> Dataset:
    recs = [np.unique(np.asarray(list(r), dtype=np.int64)) for r in records]
    recs = [r for r in recs if r.size]
    if not recs:
        raise EmptyDatasetError("no non-empty record")
    return Dataset(records=recs, stats=compute_stats(recs, n))


def _discrete_mle(lo: int, hi: int, mean_log: float) -> float:
    support = np.log(np.arange(lo, hi + 1, dtype=np.float64))

    def nll(alpha: float) -> float:
        w = -alpha * support
        top = w.max()
        return alpha * mean_log + top + math.log(np.exp(w - top).sum())

    res = minimize_scalar(nll, bounds=(ALPHA_MIN, ALPHA_MAX), method="bounded",
                          options={"xatol": 1e-6})
    return float(min(max(res.x, ALPHA_MIN), ALPHA_MAX))


def fit_power_law(values: Sequence[int] | np.ndarray) -> float:
    """Power-law exponent of the value distribution ``p(v) ~ v**-alpha``.

    Maximum likelihood for a discrete power law on the observed support
    ``[min(values), max(values)]``. The result is clamped to ``[0.05, 20]``.
    """
    v = np.asarray(values, dtype=np.int64)
    if v.size == 0 or v.min() < 1:
        raise InvalidParameterError("values must be non-empty and >= 1")
    lo, hi = int(v.min()), int(v.max())
    if lo == hi:
        raise DegenerateFitError("all values equal; exponent undefined")
    return _discrete_mle(lo, hi, float(np.log(v.astype(np.float64)).mean()))


def zipf_rank_exponent(freq: Sequence[int] | np.ndarray) -> float:
    """Rank-frequency (Zipf) exponent ``s`` in ``f ~ rank**-s``.

    Every occurrence is treated as a draw of its element's frequency rank and
    the rank distribution is fitted by the same discrete likelihood.
    """
    f = np.sort(np.asarray(freq, dtype=np.int64))[::-1]
    if f.size == 0 or f.min() < 1:
        raise InvalidParameterError("frequencies must be non-empty and >= 1")
    if f[0] == f[-1]:
        raise DegenerateFitError("uniform frequencies")
    ranks = np.log(np.arange(1, f.size + 1, dtype=np.float64))
    return _discrete_mle(1, f.size, float((f * ranks).sum() / f.sum()))


def _sample_without_replacement(
    rng: np.random.Generator, cdf: np.ndarray, p: np.ndarray, size: int
) -> np.ndarray:
    n = cdf.size
    if size * 2 > n:
        # exponential-key ordering, equivalent to successive weighted sampling
        keys = rng.exponential(size=n) / p
        return np.argpartition(keys, size - 1)[:size]
    chosen: dict[int, None] = {}
    batch = max(2 * size, 16)
    while len(chosen) < size:
        draws = np.searchsorted(cdf, rng.random(batch), side="right")
        for d in draws.tolist():
            if d < n and d not in chosen:
                chosen[d] = None
                if len(chosen) == size:
                    break
        batch = min(batch * 2, 1 << 20)
    return np.fromiter(chosen, dtype=np.int64, count=size)


def generate_zipf(
    m: int,
    alpha1: float,
    alpha2: float,
    n: int,
    size_range: tuple[int, int],
    seed: int = 0,
) -> list[Record]:
    """Synthetic records with Zipf element popularity and power-law sizes.

    Sizes follow ``P(s) ~ s**-alpha2`` on ``size_range``; each record then
    draws its elements without replacement with ``P(id) ~ (id + 1)**-alpha1``,
    so id 0 is the most popular element.
    """
    lo, hi = size_range
    if m < 1 or n < 1:
        raise InvalidParameterError("m and n must be >= 1")
    if not 1 <= lo <= hi:
        raise InvalidParameterError(f"bad size_range {size_range}")
    if hi > n:
        raise InvalidParameterError(f"max record size {hi} exceeds universe size {n}")

    rng = np.random.default_rng(seed)
    support = np.arange(lo, hi + 1)
    ps = support.astype(np.float64) ** -alpha2
    sizes = rng.choice(support, size=m, p=ps / ps.sum())

    p = np.arange(1, n + 1, dtype=np.float64) ** -alpha1
    p /= p.sum()
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    return [np.sort(_sample_without_replacement(rng, cdf, p, int(s))) for s in sizes]


def write_records(records: Iterable[Record], path: str | Path, prefix: str = "e") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(" ".join(f"{prefix}{e}" for e in rec.tolist()))
            fh.write("\n")

"""Accuracy metrics and the benchmark harness.

``run_eval`` samples queries from the dataset's own records, answers each one
with the chosen method and scores the answer against the exact result set.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import InvalidParameterError
from .gbkmv import build_gbkmv_index
from .hashing import HashSource
from .kmv import build_kmv, build_kmv_index, scan_kmv
from .lshe import DEFAULT_K_PRIME, LsheIndex, lshe_query
from .lshe import DEFAULT_PARTITIONS as LSHE_PARTITIONS
from .search import DEFAULT_PARTITIONS, ExactIndex, SizePartitionIndex, exact_search, query

log = logging.getLogger(__name__)

METHODS = ("gbkmv", "gkmv", "kmv", "lshe", "exact")
LSHE_DEVIATION = "lshe candidates by direct signature comparison, no banding"


def f_alpha(precision: float, recall: float, alpha: float = 1.0) -> float:
    """Weighted harmonic mean; ``alpha < 1`` favours precision."""
    for v in (precision, recall):
        if not 0.0 <= v <= 1.0:
            raise InvalidParameterError(f"metric {v} outside [0, 1]")
    if precision == 0.0 and recall == 0.0:
        return 0.0
    a2 = alpha * alpha
    return (1 + a2) * precision * recall / (a2 * precision + recall)


def precision_recall(result: set[int], truth: set[int]) -> tuple[float, float]:
    """Set precision and recall with conventions for empty sets.

    Both empty scores (1, 1). An empty answer to a non-empty truth scores
    precision 0; a non-empty answer to an empty truth keeps recall 1.
    """
    if not result and not truth:
        return 1.0, 1.0
    hit = len(result & truth)
    precision = hit / len(result) if result else 0.0
    recall = hit / len(truth) if truth else 1.0
    return precision, recall


@dataclass(frozen=True)
class QueryMetrics:
    query_id: int
    q: int
    truth_size: int
    result_size: int
    precision: float
    recall: float
    f1: float
    f05: float
    latency_s: float


@dataclass
class EvalReport:
    method: str
    precision: float
    recall: float
    f1: float
    f05: float
    mean_latency_s: float
    median_latency_s: float
    build_time_s: float
    space_units: float
    space_bytes: int
    budget_ratio: float
    space_ratio: float
    config: dict = field(default_factory=dict)
    per_query: list[QueryMetrics] = field(default_factory=list)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("per_query")
        return d


Searcher = Callable[[np.ndarray, float], set[int]]


def _build_method(
    dataset: Dataset, method: str, b: float, seed: int, k_prime: int | None, g: int,
    tuner_pairs: int,
) -> tuple[Searcher, float, int, dict]:
    h = HashSource(seed)
    records = dataset.records
    if method in ("gbkmv", "gkmv"):
        r = "auto" if method == "gbkmv" else 0
        idx = build_gbkmv_index(dataset, b, r=r, h=h, tuner_pairs=tuner_pairs, tuner_seed=seed)
        accel = SizePartitionIndex.build(idx, g)
        nbytes = idx.buffer_words.nbytes + idx.tail_elements.nbytes + idx.tail_hashes.nbytes

        def search(Q: np.ndarray, t: float) -> set[int]:
            return {i for i, _ in query(idx, accel, Q, t)}

        return search, idx.space_units, nbytes, {"r": idx.r, "tau": idx.tau}
    if method == "kmv":
        kidx = build_kmv_index(records, b, h)
        padded = kidx.padded()
        nbytes = sum(s.elements.nbytes + s.hashes.nbytes for s in kidx.sketches)

        def search(Q: np.ndarray, t: float) -> set[int]:
            d, _ = scan_kmv(kidx, build_kmv(Q, kidx.capacity, h), padded)
            return set(np.flatnonzero(d >= t * Q.size).tolist())

        return search, kidx.space_units, nbytes, {"k": kidx.capacity}
    if method == "lshe":
        kp = k_prime or DEFAULT_K_PRIME
        lidx = LsheIndex.build(records, h, kp, g)

        def search(Q: np.ndarray, t: float) -> set[int]:
            return {i for i, _ in lshe_query(lidx, Q, t)}

        return search, lidx.space_units, lidx.signatures.nbytes, {
            "k_prime": kp, "partitions": len(lidx.partitions), "deviations": [LSHE_DEVIATION]}
    if method == "exact":
        eidx = ExactIndex(records)

        def search(Q: np.ndarray, t: float) -> set[int]:
            return {i for i, _ in exact_search(records, Q, t, eidx)}

        n_occ = int(dataset.stats.N)
        return search, float(n_occ), n_occ * 8, {}
    raise InvalidParameterError(f"unknown method {method!r}; choose from {METHODS}")


def sample_queries(m: int, num_queries: int, seed: int) -> np.ndarray:
    if num_queries > m:
        raise InvalidParameterError(f"num_queries {num_queries} exceeds m={m}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(m, size=num_queries, replace=False))


def run_eval(
    dataset: Dataset,
    method: str,
    budget_ratio: float = 0.1,
    t_star: float = 0.5,
    num_queries: int = 200,
    seed: int = 0,
    k_prime: int | None = None,
    partitions: int | None = None,
    tuner_pairs: int = 10_000,
    query_ids: Sequence[int] | None = None,
) -> EvalReport:
    """Score ``method`` on queries drawn from the dataset's records."""
    if method not in METHODS:
        raise InvalidParameterError(f"unknown method {method!r}; choose from {METHODS}")
    if budget_ratio <= 0:
        raise InvalidParameterError("budget_ratio must be > 0")
    N = dataset.stats.N
    b = float(np.floor(budget_ratio * N))
    g = partitions or (LSHE_PARTITIONS if method == "lshe" else DEFAULT_PARTITIONS)

    t0 = time.perf_counter()
    search, units, nbytes, extra = _build_method(dataset, method, b, seed, k_prime, g, tuner_pairs)
    build_time = time.perf_counter() - t0

    qids = (np.asarray(query_ids, dtype=np.int64) if query_ids is not None
            else sample_queries(len(dataset), num_queries, seed))
    truth_index = ExactIndex(dataset.records)
    per_query = []
    for qi in qids.tolist():
        Q = dataset.records[qi]
        truth = {i for i, _ in exact_search(dataset.records, Q, t_star, truth_index)}
        t0 = time.perf_counter()
        result = search(Q, t_star)
        lat = time.perf_counter() - t0
        p, r = precision_recall(result, truth)
        per_query.append(QueryMetrics(qi, int(Q.size), len(truth), len(result), p, r,
                                      f_alpha(p, r, 1.0), f_alpha(p, r, 0.5), lat))

    lat = np.array([m.latency_s for m in per_query])
    config = {"seed": seed, "t_star": t_star, "budget": b, "num_queries": int(qids.size),
              "m": len(dataset), "N": N, "fit_method": dataset.stats.fit_method,
              "alpha1": dataset.stats.alpha1, "alpha2": dataset.stats.alpha2,
              "deviations": [], **extra}
    return EvalReport(
        method=method,
        precision=float(np.mean([m.precision for m in per_query])),
        recall=float(np.mean([m.recall for m in per_query])),
        f1=float(np.mean([m.f1 for m in per_query])),
        f05=float(np.mean([m.f05 for m in per_query])),
        mean_latency_s=float(lat.mean()),
        median_latency_s=float(np.median(lat)),
        build_time_s=build_time,
        space_units=float(units),
        space_bytes=int(nbytes),
        budget_ratio=budget_ratio,
        space_ratio=float(units) / N,
        config=config,
        per_query=per_query,
    )


def write_jsonl(reports: Sequence[EvalReport], path: str | Path) -> None:
    """One summary line per report, then one line per query."""
    with open(path, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(json.dumps({"kind": "summary", **rep.summary()}) + "\n")
            for qm in rep.per_query:
                fh.write(json.dumps({"kind": "query", "method": rep.method, **asdict(qm)}) + "\n")


CSV_FIELDS = ("method", "budget_ratio", "space_ratio", "t_star", "precision", "recall",
              "f1", "f05", "mean_latency_s", "median_latency_s", "build_time_s", "r", "tau")


def write_csv(reports: Sequence[EvalReport], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for rep in reports:
            row = {**rep.summary(), **rep.config}
            w.writerow([row.get(f, "") for f in CSV_FIELDS])

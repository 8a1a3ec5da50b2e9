"""Buffer-size selection from a variance cost model, plus analytic variance
predictors for the MinHash and LSH-Ensemble containment estimators.

The cost model averages, over record pairs ``(x_j, x_l)`` with ``x_j`` the
query size, the approximate variance of the GB-KMV containment estimator
when the ``r`` most frequent elements are buffered::

    F = f_n2 - f_r2
    tau(r) = (b - m r / 32) / (N - N_1(r))
    k = tau (x_j + x_l) - tau^2 x_j x_l F
    var = (x_j + x_l) x_l / (k x_j) * F - x_l^2 / k * F^2 - x_l / x_j * F

Frequency prefix sums come straight from the dataset; the pair average is
taken over uniformly sampled ordered pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DatasetStats
from .errors import (
    DegenerateSimilarityError,
    InfeasibleBufferError,
    InvalidParameterError,
)

GRID_STEP = 8
WORD_BITS = 32


@dataclass(frozen=True)
class CostModelInputs:
    b: float
    m: int
    N: int
    f_prefix: np.ndarray
    f_prefix_sq: np.ndarray
    x_query: np.ndarray
    x_record: np.ndarray
    grid: tuple[int, ...]
    seed: int = 0

    @classmethod
    def from_stats(
        cls,
        stats: DatasetStats,
        b: float,
        n_pairs: int = 10_000,
        seed: int = 0,
        step: int = GRID_STEP,
        r_max: int | None = None,
    ) -> CostModelInputs:
        # each sampled pair enters in both orders, so mean(x_l / x_j) >= 1
        rng = np.random.default_rng(seed)
        half = max(n_pairs // 2, 1)
        j = rng.integers(0, stats.m, size=half)
        l = rng.integers(0, stats.m, size=half)
        xj = stats.sizes[j].astype(np.float64)
        xl = stats.sizes[l].astype(np.float64)
        return cls(
            b=float(b), m=stats.m, N=stats.N,
            f_prefix=stats.f_prefix, f_prefix_sq=stats.f_prefix_sq,
            x_query=np.concatenate([xj, xl]),
            x_record=np.concatenate([xl, xj]),
            grid=make_grid(b, stats.m, stats.n, step, r_max),
            seed=seed,
        )

    @property
    def n(self) -> int:
        return self.f_prefix.size - 1

    @property
    def L3(self) -> float:
        return float(np.mean(self.x_record / self.x_query))

    def f_rest_sq(self, r: int) -> float:
        """``f_n2 - f_r2``: squared-frequency mass outside the buffer."""
        r = min(r, self.n)
        return float(self.f_prefix_sq[-1] - self.f_prefix_sq[r])

    def tau(self, r: int) -> float:
        r_eff = min(r, self.n)
        space = self.b - self.m * r / WORD_BITS
        remaining = self.N * (1.0 - float(self.f_prefix[r_eff]))
        if space <= 0:
            raise InfeasibleBufferError(f"r={r} leaves no tail budget")
        if remaining <= 0:
            return 1.0
        return min(space / remaining, 1.0)


def make_grid(b: float, m: int, n: int, step: int = GRID_STEP, r_max: int | None = None) -> tuple[int, ...]:
    """Buffer widths ``0, step, 2 step, ...`` that leave tail budget, capped near ``n``."""
    cap = -(-n // step) * step
    if r_max is not None:
        cap = min(cap, r_max)
    grid = [0]
    r = step
    while r <= cap and m * r / WORD_BITS < b:
        grid.append(r)
        r += step
    return tuple(grid)


@dataclass(frozen=True)
class VariancePrediction:
    r: int
    var_gbkmv: float
    delta_vs_gkmv: float


def _average_variance(inputs: CostModelInputs, tau: float, F: float) -> float:
    if F <= 0.0:
        return 0.0
    xj, xl = inputs.x_query, inputs.x_record
    k = tau * (xj + xl) - tau * tau * xj * xl * F
    k = np.maximum(k, 1e-9)
    var = (xj + xl) * xl / (k * xj) * F - xl * xl / k * F * F - xl / xj * F
    return float(var.mean())


def predict_var_gkmv(inputs: CostModelInputs) -> float:
    """Average variance with no buffer: ``tau = b / N`` and the full ``f_n2``."""
    tau = min(inputs.b / inputs.N, 1.0)
    return _average_variance(inputs, tau, float(inputs.f_prefix_sq[-1]))


def predict_var_gbkmv(inputs: CostModelInputs, r: int) -> float:
    if r < 0:
        raise InvalidParameterError("r must be >= 0")
    return _average_variance(inputs, inputs.tau(r), inputs.f_rest_sq(r))


def sweep(inputs: CostModelInputs) -> list[VariancePrediction]:
    base = predict_var_gkmv(inputs)
    out = []
    for r in inputs.grid:
        try:
            v = predict_var_gbkmv(inputs, r)
        except InfeasibleBufferError:
            continue
        out.append(VariancePrediction(r, v, v - base))
    return out


def choose_buffer_size(inputs: CostModelInputs) -> int:
    """Grid argmin of the predicted variance; ties and no-gain go to the smaller r."""
    if not inputs.grid:
        raise InvalidParameterError("empty grid")
    preds = sweep(inputs)
    best = min(preds, key=lambda p: (p.var_gbkmv, p.r))
    base = next((p for p in preds if p.r == 0), None)
    if base is not None and best.var_gbkmv >= base.var_gbkmv:
        return 0
    return best.r


def _jaccard(q: float, x: float, d_cap: float) -> float:
    if q <= 0 or x <= 0 or not 0 <= d_cap <= min(q, x):
        raise InvalidParameterError("need q, x > 0 and 0 <= D_cap <= min(q, x)")
    return d_cap / (q + x - d_cap)


def predict_var_minhash(q: float, x: float, d_cap: float, k_prime: int) -> float:
    """Second-order variance of the MinHash containment estimator."""
    if k_prime < 1:
        raise InvalidParameterError("k_prime must be >= 1")
    s = _jaccard(q, x, d_cap)
    if s <= 0.0 or s >= 1.0:
        raise DegenerateSimilarityError(f"jaccard similarity {s} is degenerate", 0.0)
    k = k_prime
    return (d_cap**2 * (1 - s) * (k * (1 + s) ** 2 - s * (1 - s))
            / (q**2 * k**2 * s * (1 + s) ** 4))


def predict_var_lshe(q: float, x: float, u: float, d_cap: float, k_prime: int) -> float:
    """As :func:`predict_var_minhash`, inflated by the partition upper bound ``u``."""
    if u < x:
        raise InvalidParameterError("upper bound u must be >= x")
    return ((u + q) / (x + q)) ** 2 * predict_var_minhash(q, x, d_cap, k_prime)

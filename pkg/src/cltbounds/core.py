"""Shared numeric primitives: p-norms, the standard normal CDF/PDF, and
mergeable moment summaries consumed by the bound evaluators.

All moment accumulation is done with numpy's pairwise-summed reductions on
fixed-size row blocks, so fourth moments of 1e7 samples keep their digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "InsufficientDataError",
    "MomentSummary",
    "as_unit_vector",
    "as_vector",
    "lp_norm",
    "lp_norms",
    "merge_summaries",
    "normal_cdf",
    "normal_pdf",
    "summarize",
]

_BLOCK_ROWS = 1 << 16


class InsufficientDataError(ValueError):
    """Raised when an estimator needs more samples than were provided."""


def as_vector(x, n: int | None = None) -> np.ndarray:
    """Validate x as a finite 1-D float vector of dimension >= 2."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if v.size < 2:
        raise ValueError(f"dimension must be at least 2, got {v.size}")
    if n is not None and v.size != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def as_unit_vector(x, n: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Validate x as a unit vector (Euclidean norm within tol of 1)."""
    v = as_vector(x, n)
    nrm = math.sqrt(float(v @ v))
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"expected a unit vector, got norm {nrm!r}")
    return v


def lp_norm(x, p: float) -> float:
    """(sum_i |x_i|^p)^(1/p), or max_i |x_i| for p = inf.

    Rescales by max|x_i| before exponentiating so that large p and large
    entries cannot overflow.
    """
    v = np.abs(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    if math.isnan(p) or p < 1.0:
        raise ValueError(f"p must satisfy p >= 1 or p = inf, got {p}")
    m = float(v.max(initial=0.0))
    if math.isinf(p) or m == 0.0:
        return m
    return m * float(np.sum((v / m) ** p)) ** (1.0 / p)


def lp_norms(data: np.ndarray, p: float, axis: int = -1) -> np.ndarray:
    """Row-wise lp_norm for a batch, with the same overflow-safe rescaling."""
    if math.isnan(p) or p < 1.0:
        raise ValueError(f"p must satisfy p >= 1 or p = inf, got {p}")
    v = np.abs(np.asarray(data, dtype=float))
    m = v.max(axis=axis, keepdims=True)
    if math.isinf(p):
        return np.squeeze(m, axis=axis)
    safe = np.where(m > 0.0, m, 1.0)
    out = np.squeeze(safe, axis=axis) * np.sum((v / safe) ** p, axis=axis) ** (1.0 / p)
    return np.where(np.squeeze(m, axis=axis) > 0.0, out, 0.0)


def normal_cdf(t):
    """Standard normal distribution function, evaluated via erfc.

    Absolute error is below 1e-15 over the double range; accepts scalars
    or arrays.
    """
    out = ndtr(t)
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out


def normal_pdf(t):
    """Standard normal density."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MomentSummary:
    """Mergeable sample moments of an (N, n) batch.

    Per-coordinate moments are raw sample means; ``sq_pair`` holds the
    sample means E[X_i^2 X_j^2], either as the full (n, n) table or, in
    subsampled mode, only for ``pair_indices``.  Keeping the table (rather
    than just its off-diagonal max) is what makes ``merge`` exact; consumers
    should read ``max_sq_cov`` / ``max_sq_cov_pair``, which is all the bound
    formulas use.
    """

    n: int
    count: int
    second: np.ndarray
    third_abs: np.ndarray
    fourth: np.ndarray
    sq_pair: np.ndarray
    pair_indices: np.ndarray | None
    norm_sq_mean: float
    norm_sq_sq_mean: float
    abs_norm_dev_mean: float

    @property
    def norm_sq_var(self) -> float:
        """Sample variance of ||X||_2^2."""
        return max(self.norm_sq_sq_mean - self.norm_sq_mean**2, 0.0)

    @property
    def max_fourth(self) -> float:
        return float(self.fourth.max())

    @property
    def max_third_abs(self) -> float:
        return float(self.third_abs.max())

    def _pair_covs(self) -> tuple[np.ndarray, np.ndarray]:
        if self.pair_indices is None:
            cov = self.sq_pair - np.outer(self.second, self.second)
            np.fill_diagonal(cov, -np.inf)
            i, j = np.unravel_index(int(np.argmax(cov)), cov.shape)
            return cov, np.array([i, j])
        i, j = self.pair_indices[:, 0], self.pair_indices[:, 1]
        cov = self.sq_pair - self.second[i] * self.second[j]
        return cov, self.pair_indices[int(np.argmax(cov))]

    @property
    def max_sq_cov(self) -> float:
        """max over tracked i != j of sample Cov(X_i^2, X_j^2)."""
        cov, _ = self._pair_covs()
        return float(cov.max())

    @property
    def max_sq_cov_pair(self) -> tuple[int, int]:
        _, pair = self._pair_covs()
        return int(pair[0]), int(pair[1])

    def merge(self, other: "MomentSummary") -> "MomentSummary":
        return merge_summaries(self, other)

    def to_dict(self) -> dict:
        i, j = self.max_sq_cov_pair
        return {
            "n": self.n,
            "count": self.count,
            "second_moment_mean": float(self.second.mean()),
            "max_fourth": self.max_fourth,
            "max_third_abs": self.max_third_abs,
            "max_sq_cov": self.max_sq_cov,
            "max_sq_cov_pair": [i, j],
            "norm_sq_mean": self.norm_sq_mean,
            "norm_sq_var": self.norm_sq_var,
            "abs_norm_dev_mean": self.abs_norm_dev_mean,
        }


def _batch_data(batch) -> np.ndarray:
    data = getattr(batch, "data", batch)
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError(f"expected an (N, n) batch, got shape {data.shape}")
    return data


def summarize(batch, pair_subsample: int | None = None, subsample_seed: int = 0) -> MomentSummary:
    """Exact sample moments of a batch.

    The full O(n^2 N) pairwise square-moment table is computed by default;
    pass ``pair_subsample`` to track only that many random pairs instead
    (meant for n > 500, but honored for any n).
    """
    data = _batch_data(batch)
    count, n = data.shape
    if count < 2:
        raise InsufficientDataError("need at least 2 samples for covariance fields")

    pair_indices = None
    if pair_subsample is not None:
        total = n * (n - 1) // 2
        take = min(pair_subsample, total)
        rng = np.random.default_rng(subsample_seed)
        flat = rng.choice(total, size=take, replace=False)
        flat.sort()
        # unrank upper-triangle positions
        i = (n - 2 - np.floor(np.sqrt(-8 * flat + 4 * n * (n - 1) - 7) / 2 - 0.5)).astype(int)
        j = (flat + i + 1 - i * (2 * n - i - 1) // 2).astype(int)
        pair_indices = np.column_stack([i, j])

    s2 = np.zeros(n)
    s3 = np.zeros(n)
    s4 = np.zeros(n)
    cross = np.zeros((n, n)) if pair_indices is None else np.zeros(len(pair_indices))
    norm_sq_sum = 0.0
    norm_sq_sq_sum = 0.0
    abs_dev_sum = 0.0
    for lo in range(0, count, _BLOCK_ROWS):
        blk = data[lo : lo + _BLOCK_ROWS]
        sq = blk * blk
        s2 += sq.sum(axis=0)
        s3 += (sq * np.abs(blk)).sum(axis=0)
        s4 += (sq * sq).sum(axis=0)
        if pair_indices is None:
            cross += sq.T @ sq
        else:
            cross += (sq[:, pair_indices[:, 0]] * sq[:, pair_indices[:, 1]]).sum(axis=0)
        rowsq = sq.sum(axis=1)
        norm_sq_sum += rowsq.sum()
        norm_sq_sq_sum += (rowsq * rowsq).sum()
        abs_dev_sum += np.abs(rowsq - n).sum()

    return MomentSummary(
        n=n,
        count=count,
        second=s2 / count,
        third_abs=s3 / count,
        fourth=s4 / count,
        sq_pair=cross / count,
        pair_indices=pair_indices,
        norm_sq_mean=norm_sq_sum / count,
        norm_sq_sq_mean=norm_sq_sq_sum / count,
        abs_norm_dev_mean=abs_dev_sum / count,
    )


def merge_summaries(a: MomentSummary, b: MomentSummary) -> MomentSummary:
    """Combine two summaries into the summary of the concatenated batches."""
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    same_pairs = (a.pair_indices is None) == (b.pair_indices is None) and (
        a.pair_indices is None or np.array_equal(a.pair_indices, b.pair_indices)
    )
    if not same_pairs:
        raise ValueError("summaries track different pair subsets; cannot merge")
    ca, cb = a.count, b.count
    tot = ca + cb

    def avg(x, y):
        return (ca * x + cb * y) / tot

    return MomentSummary(
        n=a.n,
        count=tot,
        second=avg(a.second, b.second),
        third_abs=avg(a.third_abs, b.third_abs),
        fourth=avg(a.fourth, b.fourth),
        sq_pair=avg(a.sq_pair, b.sq_pair),
        pair_indices=a.pair_indices,
        norm_sq_mean=avg(a.norm_sq_mean, b.norm_sq_mean),
        norm_sq_sq_mean=avg(a.norm_sq_sq_mean, b.norm_sq_sq_mean),
        abs_norm_dev_mean=avg(a.abs_norm_dev_mean, b.abs_norm_dev_mean),
    )

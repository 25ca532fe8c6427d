"""AUROC, Kendall's tau-b, quality-vs-abstention curves and survival counts.

Abstention follows one rule everywhere: at rate alpha the ``removal_count``
highest-scoring examples are dropped, ties resolved by input order (earlier
rows go first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateInput, EmptyAfterRemoval, EmptyInput, LengthMismatch, NonFiniteInput

DEFAULT_ALPHAS = tuple(i / 100 for i in range(100))


def _finite(values, name):
    arr = np.asarray(values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return arr


def average_ranks(values) -> np.ndarray:
    """1-based ranks, ties sharing the mean of their positions."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    sorted_vals = arr[order]
    n = arr.shape[0]
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], n]
    mean_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(n)
    ranks[order] = np.repeat(mean_rank, ends - starts)
    return ranks


def auroc(neg: Sequence[float], pos: Sequence[float]) -> float:
    """P(pos > neg) + 0.5 P(pos == neg) via the Mann-Whitney rank sum."""
    neg = _finite(neg, "neg")
    pos = _finite(pos, "pos")
    if neg.size == 0 or pos.size == 0:
        raise EmptyInput("auroc needs at least one negative and one positive")
    n_pos, n_neg = pos.size, neg.size
    ranks = average_ranks(np.concatenate([pos, neg]))
    u = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class KendallResult:
    tau: float
    p_value: float
    concordant: int
    discordant: int
    n: int


def _tie_sums(values: np.ndarray) -> tuple[int, int, int]:
    _, counts = np.unique(values, return_counts=True)
    t = counts.astype(np.int64)
    return (
        int(np.sum(t * (t - 1))),
        int(np.sum(t * (t - 1) * (t - 2))),
        int(np.sum(t * (t - 1) * (2 * t + 5))),
    )


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> KendallResult:
    """Kendall's tau-b with a two-sided p-value from the normal approximation.

    ``tau = (C - D) / sqrt((C + D + Tx)(C + D + Ty))`` where Tx (Ty) counts
    pairs tied in x only (y only).  O(n^2) pair enumeration.
    """
    x = _finite(x, "x")
    y = _finite(y, "y")
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths differ: {x.size} vs {y.size}")
    n = x.size
    if n < 2:
        raise EmptyInput("kendall_tau_b needs at least 2 pairs")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInput("a constant sequence has no rank correlation")
    c, d, tx, ty = (int(v) for v in _kernels.kendall_counts(np.ascontiguousarray(x), np.ascontiguousarray(y)))
    tau = (c - d) / math.sqrt((c + d + tx) * (c + d + ty))

    # variance of (C - D) under independence, with tie corrections
    x1, x2, x3 = _tie_sums(x)
    y1, y2, y3 = _tie_sums(y)
    var = (n * (n - 1) * (2 * n + 5) - x3 - y3) / 18.0
    var += x1 * y1 / (2.0 * n * (n - 1))
    if n > 2:
        var += x2 * y2 / (9.0 * n * (n - 1) * (n - 2))
    if var > 0:
        z = (c - d) / math.sqrt(var)
        p = math.erfc(abs(z) / math.sqrt(2.0))
    else:
        p = 1.0
    return KendallResult(float(tau), float(min(p, 1.0)), c, d, n)


def removal_count(alpha: float, n: int) -> int:
    """floor(alpha * n), guarded so that e.g. 0.29 * 100 removes 29 rather than 28."""
    return int(math.floor(alpha * n * (1.0 + 1e-12) + 1e-9))


def abstention_order(scores) -> np.ndarray:
    """Row indices in removal order: highest score first, ties by input order."""
    arr = np.asarray(scores, dtype=np.float64)
    # stable sort on negated ranks keeps ties in input order
    return np.argsort(-average_ranks(arr), kind="stable")


def _check_alphas(alphas) -> np.ndarray:
    a = np.asarray(list(alphas), dtype=np.float64)
    if a.size == 0:
        raise EmptyInput("alpha grid is empty")
    if np.any(a < 0) or np.any(a >= 1):
        raise ValueError("alphas must lie in [0, 1)")
    if np.any(np.diff(a) <= 0):
        raise ValueError("alphas must be strictly increasing")
    return a


@dataclass(frozen=True)
class QaCurve:
    alphas: np.ndarray
    mean_quality: np.ndarray
    n_kept: np.ndarray
    area: float

    @property
    def points(self) -> list[tuple[float, float, int]]:
        return [(float(a), float(q), int(k)) for a, q, k in zip(self.alphas, self.mean_quality, self.n_kept)]


def qa_curve(abstain_scores, quality, alphas=DEFAULT_ALPHAS) -> QaCurve:
    """Mean quality of the examples that survive abstention at each rate.

    The area uses the trapezoid rule over the supplied grid.
    """
    s = _finite(abstain_scores, "abstain_scores")
    q = _finite(quality, "quality")
    if s.shape != q.shape:
        raise LengthMismatch(f"{s.size} scores but {q.size} quality values")
    a = _check_alphas(alphas)
    n = s.size
    order = abstention_order(s)
    means = np.empty(a.size)
    kept = np.empty(a.size, dtype=np.int64)
    for i, alpha in enumerate(a):
        m = removal_count(alpha, n)
        if m >= n:
            raise EmptyAfterRemoval(f"alpha={alpha} removes all {n} examples")
        rest = q[order[m:]]
        means[i] = math.fsum(rest) / rest.size
        kept[i] = rest.size
    area = float(np.trapezoid(means, a)) if a.size > 1 else 0.0
    return QaCurve(a, means, kept, area)


@dataclass(frozen=True)
class SurvivalTable:
    alphas: np.ndarray
    counts: dict[str, np.ndarray] = field(default_factory=dict)

    def series(self, label: str) -> list[tuple[float, int]]:
        return [(float(a), int(c)) for a, c in zip(self.alphas, self.counts[label])]


def survival_counts(abstain_scores, dataset_labels: Sequence[str], alphas=DEFAULT_ALPHAS) -> SurvivalTable:
    s = _finite(abstain_scores, "abstain_scores")
    labels = np.asarray([str(v) for v in dataset_labels])
    if labels.shape[0] != s.shape[0]:
        raise LengthMismatch(f"{s.size} scores but {labels.shape[0]} labels")
    a = _check_alphas(alphas)
    n = s.size
    order = abstention_order(s)
    names = list(dict.fromkeys(labels.tolist()))
    counts = {name: np.empty(a.size, dtype=np.int64) for name in names}
    for i, alpha in enumerate(a):
        m = min(removal_count(alpha, n), n)
        survivors = labels[order[m:]]
        for name in names:
            counts[name][i] = int(np.count_nonzero(survivors == name))
    return SurvivalTable(a, counts)

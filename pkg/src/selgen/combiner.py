"""Combining perplexity with OOD scores.

Two combiners:

* PRsum: ``PR(perplexity) + PR(ood)``, percentile ranks against a reference
  population, so scores on different scales can be added.
* A least-squares linear regression predicting quality from named features.
  Its prediction is a *quality*, so the abstention score is its negation.

Every abstention score produced here is oriented so that higher means
"abstain first".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_solve

from . import linalg
from .errors import EmptyInput, LengthMismatch, MissingFeature, NonFiniteInput, NotPositiveDefinite, SingularDesign, UnderDetermined

KNOWN_FEATURES = ("perplexity", "input_rmd", "output_rmd", "input_logit", "output_logit")


@dataclass(frozen=True)
class PercentileReference:
    sorted_scores: np.ndarray

    @property
    def n(self) -> int:
        return self.sorted_scores.shape[0]


def percentile_reference(scores: Sequence[float]) -> PercentileReference:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("percentile reference needs at least one score")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("reference scores must be finite")
    return PercentileReference(np.sort(arr, kind="stable"))


def percentile_rank(ref: PercentileReference, x) -> float | np.ndarray:
    """PR(x) = R(x) / n * 100, with R the average position among ties.

    R(x) counts reference scores <= x; scores equal to x contribute the mean
    of their positions.  Values below the whole reference are clamped to
    ``100 / n``.  Accepts a scalar or an array.
    """
    xs = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(xs)):
        raise NonFiniteInput("percentile_rank input must be finite")
    s = ref.sorted_scores
    below = np.searchsorted(s, xs, side="left")
    upto = np.searchsorted(s, xs, side="right")
    ties = upto - below
    rank = np.where(ties > 0, below + (ties + 1) / 2.0, below.astype(np.float64))
    rank = np.maximum(rank, 1.0)
    pr = rank / ref.n * 100.0
    return float(pr) if pr.ndim == 0 else pr


def prsum(ref_ppx: PercentileReference, ref_ood: PercentileReference, ppx, ood):
    return percentile_rank(ref_ppx, ppx) + percentile_rank(ref_ood, ood)


@dataclass(frozen=True)
class LinearCombiner:
    intercept: float
    weights: dict[str, float]
    fit_rmse: float

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(self.weights)


def fit_linear_combiner(features, quality, names: Sequence[str] | None = None, ridge: float = 1e-10) -> LinearCombiner:
    """Ordinary least squares of quality on features plus an intercept.

    Solved through the normal equations with a Cholesky factor; ``ridge`` is
    scaled by the mean diagonal of the Gram matrix and excludes the intercept.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(quality, dtype=np.float64).ravel()
    n, f = X.shape
    if y.shape[0] != n:
        raise LengthMismatch(f"{n} feature rows but {y.shape[0]} quality values")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("features and quality must be finite")
    if f == 0:
        raise ValueError("need at least one feature")
    if n <= f:
        raise UnderDetermined(f"{n} rows cannot determine {f} features plus an intercept")
    names = [f"f{i}" for i in range(f)] if names is None else list(names)
    if len(names) != f or len(set(names)) != f:
        raise ValueError("feature names must be unique and match the column count")

    # centring decouples the intercept and keeps the Gram matrix well scaled
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    gram = Xc.T @ Xc
    gram = 0.5 * (gram + gram.T)
    flat = [names[i] for i in np.flatnonzero(np.diag(gram) == 0)]
    if flat:
        raise SingularDesign(f"constant feature column(s) {flat} are collinear with the intercept")
    gram[np.diag_indices(f)] += ridge * max(float(np.trace(gram)) / f, np.finfo(float).tiny)
    try:
        lower = linalg.cholesky(gram)
    except NotPositiveDefinite as exc:
        raise SingularDesign(f"design matrix is rank deficient ({exc})") from exc
    w = cho_solve((lower, True), Xc.T @ (y - y_mean))
    intercept = float(y_mean - x_mean @ w)
    fitted = intercept + X @ w
    rmse = float(math.sqrt(np.mean((fitted - y) ** 2)))
    return LinearCombiner(intercept, {k: float(v) for k, v in zip(names, w)}, rmse)


def apply_linear_combiner(c: LinearCombiner, feature_row: Mapping[str, float]) -> float:
    """Predicted quality for one example; extra keys in ``feature_row`` are ignored."""
    total = c.intercept
    for name, weight in c.weights.items():
        if name not in feature_row:
            raise MissingFeature(f"feature {name!r} missing")
        total += weight * float(feature_row[name])
    return total


def predict_batch(c: LinearCombiner, columns: Mapping[str, Sequence[float]]) -> np.ndarray:
    n = None
    total = None
    for name, weight in c.weights.items():
        if name not in columns:
            raise MissingFeature(f"feature {name!r} missing")
        col = np.asarray(columns[name], dtype=np.float64)
        if n is None:
            n = col.shape[0]
            total = np.full(n, c.intercept)
        elif col.shape[0] != n:
            raise LengthMismatch("feature columns differ in length")
        total = total + weight * col
    return total


def abstention_from_quality(predicted_quality):
    """Low predicted quality means abstain first."""
    return -np.asarray(predicted_quality, dtype=np.float64) if np.ndim(predicted_quality) else -float(predicted_quality)


def train_split(n: int, fraction: float = 0.1, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint seeded (train, eval) index arrays, each sorted."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    m = int(round(n * fraction))
    m = min(max(m, 1), n - 1) if n > 1 else 0
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:m]), np.sort(perm[m:])

"""Discriminative OOD baselines: a binary logistic-regression logit and a KNN distance."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from . import _kernels, linalg
from ._parallel import map_rows
from .errors import DimensionMismatch, EmptyInput, KTooLarge, NotConverged, NotPositiveDefinite, ZeroVector

DEFAULT_L2 = 1e-4
DEFAULT_K = 1000
DEFAULT_ALPHA_PCT = 100.0


@dataclass(frozen=True)
class BinaryClassifier:
    beta0: float
    beta1: np.ndarray
    l2: float
    n_iter: int
    converged: bool
    objective_trace: tuple[float, ...] = field(default=(), compare=False)

    @property
    def d(self) -> int:
        return self.beta1.shape[0]


def _objective(beta: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    eta = X @ beta
    # mean negative log-likelihood, log(1 + e^eta) - y * eta, computed stably
    nll = np.logaddexp(0.0, eta) - y * eta
    return float(nll.mean() + 0.5 * l2 * beta[1:] @ beta[1:])


def logistic_gradient(beta0: float, beta1, pos, neg, l2: float) -> np.ndarray:
    """Gradient of the penalized mean NLL at (beta0, beta1); label 1 = ``pos``."""
    X, y = _design(linalg.as_rows(pos), linalg.as_rows(neg))
    beta = np.concatenate([[beta0], np.asarray(beta1, dtype=np.float64)])
    p = _sigmoid(X @ beta)
    g = X.T @ (p - y) / X.shape[0]
    g[1:] += l2 * beta[1:]
    return g


def _sigmoid(eta):
    return np.exp(-np.logaddexp(0.0, -eta))


def _design(pos, neg):
    X = np.vstack([pos, neg])
    X = np.hstack([np.ones((X.shape[0], 1)), X])
    y = np.concatenate([np.ones(pos.shape[0]), np.zeros(neg.shape[0])])
    return X, y


def balance(pos: np.ndarray, neg: np.ndarray, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Downsample the larger class (without replacement) to the smaller one's size."""
    if pos.shape[0] == neg.shape[0]:
        return pos, neg
    rng = np.random.default_rng(seed)
    m = min(pos.shape[0], neg.shape[0])
    if pos.shape[0] > m:
        pos = pos[np.sort(rng.choice(pos.shape[0], m, replace=False))]
    else:
        neg = neg[np.sort(rng.choice(neg.shape[0], m, replace=False))]
    return pos, neg


def train_logistic(
    pos,
    neg,
    l2: float = DEFAULT_L2,
    max_iter: int = 100,
    tol: float = 1e-8,
    balanced: bool = True,
    seed: int = 0,
) -> BinaryClassifier:
    """L2-penalized logistic regression fit by IRLS (Newton) with step halving.

    ``pos`` is label 1 (background / OOD), ``neg`` label 0 (in-domain).  The
    objective is the mean negative log-likelihood plus ``l2/2 * |beta1|^2``;
    the intercept is not penalized.  Stops when the largest absolute gradient
    entry drops below ``tol``.  If that never happens the model is returned
    with ``converged=False`` and a :class:`NotConverged` warning.
    """
    pos = linalg.as_rows(pos, "pos")
    neg = linalg.as_rows(neg, "neg")
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise EmptyInput("both classes need at least one row")
    if pos.shape[1] != neg.shape[1]:
        raise DimensionMismatch(f"pos d={pos.shape[1]} vs neg d={neg.shape[1]}")
    if not l2 > 0:
        raise ValueError("l2 must be positive")
    if balanced:
        pos, neg = balance(pos, neg, seed)

    X, y = _design(pos, neg)
    n, p = X.shape
    penalty = np.full(p, l2)
    penalty[0] = 0.0
    beta = np.zeros(p)
    obj = _objective(beta, X, y, l2)
    trace = [obj]
    converged = False
    steps = 0
    while True:
        prob = _sigmoid(X @ beta)
        grad = X.T @ (prob - y) / n + penalty * beta
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        if steps >= max_iter:
            break
        w = prob * (1.0 - prob)
        hess = (X * w[:, None]).T @ X / n
        hess[np.diag_indices(p)] += penalty
        step = _newton_step(hess, grad)
        t = 1.0
        cand = beta - step
        cand_obj = _objective(cand, X, y, l2)
        while cand_obj > obj and t > 1e-10:
            t *= 0.5
            cand = beta - t * step
            cand_obj = _objective(cand, X, y, l2)
        if cand_obj > obj:
            # no descent left at machine precision
            break
        beta, obj = cand, cand_obj
        trace.append(obj)
        steps += 1

    if not converged:
        warnings.warn(f"IRLS stopped after {steps} iterations without reaching tol={tol}", NotConverged, stacklevel=2)
    return BinaryClassifier(
        beta0=float(beta[0]),
        beta1=beta[1:].copy(),
        l2=float(l2),
        n_iter=steps,
        converged=converged,
        objective_trace=tuple(trace),
    )


def _newton_step(hess, grad):
    # Hessian is SPD except when the intercept's weights all underflow
    jitter = 0.0
    scale = max(1.0, float(np.max(np.diag(hess))))
    for _ in range(8):
        try:
            h = hess if jitter == 0.0 else hess + jitter * np.eye(hess.shape[0])
            lower = linalg.cholesky(h)
            break
        except NotPositiveDefinite:
            jitter = scale * (1e-12 if jitter == 0.0 else jitter * 100)
    else:
        return np.linalg.lstsq(hess, grad, rcond=None)[0]
    return cho_solve((lower, True), grad)


def logit_score(c: BinaryClassifier, x) -> float:
    x = linalg.as_vector(x)
    if x.shape[0] != c.d:
        raise DimensionMismatch(f"x has length {x.shape[0]}, classifier expects {c.d}")
    return float(c.beta0 + c.beta1 @ x)


def logit_batch(c: BinaryClassifier, rows) -> np.ndarray:
    arr = linalg.as_rows(rows)
    if arr.shape[0] == 0:
        return np.empty(0)
    if arr.shape[1] != c.d:
        raise DimensionMismatch(f"rows have {arr.shape[1]} columns, classifier expects {c.d}")
    return c.beta0 + arr @ c.beta1


# ---------------------------------------------------------------------------
# KNN


def unit_rows(rows: np.ndarray) -> np.ndarray:
    """Scale each row to Euclidean norm 1.

    The norm is accumulated coordinate by coordinate so the result is
    reproducible independent of BLAS.
    """
    arr = np.asarray(rows, dtype=np.float64)
    sq = np.zeros(arr.shape[0])
    for j in range(arr.shape[1]):
        sq += arr[:, j] * arr[:, j]
    norms = np.sqrt(sq)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise ZeroVector(f"row {bad} has zero norm")
    return arr / norms[:, None]


@dataclass(frozen=True)
class KnnIndex:
    rows: np.ndarray
    k: int = DEFAULT_K
    alpha_pct: float = DEFAULT_ALPHA_PCT

    @property
    def d(self) -> int:
        return self.rows.shape[1]


def build_knn_index(rows, k: int = DEFAULT_K, alpha_pct: float = DEFAULT_ALPHA_PCT) -> KnnIndex:
    arr = linalg.as_rows(rows)
    if arr.shape[0] == 0:
        raise EmptyInput("KNN index needs at least one row")
    if k < 1:
        raise ValueError("k must be positive")
    if k > arr.shape[0]:
        raise KTooLarge(f"k={k} exceeds the {arr.shape[0]} stored rows")
    if not 0 < alpha_pct <= 100:
        raise ValueError("alpha_pct must lie in (0, 100]")
    return KnnIndex(np.ascontiguousarray(unit_rows(arr)), int(k), float(alpha_pct))


def _subsample(idx: KnnIndex, seed: int) -> np.ndarray:
    n = idx.rows.shape[0]
    if idx.alpha_pct >= 100:
        return idx.rows
    m = max(1, int(math.floor(n * idx.alpha_pct / 100.0 + 0.5)))
    rng = np.random.default_rng(seed)
    return np.ascontiguousarray(idx.rows[np.sort(rng.choice(n, m, replace=False))])


def knn_batch(idx: KnnIndex, rows, seed: int = 0, threads: int | None = None) -> np.ndarray:
    """Distance from each unit-normalized row to its k-th nearest stored row.

    One subsample (``alpha_pct`` percent of the stored rows, drawn with
    ``seed``) is shared by the whole batch.
    """
    arr = linalg.as_rows(rows)
    if arr.shape[0] == 0:
        return np.empty(0)
    if arr.shape[1] != idx.d:
        raise DimensionMismatch(f"rows have {arr.shape[1]} columns, index expects {idx.d}")
    ref = _subsample(idx, seed)
    if idx.k > ref.shape[0]:
        raise KTooLarge(f"k={idx.k} exceeds the subsample size {ref.shape[0]}")
    queries = np.ascontiguousarray(unit_rows(arr))
    return map_rows(lambda block: _kernels.knn_kth(ref, block, idx.k), queries, threads, chunk=64)


def knn_score(idx: KnnIndex, x, seed: int = 0) -> float:
    x = linalg.as_vector(x)
    return float(knn_batch(idx, x.reshape(1, -1), seed, threads=1)[0])

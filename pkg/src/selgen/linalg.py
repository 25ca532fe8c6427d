"""Dense kernels: mean, covariance, Cholesky and the Mahalanobis quadratic form.

All arithmetic is float64.  Covariances use the maximum-likelihood
denominator N; callers wanting the unbiased estimate can rescale by
N / (N - 1).  Nothing here ever forms an explicit inverse.
"""

import numpy as np

from . import _kernels
from ._parallel import map_rows
from .errors import DimensionMismatch, EmptyInput, NonFiniteInput, NotPositiveDefinite, SingularCovariance

DEFAULT_RIDGE = 1e-6


def as_rows(rows, name: str = "rows") -> np.ndarray:
    """Coerce to a finite float64 (N, d) array."""
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name}: contains NaN or Inf")
    return arr


def as_vector(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name}: expected a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name}: contains NaN or Inf")
    return arr


def mean(rows) -> np.ndarray:
    arr = as_rows(rows)
    if arr.shape[0] == 0:
        raise EmptyInput("mean of zero rows")
    return arr.mean(axis=0)


def covariance(rows, mu=None, ridge: float = DEFAULT_RIDGE, check: bool = True) -> np.ndarray:
    """MLE covariance plus ``ridge * trace/d`` on the diagonal.

    The result is exactly symmetric.  With ``ridge == 0`` and ``check`` set,
    positive definiteness is verified by attempting a Cholesky factorization
    and :class:`SingularCovariance` is raised on failure.
    """
    arr = as_rows(rows)
    n, d = arr.shape
    if n == 0:
        raise EmptyInput("covariance of zero rows")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    mu = arr.mean(axis=0) if mu is None else as_vector(mu, "mu")
    if mu.shape[0] != d:
        raise DimensionMismatch(f"mu has length {mu.shape[0]}, rows have {d} columns")
    centered = arr - mu
    cov = centered.T @ centered / n
    cov = 0.5 * (cov + cov.T)
    if ridge > 0:
        cov[np.diag_indices(d)] += ridge * np.trace(cov) / d
    elif check:
        _, failed = _kernels.cholesky(cov, _kernels.pivot_tolerance(cov))
        if failed >= 0:
            raise SingularCovariance(f"covariance is not positive definite (pivot {failed})", failed)
    return cov


def cholesky(m) -> np.ndarray:
    """Lower-triangular factor L with L @ L.T == m."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"cholesky needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput("matrix contains NaN or Inf")
    a = np.ascontiguousarray(a)
    lower, failed = _kernels.cholesky(a, _kernels.pivot_tolerance(a))
    if failed >= 0:
        raise NotPositiveDefinite(f"non-positive pivot at index {failed}", failed)
    return lower


def _check_dims(d_x: int, mu: np.ndarray, chol: np.ndarray) -> None:
    if mu.shape[0] != d_x or chol.shape != (d_x, d_x):
        raise DimensionMismatch(
            f"dimension mismatch: x has {d_x}, mu has {mu.shape[0]}, factor is {chol.shape}"
        )


def mahalanobis_sq(x, mu, chol) -> float:
    """(x - mu)^T Sigma^{-1} (x - mu) given the Cholesky factor of Sigma."""
    x = as_vector(x)
    mu = np.asarray(mu, dtype=np.float64)
    chol = np.asarray(chol, dtype=np.float64)
    _check_dims(x.shape[0], mu, chol)
    return float(_kernels.mahalanobis_rows(x.reshape(1, -1), mu, chol)[0])


def mahalanobis_sq_rows(rows, mu, chol, threads: int | None = None) -> np.ndarray:
    """Row-wise :func:`mahalanobis_sq`; chunked, optionally threaded, deterministic."""
    arr = as_rows(rows)
    mu = np.asarray(mu, dtype=np.float64)
    chol = np.asarray(chol, dtype=np.float64)
    if arr.shape[0] == 0:
        return np.empty(0)
    _check_dims(arr.shape[1], mu, chol)
    arr = np.ascontiguousarray(arr)
    return map_rows(lambda block: _kernels.mahalanobis_rows(block, mu, chol), arr, threads)

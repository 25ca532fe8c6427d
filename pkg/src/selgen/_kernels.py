"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The backend is picked once at import time.  Set ``SELGEN_DISABLE_NUMBA=1`` to
force the numpy path (also used automatically when numba is not importable).
Both flavours stay importable as ``<name>_nb`` / ``<name>_np`` so tests and
the benchmark can compare them side by side.

Kernels never validate their inputs; the public modules do that.
"""

import os

import numpy as np
from scipy.linalg import solve_triangular

_TRUTHY = {"1", "true", "yes", "on"}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SELGEN_DISABLE_NUMBA", "").strip().lower() not in _TRUTHY
BACKEND = "numba" if USE_NUMBA else "numpy"


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def pivot_tolerance(a: np.ndarray) -> float:
    """Pivots at or below this value are treated as non-positive."""
    d = a.shape[0]
    top = float(np.max(np.abs(np.diag(a)))) if d else 0.0
    return d * np.finfo(np.float64).eps * top


# ---------------------------------------------------------------------------
# Cholesky: returns (L, failed_pivot) with failed_pivot == -1 on success.


@_njit
def cholesky_nb(a, tol):
    d = a.shape[0]
    lower = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= lower[i, k] * lower[j, k]
            if i == j:
                if not s > tol:
                    return lower, i
                lower[i, i] = np.sqrt(s)
            else:
                lower[i, j] = s / lower[j, j]
    return lower, -1


def cholesky_np(a, tol):
    d = a.shape[0]
    lower = np.zeros((d, d))
    for j in range(d):
        row = lower[j, :j]
        s = a[j, j] - row @ row
        if not s > tol:
            return lower, j
        piv = np.sqrt(s)
        lower[j, j] = piv
        if j + 1 < d:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ row) / piv
    return lower, -1


# ---------------------------------------------------------------------------
# Squared Mahalanobis distance of every row of x via forward substitution.


@_njit
def mahalanobis_rows_nb(x, mu, lower):
    n, d = x.shape
    out = np.empty(n)
    v = np.empty(d)
    for r in range(n):
        acc = 0.0
        for i in range(d):
            s = x[r, i] - mu[i]
            for k in range(i):
                s -= lower[i, k] * v[k]
            v[i] = s / lower[i, i]
            acc += v[i] * v[i]
        out[r] = acc
    return out


def mahalanobis_rows_np(x, mu, lower):
    if x.shape[0] == 0:
        return np.empty(0)
    v = solve_triangular(lower, (x - mu).T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", v, v)


# ---------------------------------------------------------------------------
# k-th smallest Euclidean distance from each query to the reference rows.
# Squared distances accumulate coordinate by coordinate, left to right, so
# both flavours produce bit-identical values.


@_njit
def knn_kth_nb(ref, queries, k):
    n, d = ref.shape
    nq = queries.shape[0]
    out = np.empty(nq)
    dist = np.empty(n)
    for q in range(nq):
        for r in range(n):
            acc = 0.0
            for j in range(d):
                diff = queries[q, j] - ref[r, j]
                acc += diff * diff
            dist[r] = acc
        out[q] = np.sqrt(np.partition(dist, k - 1)[k - 1])
    return out


def knn_kth_np(ref, queries, k, block_elems=1 << 22):
    n, d = ref.shape
    nq = queries.shape[0]
    out = np.empty(nq)
    step = max(1, block_elems // max(n, 1))
    for start in range(0, nq, step):
        q = queries[start : start + step]
        acc = np.zeros((q.shape[0], n))
        for j in range(d):
            diff = q[:, j, None] - ref[None, :, j]
            acc += diff * diff
        out[start : start + step] = np.sqrt(np.partition(acc, k - 1, axis=1)[:, k - 1])
    return out


# ---------------------------------------------------------------------------
# Kendall pair counts: (concordant, discordant, tied only in x, tied only in y).


@_njit
def kendall_counts_nb(x, y):
    n = x.shape[0]
    c = 0
    dis = 0
    tx = 0
    ty = 0
    for i in range(n - 1):
        xi = x[i]
        yi = y[i]
        for j in range(i + 1, n):
            sx = int(x[j] > xi) - int(x[j] < xi)
            sy = int(y[j] > yi) - int(y[j] < yi)
            if sx == 0:
                if sy != 0:
                    tx += 1
            elif sy == 0:
                ty += 1
            elif sx == sy:
                c += 1
            else:
                dis += 1
    return c, dis, tx, ty


def kendall_counts_np(x, y):
    c = dis = tx = ty = 0
    for i in range(x.shape[0] - 1):
        xs = x[i + 1 :]
        ys = y[i + 1 :]
        sx = (xs > x[i]).astype(np.int8) - (xs < x[i])
        sy = (ys > y[i]).astype(np.int8) - (ys < y[i])
        prod = sx * sy
        c += int(np.count_nonzero(prod > 0))
        dis += int(np.count_nonzero(prod < 0))
        tx += int(np.count_nonzero((sx == 0) & (sy != 0)))
        ty += int(np.count_nonzero((sy == 0) & (sx != 0)))
    return c, dis, tx, ty


if USE_NUMBA:
    cholesky = cholesky_nb
    mahalanobis_rows = mahalanobis_rows_nb
    knn_kth = knn_kth_nb
    kendall_counts = kendall_counts_nb
else:
    cholesky = cholesky_np
    mahalanobis_rows = mahalanobis_rows_np
    knn_kth = knn_kth_np
    kendall_counts = kendall_counts_np

FLAVOURS = {
    "cholesky": (cholesky_nb, cholesky_np),
    "mahalanobis_rows": (mahalanobis_rows_nb, mahalanobis_rows_np),
    "knn_kth": (knn_kth_nb, knn_kth_np),
    "kendall_counts": (kendall_counts_nb, kendall_counts_np),
}

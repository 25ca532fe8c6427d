"""Gaussian OOD scores: Mahalanobis distance (MD) and relative MD (RMD).

A foreground Gaussian is fit on in-domain embeddings and a background
Gaussian on a broad corpus.  ``RMD(x) = MD_fg(x) - MD_bg(x)``; higher means
more out-of-domain.  Input and output embeddings get separate pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from . import linalg
from .errors import DimensionMismatch, EmptyInput, NotPositiveDefinite, SideNotConfigured, SingularCovariance

SIDES = ("input", "output")


@dataclass(frozen=True)
class GaussianModel:
    mu: np.ndarray
    chol: np.ndarray
    n_fit: int
    ridge: float

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def cov(self) -> np.ndarray:
        return self.chol @ self.chol.T


@dataclass(frozen=True)
class RmdScorer:
    input_fg: GaussianModel | None = None
    input_bg: GaussianModel | None = None
    output_fg: GaussianModel | None = None
    output_bg: GaussianModel | None = None

    def __post_init__(self):
        for side in SIDES:
            fg, bg = getattr(self, f"{side}_fg"), getattr(self, f"{side}_bg")
            if fg is not None and bg is not None and fg.d != bg.d:
                raise DimensionMismatch(f"{side}: foreground d={fg.d} but background d={bg.d}")

    def pair(self, side: str) -> tuple[GaussianModel, GaussianModel]:
        if side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {side!r}")
        fg, bg = getattr(self, f"{side}_fg"), getattr(self, f"{side}_bg")
        if fg is None or bg is None:
            raise SideNotConfigured(f"{side} side needs both foreground and background models")
        return fg, bg

    def has_side(self, side: str) -> bool:
        return getattr(self, f"{side}_fg", None) is not None and getattr(self, f"{side}_bg", None) is not None

    def swapped(self) -> RmdScorer:
        """Foreground and background exchanged on both sides."""
        return RmdScorer(self.input_bg, self.input_fg, self.output_bg, self.output_fg)


def _factor(cov: np.ndarray, ridge: float) -> np.ndarray:
    try:
        return linalg.cholesky(cov)
    except NotPositiveDefinite as exc:
        if ridge > 0:
            raise
        raise SingularCovariance(f"covariance is singular; use ridge > 0 ({exc})", exc.pivot_index) from exc


def fit_gaussian(rows, ridge: float = linalg.DEFAULT_RIDGE) -> GaussianModel:
    arr = linalg.as_rows(rows)
    if arr.shape[0] < 2:
        raise EmptyInput(f"need at least 2 rows to fit a Gaussian, got {arr.shape[0]}")
    mu = arr.mean(axis=0)
    cov = linalg.covariance(arr, mu, ridge, check=False)
    return GaussianModel(mu=mu, chol=_factor(cov, ridge), n_fit=arr.shape[0], ridge=float(ridge))


def fit_pooled_pair(fg_rows, bg_rows, ridge: float = linalg.DEFAULT_RIDGE) -> tuple[GaussianModel, GaussianModel]:
    """Foreground/background Gaussians sharing one within-class pooled covariance.

    With a shared covariance RMD collapses to an affine function of x (the
    logit of a linear classifier).  The default per-class fit is
    :func:`fit_gaussian`; this exists mainly to expose that reduction.
    """
    fg = linalg.as_rows(fg_rows, "fg_rows")
    bg = linalg.as_rows(bg_rows, "bg_rows")
    if fg.shape[0] < 2 or bg.shape[0] < 2:
        raise EmptyInput("each class needs at least 2 rows")
    if fg.shape[1] != bg.shape[1]:
        raise DimensionMismatch(f"fg d={fg.shape[1]} vs bg d={bg.shape[1]}")
    mu_fg, mu_bg = fg.mean(axis=0), bg.mean(axis=0)
    n = fg.shape[0] + bg.shape[0]
    cf, cb = fg - mu_fg, bg - mu_bg
    cov = (cf.T @ cf + cb.T @ cb) / n
    cov = 0.5 * (cov + cov.T)
    d = cov.shape[0]
    if ridge > 0:
        cov[np.diag_indices(d)] += ridge * np.trace(cov) / d
    chol = _factor(cov, ridge)
    return (
        GaussianModel(mu_fg, chol, fg.shape[0], float(ridge)),
        GaussianModel(mu_bg, chol, bg.shape[0], float(ridge)),
    )


def fit_rmd(
    input_fg=None,
    input_bg=None,
    output_fg=None,
    output_bg=None,
    ridge: float = linalg.DEFAULT_RIDGE,
    bg_ridge: float | None = None,
    pooled: bool = False,
) -> RmdScorer:
    """Fit the (up to) four Gaussians; either side may be left out."""
    bg_ridge = ridge if bg_ridge is None else bg_ridge
    models = {}
    for side, fg_rows, bg_rows in (("input", input_fg, input_bg), ("output", output_fg, output_bg)):
        if fg_rows is None and bg_rows is None:
            continue
        if fg_rows is None or bg_rows is None:
            raise SideNotConfigured(f"{side} side needs both foreground and background rows")
        if pooled:
            fg, bg = fit_pooled_pair(fg_rows, bg_rows, ridge)
        else:
            fg, bg = fit_gaussian(fg_rows, ridge), fit_gaussian(bg_rows, bg_ridge)
        models[f"{side}_fg"], models[f"{side}_bg"] = fg, bg
    return RmdScorer(**models)


def md_score(model: GaussianModel, x) -> float:
    return linalg.mahalanobis_sq(x, model.mu, model.chol)


def md_batch(model: GaussianModel, rows, threads: int | None = None) -> np.ndarray:
    return linalg.mahalanobis_sq_rows(rows, model.mu, model.chol, threads)


def rmd_score(scorer: RmdScorer, side: str, x) -> float:
    fg, bg = scorer.pair(side)
    return md_score(fg, x) - md_score(bg, x)


def batch_score(scorer: RmdScorer, rows, side: str, threads: int | None = None) -> np.ndarray:
    """RMD for every row, in input order."""
    fg, bg = scorer.pair(side)
    arr = linalg.as_rows(rows)
    if arr.shape[0] == 0:
        return np.empty(0)
    return md_batch(fg, arr, threads) - md_batch(bg, arr, threads)


def ood_score(model: GaussianModel | RmdScorer, x, side: str = "input") -> float:
    """RMD when given a scorer, plain MD when given a single Gaussian."""
    if isinstance(model, GaussianModel):
        return md_score(model, x)
    return rmd_score(model, side, x)


def ood_batch(model: GaussianModel | RmdScorer, rows, side: str = "input", threads: int | None = None) -> np.ndarray:
    if isinstance(model, GaussianModel):
        return md_batch(model, rows, threads)
    return batch_score(model, rows, side, threads)


def linear_rmd(fg: GaussianModel, bg: GaussianModel) -> tuple[float, np.ndarray]:
    """Intercept and weights of RMD written as ``b0 + w @ x``.

    Only exact when fg and bg share a covariance (see :func:`fit_pooled_pair`).
    Half of this is the balanced-prior logit of "background vs in-domain".
    """
    if not np.array_equal(fg.chol, bg.chol):
        raise ValueError("RMD is affine only when both Gaussians share one covariance")
    a_fg = cho_solve((fg.chol, True), fg.mu)
    a_bg = cho_solve((bg.chol, True), bg.mu)
    weights = 2.0 * (a_bg - a_fg)
    intercept = float(fg.mu @ a_fg - bg.mu @ a_bg)
    return intercept, weights

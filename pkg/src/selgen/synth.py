"""Seeded synthetic scenarios with known ground truth.

Randomness comes from a counter-based SplitMix64 stream with Box-Muller
normals, so a (spec, seed) pair always yields the same numbers regardless of
numpy's bit generators or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import BadCov, NotPositiveDefinite
from .store import EmbeddingStore, ExampleMeta

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


class SplitMix64:
    """SplitMix64; output i is ``mix(seed + i * golden)`` so draws vectorize."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + idx * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GOLDEN) & _MASK
        return z

    def spawn(self, n: int) -> list["SplitMix64"]:
        return [SplitMix64(int(s)) for s in self.next_u64(n)]

    def uniform(self, n: int) -> np.ndarray:
        """Uniform draws in the open interval (0, 1)."""
        return ((self.next_u64(n) >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        theta = 2.0 * math.pi * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]


@dataclass(frozen=True)
class DomainSpec:
    name: str
    n: int
    d: int
    mean: np.ndarray | None = None
    cov: str = "identity"  # identity | diagonal | spd
    cov_values: np.ndarray | None = None
    seed: int = 0


def _coloring(spec: DomainSpec) -> np.ndarray | None:
    """Matrix L with samples = mean + z @ L.T, or None for the identity."""
    if spec.cov == "identity":
        return None
    vals = np.asarray(spec.cov_values, dtype=np.float64) if spec.cov_values is not None else None
    if vals is None:
        raise BadCov(f"cov={spec.cov!r} needs cov_values")
    if spec.cov == "diagonal":
        if vals.shape != (spec.d,) or np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise BadCov("diagonal covariance needs d nonnegative finite values")
        return np.diag(np.sqrt(vals))
    if spec.cov == "spd":
        if vals.shape != (spec.d, spec.d) or not np.allclose(vals, vals.T, rtol=1e-9, atol=0):
            raise BadCov("spd covariance must be a symmetric d x d matrix")
        try:
            return linalg.cholesky(0.5 * (vals + vals.T))
        except NotPositiveDefinite as exc:
            raise BadCov(f"covariance is not positive definite: {exc}") from exc
    raise BadCov(f"unknown covariance kind {spec.cov!r}")


def sample_domain(spec: DomainSpec) -> np.ndarray:
    if spec.n < 1 or spec.d < 1:
        raise ValueError("n and d must be positive")
    mean = np.zeros(spec.d) if spec.mean is None else np.asarray(spec.mean, dtype=np.float64)
    if mean.shape != (spec.d,):
        raise ValueError(f"mean must have length {spec.d}")
    color = _coloring(spec)
    z = SplitMix64(spec.seed).normal(spec.n * spec.d).reshape(spec.n, spec.d)
    if color is not None:
        z = z @ color.T
    return mean + z


def gen_domain(spec: DomainSpec, split: str = "test", side: str = "input") -> EmbeddingStore:
    x = sample_domain(spec)
    metas = [ExampleMeta(id=f"{spec.name}-{i}", dataset=spec.name, split=split, side=side) for i in range(spec.n)]
    return EmbeddingStore(x, metas)


@dataclass(frozen=True)
class ScenarioCoefficients:
    """quality = clip(base - a * ppx_term - b * shift_term + noise * eps, lo, hi)."""

    base: float = 0.5
    a: float = 0.1
    b: float = 0.03
    ppx_center: float = 10.0
    ppx_scale: float = 2.0
    lo: float = 0.0
    hi: float = 1.0

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


IN_DOMAIN = "in_domain"
SHIFTED = "shifted"


def gen_selective_scenario(
    seed: int,
    n_in: int,
    n_ood: int,
    shift: float,
    noise: float,
    d: int = 8,
    n_fit: int | None = None,
    coefficients: ScenarioCoefficients | None = None,
) -> EmbeddingStore:
    """Pool of in-domain and shifted rows with planted perplexity and quality.

    In-domain embeddings ~ N(0, I); shifted ones ~ N(shift * 1, I).  The store
    carries three splits:

    * ``fit_fg``: ``n_fit`` in-domain rows for the foreground Gaussian,
    * ``fit_bg``: ``n_fit`` rows, half in-domain half shifted (a broad corpus),
    * ``test``: ``n_in`` in-domain + ``n_ood`` shifted rows with perplexity and
      quality.

    Perplexity is ``ppx_center + ppx_scale * g`` with g ~ N(0, 1) on every
    test row, but only in-domain quality depends on it (``ppx_term = g``
    there, 0 on shifted rows).  Shifted rows instead lose quality in
    proportion to ``shift_term = mean(z)``, their displacement along the shift
    direction.  Terms and coefficients are recorded in ``meta.extra``.
    """
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    coef = coefficients or ScenarioCoefficients()
    n_fit = max(n_in, 2 * d) if n_fit is None else n_fit
    streams = SplitMix64(seed).spawn(8)
    shift_vec = np.full(d, float(shift))

    def draw(stream, n, mean):
        return mean + stream.normal(n * d).reshape(n, d)

    fit_fg = draw(streams[0], n_fit, 0.0)
    n_bg_in = n_fit // 2
    fit_bg = np.vstack([draw(streams[1], n_bg_in, 0.0), draw(streams[2], n_fit - n_bg_in, shift_vec)])
    test_in = draw(streams[3], n_in, 0.0)
    test_ood = draw(streams[4], n_ood, shift_vec)

    g = streams[5].normal(n_in + n_ood)
    ppx = np.maximum(coef.ppx_center + coef.ppx_scale * g, 1.0)
    ppx_obs = (ppx - coef.ppx_center) / coef.ppx_scale
    eps = streams[6].normal(n_in + n_ood)
    is_in = np.r_[np.ones(n_in, dtype=bool), np.zeros(n_ood, dtype=bool)]
    ppx_term = np.where(is_in, ppx_obs, 0.0)
    shift_term = np.where(is_in, 0.0, np.vstack([test_in, test_ood]).mean(axis=1))
    raw = coef.base - coef.a * ppx_term - coef.b * shift_term + noise * eps
    quality = np.clip(raw, coef.lo, coef.hi)

    metas = [ExampleMeta(id=f"fit_fg-{i}", dataset=IN_DOMAIN, split="fit_fg") for i in range(n_fit)]
    metas += [
        ExampleMeta(id=f"fit_bg-{i}", dataset=IN_DOMAIN if i < n_bg_in else SHIFTED, split="fit_bg")
        for i in range(n_fit)
    ]
    coef_dict = coef.as_dict()
    for i in range(n_in + n_ood):
        metas.append(
            ExampleMeta(
                id=f"test-{i}",
                dataset=IN_DOMAIN if is_in[i] else SHIFTED,
                split="test",
                perplexity=float(ppx[i]),
                quality={"quality": float(quality[i])},
                extra={
                    "ppx_term": float(ppx_term[i]),
                    "shift_term": float(shift_term[i]),
                    "noise_term": float(noise * eps[i]),
                    "coefficients": coef_dict,
                },
            )
        )
    matrix = np.vstack([fit_fg, fit_bg, test_in, test_ood])
    return EmbeddingStore(matrix, metas)

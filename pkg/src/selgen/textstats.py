"""n-gram overlap between a test corpus and the in-domain corpus.

Tokens are opaque integer ids.  The headline rate is test-relative: the
percentage of unique test n-grams that also occur in the training corpus.
Jaccard similarity is reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class NgramProfile:
    ngrams: tuple[frozenset, ...]  # index n-1 holds the order-n set
    token_count: int

    @property
    def n_max(self) -> int:
        return len(self.ngrams)


def build_profile(token_sequences: Iterable[Sequence[int]], n_max: int = 4) -> NgramProfile:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    sets = [set() for _ in range(n_max)]
    tokens = 0
    for seq in token_sequences:
        seq = tuple(int(t) for t in seq)
        tokens += len(seq)
        for n in range(1, n_max + 1):
            sets[n - 1].update(seq[i : i + n] for i in range(len(seq) - n + 1))
    return NgramProfile(tuple(frozenset(s) for s in sets), tokens)


def geometric_mean(rates: Sequence[float]) -> float:
    if not rates or any(r <= 0 for r in rates):
        return 0.0
    if all(r == rates[0] for r in rates):
        return float(rates[0])
    # rates are at most 100, so the product of a handful of them cannot overflow
    return math.prod(rates) ** (1.0 / len(rates))


def overlap_report(test: NgramProfile, train: NgramProfile) -> dict:
    """Per-order overlap rates in percent plus their geometric mean."""
    if test.n_max != train.n_max:
        raise ValueError(f"profiles disagree on n_max ({test.n_max} vs {train.n_max})")
    rates, jaccard = {}, {}
    for n in range(1, test.n_max + 1):
        t, r = test.ngrams[n - 1], train.ngrams[n - 1]
        shared = len(t & r)
        rates[n] = 100.0 * shared / len(t) if t else 0.0
        union = len(t | r)
        jaccard[n] = 100.0 * shared / union if union else 0.0
    orders = range(1, min(4, test.n_max) + 1)
    return {
        "overlap_rate": rates,
        "overall": geometric_mean([rates[n] for n in orders]),
        "jaccard": jaccard,
        "jaccard_overall": geometric_mean([jaccard[n] for n in orders]),
        "test_tokens": test.token_count,
        "train_tokens": train.token_count,
    }

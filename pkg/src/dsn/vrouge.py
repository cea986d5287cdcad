"""Summary quality scoring over visual-word counts.

The raw score is the recall of each reference summary's word histogram by
the candidate's histogram, averaged over references. It is monotone and
submodular in the candidate set. For reporting, scores are affinely
normalized so that random summaries average 0 and reference summaries
average 1; the training loss is 1 minus the raw score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCollectionError
from .numerics import seeded_rng


@dataclass(frozen=True)
class NormConstants:
    """Affine normalization for one collection at a fixed budget.

    r_random is the mean raw score of `samples` uniform k-subsets drawn from
    the generator seeded with `seed`; r_human is the mean raw score of the
    reference summaries themselves.
    """

    r_random: float
    r_human: float
    samples: int
    seed: int
    k: int


def merge_counts(word_counts: list[dict[int, int]], subset) -> dict[int, int]:
    """Pool the word histograms of the given items."""
    merged: dict[int, int] = {}
    for v in sorted(subset):
        for w, c in word_counts[v].items():
            merged[w] = merged.get(w, 0) + c
    return merged


def raw_vrouge(subset, refs, word_counts) -> float:
    """Mean recall of each reference histogram by the candidate histogram.

    Args:
        subset: candidate item ids.
        refs: reference summaries, each an iterable of item ids.
        word_counts: per-item word histograms for the whole collection.
    """
    refs = list(refs)
    if not refs:
        raise ValueError("at least one reference summary is required")
    cand = merge_counts(word_counts, subset)
    total = 0.0
    for ref in refs:
        hist = merge_counts(word_counts, ref)
        denom = sum(hist.values())
        if denom <= 0:
            raise ValueError("reference summary has an empty word histogram")
        overlap = sum(min(cand.get(w, 0), c) for w, c in hist.items())
        total += overlap / denom
    return total / len(refs)


def training_loss(subset, refs, word_counts) -> float:
    """Max-margin training loss: 1 minus the raw recall score."""
    return 1.0 - raw_vrouge(subset, refs, word_counts)


def sample_random_subsets(n: int, k: int, samples: int, seed: int) -> list[np.ndarray]:
    """The deterministic list of uniform k-subsets used for normalization."""
    if not 1 <= k <= n:
        raise ValueError(f"budget {k} must lie in [1, {n}]")
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = seeded_rng(seed)
    return [np.sort(rng.choice(n, size=k, replace=False)) for _ in range(samples)]


def norm_constants(collection, k: int, samples: int = 1000, seed: int = 13, refs=None) -> NormConstants:
    """Estimate the random and human baselines for a collection.

    `refs` defaults to all reference summaries of the collection; passing an
    explicit subset scores against those references only (used for
    query-conditioned evaluation).
    """
    refs = list(refs) if refs is not None else list(collection.summaries)
    if not refs:
        raise ValueError(f"collection {collection.name!r} has no reference summaries")
    word_counts = collection.word_counts
    subsets = sample_random_subsets(collection.n, k, samples, seed)
    r_random = sum(raw_vrouge(s, refs, word_counts) for s in subsets) / len(subsets)
    r_human = sum(raw_vrouge(y, refs, word_counts) for y in refs) / len(refs)
    if r_human <= r_random:
        raise DegenerateCollectionError(
            f"collection {collection.name!r}: reference summaries score {r_human:.6f}, "
            f"no better than random {r_random:.6f}"
        )
    return NormConstants(r_random=r_random, r_human=r_human, samples=samples, seed=seed, k=k)


def normalized_vrouge(subset, constants: NormConstants, refs, word_counts) -> float:
    """Affine map of the raw score sending r_random to 0 and r_human to 1."""
    raw = raw_vrouge(subset, refs, word_counts)
    return (raw - constants.r_random) / (constants.r_human - constants.r_random)


class RecallLossObjective:
    """Marginal gains of the loss 1 - recall(A), for loss-augmented inference.

    The constant term of the loss never matters during greedy selection, so
    gain(v) is simply the negated recall increment of adding item v.
    """

    def __init__(self, word_counts: list[dict[int, int]], refs):
        self.n = len(word_counts)
        self.word_counts = word_counts
        self.ref_hists = [merge_counts(word_counts, r) for r in refs]
        self.ref_totals = [sum(h.values()) for h in self.ref_hists]
        if not self.ref_hists:
            raise ValueError("at least one reference summary is required")
        if any(t <= 0 for t in self.ref_totals):
            raise ValueError("reference summary has an empty word histogram")
        self._cand: dict[int, int] = {}
        self._member = np.zeros(self.n, dtype=bool)

    def gain(self, v: int) -> float:
        delta = 0.0
        for hist, total in zip(self.ref_hists, self.ref_totals):
            d = 0
            for w, c in self.word_counts[v].items():
                cap = hist.get(w)
                if cap is not None:
                    cur = self._cand.get(w, 0)
                    d += min(cur + c, cap) - min(cur, cap)
            delta += d / total
        return -delta / len(self.ref_hists)

    def add(self, v: int) -> None:
        if self._member[v]:
            raise ValueError(f"item {v} already selected")
        self._member[v] = True
        for w, c in self.word_counts[v].items():
            self._cand[w] = self._cand.get(w, 0) + c

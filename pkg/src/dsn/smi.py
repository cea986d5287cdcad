"""Query-focused set functions built from submodular mutual information:
graph-cut MI and two facility-location MI variants.

These score a candidate subset of the ground set against a fixed query set
through the data-to-query similarity kernel. Query vectors are constants
during differentiation; gradients flow only through the embedded items.
Min/max ties resolve to the lowest index, and for the first facility-
location variant a tied min assigns the subgradient to the query side.
"""

from __future__ import annotations

import numpy as np

from .embedder import EmbeddingState
from .submodular import Component, GainCache, subset_indices


def _require_sq(state: EmbeddingState) -> np.ndarray:
    if state.sq is None:
        raise ValueError("state was built without a query set")
    return state.sq


def eval_gcmi(sq, subset) -> float:
    """2 * sum_{i in A} sum_{j in Q} sq_ij: pure query affinity, modular in A."""
    sq = np.asarray(sq)
    idx = subset_indices(subset, sq.shape[0])
    if idx.size == 0:
        return 0.0
    return float(2.0 * sq[idx].sum())


def eval_fl1mi(s, sq, subset, lam: float) -> float:
    """sum_i min(max_{j in A} s_ij, lam * max_{j in Q} sq_ij)."""
    s = np.asarray(s)
    sq = np.asarray(sq)
    idx = subset_indices(subset, s.shape[0])
    if idx.size == 0 or sq.shape[1] == 0:
        return 0.0
    data_side = s[:, idx].max(axis=1)
    query_side = lam * sq.max(axis=1)
    return float(np.minimum(data_side, query_side).sum())


def eval_fl2mi(sq, subset, lam: float) -> float:
    """Bidirectional representation: sum over queries of their best summary
    match, plus lam times the sum over summary items of their best query
    match. sq is indexed data x query."""
    sq = np.asarray(sq)
    idx = subset_indices(subset, sq.shape[0])
    if idx.size == 0 or sq.shape[1] == 0:
        return 0.0
    query_cover = sq[idx].max(axis=0).sum()
    item_relevance = sq[idx].max(axis=1).sum()
    return float(query_cover + lam * item_relevance)


class _GcmiCache(GainCache):
    def __init__(self, sq):
        super().__init__(sq.shape[0])
        self.item_gain = 2.0 * sq.sum(axis=1)

    def gain(self, v):
        return float(self.item_gain[v])


class _Fl1miCache(GainCache):
    def __init__(self, s, sq, lam):
        super().__init__(s.shape[0])
        self.s = s
        self.best = np.zeros(s.shape[0])
        self.caps = lam * sq.max(axis=1) if sq.shape[1] else np.zeros(s.shape[0])

    def gain(self, v):
        before = np.minimum(self.best, self.caps)
        after = np.minimum(np.maximum(self.best, self.s[:, v]), self.caps)
        return float((after - before).sum())

    def add(self, v):
        g = self._insert(v)
        np.maximum(self.best, self.s[:, v], out=self.best)
        return g


class _Fl2miCache(GainCache):
    def __init__(self, sq, lam):
        super().__init__(sq.shape[0])
        self.sq = sq
        self.lam = lam
        self.query_best = np.zeros(sq.shape[1])
        self.item_relevance = lam * sq.max(axis=1) if sq.shape[1] else np.zeros(sq.shape[0])

    def gain(self, v):
        cover = np.maximum(self.query_best, self.sq[v]) - self.query_best
        return float(cover.sum() + self.item_relevance[v])

    def add(self, v):
        g = self._insert(v)
        np.maximum(self.query_best, self.sq[v], out=self.query_best)
        return g


class GraphCutMI(Component):
    """Query affinity via the graph-cut mutual information instance."""

    kind = "gcmi"
    requires_query = True

    def evaluate(self, state, subset):
        return eval_gcmi(_require_sq(state), subset)

    def make_cache(self, state):
        return _GcmiCache(_require_sq(state))

    def add_theta_weights(self, state, subset, coeff, acc):
        _require_sq(state)
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return
        acc.query_weights()[idx, :] += 2.0 * coeff


class FacilityLocationMI1(Component):
    """Diversity capped by query relevance, per ground-set item."""

    kind = "fl1mi"
    requires_query = True

    def __init__(self, lam: float = 1.0):
        self.lam = float(lam)

    def get_param(self):
        return self.lam

    def set_param(self, value):
        self.lam = float(value)

    def clamp(self):
        self.lam = max(self.lam, 0.0)

    def evaluate(self, state, subset):
        return eval_fl1mi(state.s, _require_sq(state), subset, self.lam)

    def make_cache(self, state):
        return _Fl1miCache(state.s, _require_sq(state), self.lam)

    def _sides(self, state, idx):
        sq = state.sq
        data_side = state.s[:, idx].max(axis=1)
        q_best = np.argmax(sq, axis=1)
        q_max = sq[np.arange(state.n), q_best]
        # Ties between the two sides of the min go to the query side.
        query_active = self.lam * q_max <= data_side
        return data_side, q_best, q_max, query_active

    def param_grad(self, state, subset):
        sq = _require_sq(state)
        idx = subset_indices(subset, state.n)
        if idx.size == 0 or sq.shape[1] == 0:
            return 0.0
        _, _, q_max, query_active = self._sides(state, idx)
        return float(q_max[query_active].sum())

    def add_theta_weights(self, state, subset, coeff, acc):
        sq = _require_sq(state)
        idx = subset_indices(subset, state.n)
        if idx.size == 0 or sq.shape[1] == 0:
            return
        data_side, q_best, _, query_active = self._sides(state, idx)
        data_best = idx[np.argmax(state.s[:, idx], axis=1)]
        rows = np.arange(state.n)
        data_rows = rows[~query_active]
        if data_rows.size:
            pw = acc.pair_weights()
            pw[data_rows, data_best[data_rows]] += coeff
        query_rows = rows[query_active]
        if query_rows.size:
            qw = acc.query_weights()
            qw[query_rows, q_best[query_rows]] += coeff * self.lam

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam}


class FacilityLocationMI2(Component):
    """Bidirectional query representation with a relevance weight."""

    kind = "fl2mi"
    requires_query = True

    def __init__(self, lam: float = 1.0):
        self.lam = float(lam)

    def get_param(self):
        return self.lam

    def set_param(self, value):
        self.lam = float(value)

    def clamp(self):
        self.lam = max(self.lam, 0.0)

    def evaluate(self, state, subset):
        return eval_fl2mi(_require_sq(state), subset, self.lam)

    def make_cache(self, state):
        return _Fl2miCache(_require_sq(state), self.lam)

    def param_grad(self, state, subset):
        sq = _require_sq(state)
        idx = subset_indices(subset, state.n)
        if idx.size == 0 or sq.shape[1] == 0:
            return 0.0
        return float(sq[idx].max(axis=1).sum())

    def add_theta_weights(self, state, subset, coeff, acc):
        sq = _require_sq(state)
        idx = subset_indices(subset, state.n)
        if idx.size == 0 or sq.shape[1] == 0:
            return
        qw = acc.query_weights()
        rows = sq[idx]
        cover_best = idx[np.argmax(rows, axis=0)]  # best summary item per query
        qw[cover_best, np.arange(sq.shape[1])] += coeff
        item_best = np.argmax(rows, axis=1)  # best query per summary item
        qw[idx, item_best] += coeff * self.lam

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam}

"""Generic-summarization set functions: facility location (plain and with a
redundancy penalty), saturated coverage, graph cut, and feature-based
concave coverage.

Every component offers three views of the same function: from-scratch
evaluation, O(n)-per-item marginal gains through an insertion cache, and
analytic subgradients with respect to its internal parameter and the
shared embedding parameters. Ties inside max/min structures always resolve
to the lowest index, and the subgradient follows the selected element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedder import EmbeddingState, ThetaGradAccumulator

# Saturated coverage keeps its saturation fraction strictly positive.
SC_LAMBDA_MIN = 1e-6


def subset_indices(subset, n: int) -> np.ndarray:
    """Sorted, validated item ids as an int array."""
    idx = sorted({int(v) for v in subset})
    if idx and (idx[0] < 0 or idx[-1] >= n):
        bad = idx[0] if idx[0] < 0 else idx[-1]
        raise ValueError(f"item id {bad} outside ground set of size {n}")
    return np.asarray(idx, dtype=np.intp)


@dataclass(frozen=True)
class Concave:
    """Monotone nondecreasing concave map applied elementwise."""

    kind: str = "sqrt"
    cap: float | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "sqrt":
            return np.sqrt(np.maximum(x, 0.0))
        if self.kind == "log1p":
            return np.log1p(np.maximum(x, 0.0))
        if self.kind == "capped":
            return np.minimum(x, self.cap)
        raise ValueError(f"unknown concave kind {self.kind!r}")

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "sqrt":
            safe = np.where(x > 0.0, x, 1.0)
            return np.where(x > 0.0, 0.5 / np.sqrt(safe), 0.0)
        if self.kind == "log1p":
            return 1.0 / (1.0 + np.maximum(x, 0.0))
        if self.kind == "capped":
            return np.where(x < self.cap, 1.0, 0.0)
        raise ValueError(f"unknown concave kind {self.kind!r}")


def make_concave(kind: str = "sqrt", cap: float | None = None) -> Concave:
    if kind not in ("sqrt", "log1p", "capped"):
        raise ValueError(f"unknown concave kind {kind!r}")
    if kind == "capped":
        if cap is None or cap <= 0:
            raise ValueError("capped concave needs a positive cap")
        return Concave(kind=kind, cap=float(cap))
    return Concave(kind=kind)


# ---------------------------------------------------------------------------
# From-scratch evaluation


def eval_facility_location(s, subset) -> float:
    """sum_i max_{j in A} s_ij, with the empty max taken as 0."""
    s = np.asarray(s)
    idx = subset_indices(subset, s.shape[0])
    if idx.size == 0:
        return 0.0
    return float(s[:, idx].max(axis=1).sum())


def eval_facility_location_penalty(s, subset, lam: float) -> float:
    """Facility location minus lam times the intra-summary similarity mass."""
    s = np.asarray(s)
    idx = subset_indices(subset, s.shape[0])
    if idx.size == 0:
        return 0.0
    return float(s[:, idx].max(axis=1).sum() - lam * s[np.ix_(idx, idx)].sum())


def eval_saturated_coverage(s, subset, lam: float) -> float:
    """sum_i min(sum_{j in A} s_ij, lam * sum_{j in V} s_ij)."""
    s = np.asarray(s)
    idx = subset_indices(subset, s.shape[0])
    if idx.size == 0:
        return 0.0
    return float(np.minimum(s[:, idx].sum(axis=1), lam * s.sum(axis=1)).sum())


def eval_graph_cut(s, subset, lam: float) -> float:
    """lam * sum_{i in V, j in A} s_ij - sum_{i,j in A} s_ij."""
    s = np.asarray(s)
    idx = subset_indices(subset, s.shape[0])
    if idx.size == 0:
        return 0.0
    return float(lam * s[:, idx].sum() - s[np.ix_(idx, idx)].sum())


def eval_feature_based(values, subset, gamma, concave: Concave | None = None) -> float:
    """sum_t gamma_t * psi(sum_{a in A} values[a, t]) for nonnegative values."""
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0):
        raise ValueError("feature-based evaluation needs nonnegative feature values")
    concave = concave or Concave()
    idx = subset_indices(subset, values.shape[0])
    if idx.size == 0:
        return 0.0
    mass = values[idx].sum(axis=0)
    return float(np.dot(np.asarray(gamma, dtype=np.float64), concave(mass)))


# ---------------------------------------------------------------------------
# Marginal-gain caches


class GainCache:
    """Incremental marginal gains f(A + v) - f(A) over one insertion sequence.

    `value` always equals f of the inserted set; `gain` never mutates state,
    `add` inserts (erroring on duplicates) and returns the realized gain.
    """

    def __init__(self, n: int):
        self.value = 0.0
        self._member = np.zeros(n, dtype=bool)

    def gain(self, v: int) -> float:
        raise NotImplementedError

    def _insert(self, v: int) -> float:
        if self._member[v]:
            raise ValueError(f"item {v} already selected")
        g = self.gain(v)
        self._member[v] = True
        self.value += g
        return g

    def add(self, v: int) -> float:
        return self._insert(v)


class _FacilityLocationCache(GainCache):
    def __init__(self, s):
        super().__init__(s.shape[0])
        self.s = s
        self.best = np.zeros(s.shape[0])

    def gain(self, v):
        return float(np.maximum(self.s[:, v] - self.best, 0.0).sum())

    def add(self, v):
        g = self._insert(v)
        np.maximum(self.best, self.s[:, v], out=self.best)
        return g


class _FacilityLocationPenaltyCache(GainCache):
    def __init__(self, s, lam):
        super().__init__(s.shape[0])
        self.s = s
        self.lam = lam
        self.best = np.zeros(s.shape[0])
        self.sel_sum = np.zeros(s.shape[0])  # sum over selected rows of s

    def gain(self, v):
        fl = np.maximum(self.s[:, v] - self.best, 0.0).sum()
        return float(fl - self.lam * (2.0 * self.sel_sum[v] + self.s[v, v]))

    def add(self, v):
        g = self._insert(v)
        np.maximum(self.best, self.s[:, v], out=self.best)
        self.sel_sum += self.s[v]
        return g


class _SaturatedCoverageCache(GainCache):
    def __init__(self, s, lam):
        super().__init__(s.shape[0])
        self.s = s
        self.caps = lam * s.sum(axis=1)
        self.cover = np.zeros(s.shape[0])

    def gain(self, v):
        before = np.minimum(self.cover, self.caps)
        after = np.minimum(self.cover + self.s[:, v], self.caps)
        return float((after - before).sum())

    def add(self, v):
        g = self._insert(v)
        self.cover += self.s[:, v]
        return g


class _GraphCutCache(GainCache):
    def __init__(self, s, lam):
        super().__init__(s.shape[0])
        self.s = s
        self.lam = lam
        self.col_sum = s.sum(axis=0)
        self.sel_sum = np.zeros(s.shape[0])

    def gain(self, v):
        return float(self.lam * self.col_sum[v] - 2.0 * self.sel_sum[v] - self.s[v, v])

    def add(self, v):
        g = self._insert(v)
        self.sel_sum += self.s[v]
        return g


class _FeatureBasedCache(GainCache):
    def __init__(self, values, gamma, concave):
        super().__init__(values.shape[0])
        self.values = values
        self.gamma = gamma
        self.concave = concave
        self.mass = np.zeros(values.shape[1])

    def gain(self, v):
        return float(
            np.dot(self.gamma, self.concave(self.mass + self.values[v]) - self.concave(self.mass))
        )

    def add(self, v):
        g = self._insert(v)
        self.mass += self.values[v]
        return g


# ---------------------------------------------------------------------------
# Components


class Component:
    """One mixture component evaluated on a prepared embedding state."""

    kind: str = ""
    requires_query = False

    def get_param(self):
        """Internal trainable parameter: None, a float, or a 1-d array."""
        return None

    def set_param(self, value) -> None:
        raise ValueError(f"component {self.kind!r} has no internal parameter")

    def clamp(self) -> None:
        """Project the internal parameter back into its valid range."""

    def evaluate(self, state: EmbeddingState, subset) -> float:
        raise NotImplementedError

    def make_cache(self, state: EmbeddingState) -> GainCache:
        raise NotImplementedError

    def param_grad(self, state: EmbeddingState, subset):
        """Subgradient of evaluate() w.r.t. the internal parameter."""
        return None

    def add_theta_weights(self, state: EmbeddingState, subset, coeff: float,
                          acc: ThetaGradAccumulator) -> None:
        """Add coeff times this component's theta-subgradient structure."""
        raise NotImplementedError

    def theta_grad(self, state: EmbeddingState, subset) -> np.ndarray:
        acc = ThetaGradAccumulator(state)
        self.add_theta_weights(state, subset, 1.0, acc)
        return acc.total()

    def to_dict(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class FacilityLocation(Component):
    """Rewards summaries that sit close to every ground-set item."""

    kind = "fl"

    def evaluate(self, state, subset):
        return eval_facility_location(state.s, subset)

    def make_cache(self, state):
        return _FacilityLocationCache(state.s)

    def add_theta_weights(self, state, subset, coeff, acc):
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return
        best = idx[np.argmax(state.s[:, idx], axis=1)]
        pw = acc.pair_weights()
        pw[np.arange(state.n), best] += coeff


class FacilityLocationPenalty(Component):
    """Facility location with a tunable penalty on intra-summary similarity."""

    kind = "flp"

    def __init__(self, lam: float = 0.1):
        self.lam = float(lam)

    def get_param(self):
        return self.lam

    def set_param(self, value):
        self.lam = float(value)

    def clamp(self):
        self.lam = max(self.lam, 0.0)

    def evaluate(self, state, subset):
        return eval_facility_location_penalty(state.s, subset, self.lam)

    def make_cache(self, state):
        return _FacilityLocationPenaltyCache(state.s, self.lam)

    def param_grad(self, state, subset):
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return 0.0
        return float(-state.s[np.ix_(idx, idx)].sum())

    def add_theta_weights(self, state, subset, coeff, acc):
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return
        best = idx[np.argmax(state.s[:, idx], axis=1)]
        pw = acc.pair_weights()
        pw[np.arange(state.n), best] += coeff
        pw[np.ix_(idx, idx)] -= coeff * self.lam

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam}


class SaturatedCoverage(Component):
    """Coverage capped, per ground-set item, at a fraction of its total mass."""

    kind = "sc"

    def __init__(self, lam: float = 0.5):
        self.lam = float(lam)

    def get_param(self):
        return self.lam

    def set_param(self, value):
        self.lam = float(value)

    def clamp(self):
        self.lam = float(min(max(self.lam, SC_LAMBDA_MIN), 1.0))

    def evaluate(self, state, subset):
        return eval_saturated_coverage(state.s, subset, self.lam)

    def make_cache(self, state):
        return _SaturatedCoverageCache(state.s, self.lam)

    def _cap_active(self, state, idx):
        # On ties the cap side wins, matching param_grad's indicator.
        covered = state.s[:, idx].sum(axis=1)
        caps = self.lam * state.s.sum(axis=1)
        return caps <= covered

    def param_grad(self, state, subset):
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return 0.0
        row_tot = state.s.sum(axis=1)
        return float(row_tot[self._cap_active(state, idx)].sum())

    def add_theta_weights(self, state, subset, coeff, acc):
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return
        cap_active = self._cap_active(state, idx)
        pw = acc.pair_weights()
        data_rows = np.where(~cap_active)[0]
        if data_rows.size:
            pw[np.ix_(data_rows, idx)] += coeff
        cap_rows = np.where(cap_active)[0]
        if cap_rows.size:
            pw[cap_rows, :] += coeff * self.lam

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam}


class GraphCut(Component):
    """Trades coverage of the ground set against intra-summary similarity."""

    kind = "gc"

    def __init__(self, lam: float = 0.5):
        self.lam = float(lam)

    def get_param(self):
        return self.lam

    def set_param(self, value):
        self.lam = float(value)

    def clamp(self):
        self.lam = float(min(max(self.lam, 0.0), 1.0))

    def evaluate(self, state, subset):
        return eval_graph_cut(state.s, subset, self.lam)

    def make_cache(self, state):
        return _GraphCutCache(state.s, self.lam)

    def param_grad(self, state, subset):
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return 0.0
        return float(state.s[:, idx].sum())

    def add_theta_weights(self, state, subset, coeff, acc):
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return
        pw = acc.pair_weights()
        pw[:, idx] += coeff * self.lam
        pw[np.ix_(idx, idx)] -= coeff

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam}


class FeatureBased(Component):
    """Concave coverage of embedding coordinates, weighted per coordinate.

    Operates on the shared embedding output, so its per-feature weights and
    the embedding parameters are trained jointly.
    """

    kind = "fb"

    def __init__(self, gamma=None, concave: Concave | None = None):
        self.gamma = None if gamma is None else np.asarray(gamma, dtype=np.float64).copy()
        self.concave = concave or Concave()

    def bind_width(self, h: int) -> None:
        """Allocate uniform weights once the embedding width is known."""
        if self.gamma is None:
            self.gamma = np.ones(h)

    def _gamma(self, state):
        self.bind_width(state.h)
        if self.gamma.shape != (state.h,):
            raise ValueError(
                f"feature weights have length {self.gamma.shape[0]}, embedding width is {state.h}"
            )
        return self.gamma

    def get_param(self):
        return self.gamma

    def set_param(self, value):
        self.gamma = np.asarray(value, dtype=np.float64).copy()

    def clamp(self):
        if self.gamma is not None:
            np.maximum(self.gamma, 0.0, out=self.gamma)

    def evaluate(self, state, subset):
        return eval_feature_based(state.x, subset, self._gamma(state), self.concave)

    def make_cache(self, state):
        return _FeatureBasedCache(state.x, self._gamma(state), self.concave)

    def param_grad(self, state, subset):
        idx = subset_indices(subset, state.n)
        self._gamma(state)
        if idx.size == 0:
            return np.zeros(state.h)
        return self.concave(state.x[idx].sum(axis=0))

    def add_theta_weights(self, state, subset, coeff, acc):
        idx = subset_indices(subset, state.n)
        if idx.size == 0:
            return
        gamma = self._gamma(state)
        mass = state.x[idx].sum(axis=0)
        per_coord = gamma * self.concave.derivative(mass)
        acc.embedding_coeffs()[idx] += coeff * per_coord[None, :]

    def to_dict(self):
        out = {"kind": self.kind, "concave": {"kind": self.concave.kind}}
        if self.concave.cap is not None:
            out["concave"]["cap"] = self.concave.cap
        if self.gamma is not None:
            out["gamma"] = self.gamma.tolist()
        return out

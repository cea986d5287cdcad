"""Budget-constrained maximization: naive greedy, lazy greedy, and
loss-augmented inference for max-margin training.

An objective is anything with an item count ``n``, a ``gain(v)`` returning
the marginal gain of adding item v to the current set, and an ``add(v)``
that commits the insertion. Ties always go to the lowest item id, and the
budget is always filled even through negative gains, so summaries have a
fixed size. Lazy greedy relies on diminishing returns for its stale upper
bounds and reproduces naive greedy exactly (same items, order, and gains)
on submodular objectives; loss-augmented objectives are not submodular, so
inference there uses the naive loop.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass


@dataclass
class GreedyTrace:
    """Selected ids in selection order with each step's marginal gain."""

    ids: list[int]
    gains: list[float]

    @property
    def selected(self) -> frozenset:
        return frozenset(self.ids)


class SetFunctionObjective:
    """Adapter turning a plain set function f(ids) -> float into an
    incremental objective by evaluating from scratch."""

    def __init__(self, fn, n: int):
        self.fn = fn
        self.n = n
        self._current: list[int] = []
        self._value = float(fn(frozenset()))

    def gain(self, v: int) -> float:
        return float(self.fn(frozenset(self._current + [v]))) - self._value

    def add(self, v: int) -> None:
        if v in self._current:
            raise ValueError(f"item {v} already selected")
        self._current.append(v)
        self._value = float(self.fn(frozenset(self._current)))


class CombinedObjective:
    """Sum of several objectives over the same ground set."""

    def __init__(self, parts):
        self.parts = list(parts)
        sizes = {p.n for p in self.parts}
        if len(sizes) != 1:
            raise ValueError(f"objectives disagree on ground-set size: {sorted(sizes)}")
        self.n = sizes.pop()

    def gain(self, v: int) -> float:
        return float(sum(p.gain(v) for p in self.parts))

    def add(self, v: int) -> None:
        for p in self.parts:
            p.add(v)


def _check_budget(n: int, k: int) -> None:
    if k < 1:
        raise ValueError(f"budget must be at least 1, got {k}")
    if k > n:
        raise ValueError(f"budget {k} exceeds ground set of size {n}")


def greedy(objective, k: int) -> GreedyTrace:
    """Naive greedy: each step scans all remaining items and takes the best."""
    _check_budget(objective.n, k)
    selected: list[int] = []
    gains: list[float] = []
    in_set = [False] * objective.n
    for _ in range(k):
        best_v = -1
        best_g = None
        for v in range(objective.n):
            if in_set[v]:
                continue
            g = objective.gain(v)
            if best_g is None or g > best_g:
                best_v, best_g = v, g
        selected.append(best_v)
        gains.append(best_g)
        objective.add(best_v)
        in_set[best_v] = True
    return GreedyTrace(ids=selected, gains=gains)


def lazy_greedy(objective, k: int) -> GreedyTrace:
    """Priority-queue greedy with stale upper bounds (valid under
    diminishing returns). Matches naive greedy exactly on submodular
    objectives, including tie-breaking by lowest id."""
    _check_budget(objective.n, k)
    selected: list[int] = []
    gains: list[float] = []
    fresh_at = [0] * objective.n
    heap = [(-objective.gain(v), v) for v in range(objective.n)]
    heapq.heapify(heap)
    while len(selected) < k:
        neg_bound, v = heapq.heappop(heap)
        if fresh_at[v] == len(selected):
            selected.append(v)
            gains.append(-neg_bound)
            objective.add(v)
        else:
            g = objective.gain(v)
            fresh_at[v] = len(selected)
            heapq.heappush(heap, (-g, v))
    return GreedyTrace(ids=selected, gains=gains)


def loss_augmented_inference(model, state, loss_objective, k: int) -> GreedyTrace:
    """Greedy maximization of model value plus loss: finds the most-violating
    summary of exactly k items. Runs the naive loop because the loss term
    breaks submodularity."""
    obj = CombinedObjective([model.objective(state), loss_objective])
    return greedy(obj, k)

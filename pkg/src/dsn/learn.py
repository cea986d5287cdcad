"""Max-margin training of the mixture model.

Each epoch alternates two phases: with the embedding and internal
parameters fixed, update the mixture weights; then with the weights fixed,
update the internal parameters and the embedding. Both phases run fresh
loss-augmented inference per training example, accumulate batch
subgradients in example order, take one Adam step per parameter group, and
project parameters back into their valid ranges. Training stops at the
epoch budget or when the relative change of the summed hinge objective
falls below the tolerance.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import Collection, QuerySet, loocv_splits
from .errors import ConfigError, DataError, DimensionError, NumericalError
from .mixture import DsnModel, ModelSubgrads, build_model, eval_model, model_subgrads
from .numerics import Adam, seeded_rng
from .optimize import GreedyTrace, greedy, loss_augmented_inference
from .vrouge import (
    NormConstants,
    RecallLossObjective,
    norm_constants,
    normalized_vrouge,
    raw_vrouge,
)

_FALLBACK_NORM_SEED = 13
_NORM_SAMPLES = 1000


@dataclass(eq=False)
class TrainExample:
    """One unit of training: a collection, a target reference summary, an
    optional query set, and the summary budget. ``loss_refs`` are the
    reference summaries the loss compares against (all of the collection's
    summaries in generic mode, the paired summary alone in query mode)."""

    collection: Collection
    summary: frozenset
    k: int
    query: QuerySet | None = None
    loss_refs: tuple = ()
    norm: NormConstants | None = None

    def __post_init__(self):
        if not self.summary:
            raise DataError(f"{self.collection.name}: training summary is empty")
        if not self.loss_refs:
            self.loss_refs = (self.summary,)


@dataclass
class TrainConfig:
    mode: str = "generic"
    budget: int = 10
    epochs: int = 50
    lr_w: float = 0.01
    lr_theta: float = 0.001
    lr_lambda: float = 0.01
    decay: float = 0.1
    beta: float = 0.01
    tol: float = 1e-4
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.mode not in ("generic", "query"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.budget < 1:
            raise ConfigError("budget must be at least 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if self.lr_w <= 0:
            raise ConfigError("lr_w must be positive")
        # Zero rates for theta/lambda freeze those groups (the classic
        # weights-only mixture baseline); negative rates are rejected.
        if self.lr_theta < 0 or self.lr_lambda < 0:
            raise ConfigError("lr_theta and lr_lambda must be nonnegative")
        if self.decay < 0:
            raise ConfigError("decay must be nonnegative")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        return self


@dataclass
class EpochRow:
    epoch: int
    objective: float
    train_score: float
    val_score: float | None


@dataclass
class TrainReport:
    rows: list[EpochRow]
    initial_objective: float
    initial_train_score: float
    initial_val_score: float | None
    model: DsnModel  # after the last completed epoch
    best_model: DsnModel  # best validation score (initial model counts)
    best_epoch: int  # 0 means the initialized model
    config: TrainConfig

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "objective", "train_vrouge", "val_vrouge"])
            for row in self.rows:
                writer.writerow([
                    row.epoch,
                    repr(row.objective),
                    repr(row.train_score),
                    "" if row.val_score is None else repr(row.val_score),
                ])
        return path


def worker_count() -> int:
    """Thread cap from DSN_THREADS; 0 or unset picks a small automatic value."""
    raw = os.environ.get("DSN_THREADS", "0")
    try:
        v = int(raw)
    except ValueError:
        v = 0
    if v <= 0:
        return min(4, os.cpu_count() or 1)
    return v


def examples_from_collections(collections, k: int, mode: str = "generic") -> list[TrainExample]:
    """Expand collections into training examples.

    Generic mode: one example per reference summary, losses scored against
    all of the collection's summaries. Query mode: one example per query
    set, paired by index with the collection's summaries, losses scored
    against the paired summary only.
    """
    out: list[TrainExample] = []
    for coll in collections:
        if mode == "generic":
            if not coll.summaries:
                raise DataError(f"{coll.name}: no reference summaries")
            refs = tuple(coll.summaries)
            for y in coll.summaries:
                out.append(TrainExample(collection=coll, summary=frozenset(y), k=k, loss_refs=refs))
        else:
            if not coll.queries:
                raise DataError(f"{coll.name}: no query sets")
            if len(coll.queries) != len(coll.summaries):
                raise DataError(
                    f"{coll.name}: query mode pairs queries[i] with summaries[i]; "
                    f"got {len(coll.queries)} queries and {len(coll.summaries)} summaries"
                )
            for q, y in zip(coll.queries, coll.summaries):
                out.append(
                    TrainExample(collection=coll, summary=frozenset(y), k=k, query=q,
                                 loss_refs=(frozenset(y),))
                )
    return out


def example_norm_constants(example: TrainExample) -> NormConstants:
    """Normalization constants matching this example's references and budget."""
    if example.norm is not None:
        return example.norm
    coll = example.collection
    stored = coll.vrouge_norm
    refs_are_all = tuple(example.loss_refs) == tuple(coll.summaries)
    if stored is not None and stored.k == example.k and refs_are_all:
        example.norm = stored
    else:
        seed = stored.seed if stored is not None else _FALLBACK_NORM_SEED
        example.norm = norm_constants(
            coll, example.k, samples=_NORM_SAMPLES, seed=seed, refs=example.loss_refs
        )
    return example.norm


def _loss_objective(example: TrainExample) -> RecallLossObjective:
    return RecallLossObjective(example.collection.word_counts, example.loss_refs)


def infer_most_violating(model: DsnModel, state, example: TrainExample) -> GreedyTrace:
    return loss_augmented_inference(model, state, _loss_objective(example), example.k)


def hinge_objective(model: DsnModel, example: TrainExample, beta: float, state=None,
                    a_hat=None) -> float:
    """[F(a_hat) + loss(a_hat)] - F(y) + (beta/2)||w||^2 with a_hat from
    loss-augmented inference (or supplied, for finite-difference checks)."""
    if state is None:
        state = model.state_for(example.collection, example.query)
    if a_hat is None:
        a_hat = infer_most_violating(model, state, example).selected
    loss = 1.0 - _raw_recall(example, a_hat)
    w = model.weights if model.composition is None else model.composition.weights
    reg = 0.5 * beta * float(np.sum(w * w))
    return eval_model(model, state, a_hat) + loss - eval_model(model, state, example.summary) + reg


def _raw_recall(example: TrainExample, subset) -> float:
    return raw_vrouge(subset, example.loss_refs, example.collection.word_counts)


def compute_subgradients(model: DsnModel, example: TrainExample, beta: float,
                         state=None, a_hat=None) -> ModelSubgrads:
    """Subgradients of the example's hinge term in (weights, params, theta)."""
    if state is None:
        state = model.state_for(example.collection, example.query)
    if a_hat is None:
        a_hat = infer_most_violating(model, state, example).selected
    return model_subgrads(model, state, a_hat, example.summary, beta)


def model_summary(model: DsnModel, collection, k: int, query=None) -> GreedyTrace:
    """Plain greedy summary under the model (no loss augmentation)."""
    state = model.state_for(collection, query)
    return greedy(model.objective(state), k)


def score_example(model: DsnModel, example: TrainExample, state=None) -> float:
    """Normalized summary score of the model's greedy summary."""
    if state is None:
        state = model.state_for(example.collection, example.query)
    trace = greedy(model.objective(state), example.k)
    consts = example_norm_constants(example)
    return normalized_vrouge(
        trace.ids, consts, example.loss_refs, example.collection.word_counts
    )


def _check_finite(value, context: str) -> None:
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite value encountered in {context}")


class _StateCache:
    """Embedding states keyed by (collection, query) for the current theta."""

    def __init__(self, model: DsnModel):
        self.model = model
        self._states: dict = {}

    def for_example(self, example: TrainExample):
        key = (id(example.collection), id(example.query))
        state = self._states.get(key)
        if state is None:
            state = self.model.state_for(example.collection, example.query)
            self._states[key] = state
        return state

    def prewarm(self, examples) -> "_StateCache":
        for ex in examples:
            self.for_example(ex)
        return self


def _map_examples(fn, examples, workers: int):
    """Apply fn to every example, preserving order. Threads only read shared
    state, so the result list is identical to the serial one."""
    if workers > 1 and len(examples) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, examples))
    return [fn(ex) for ex in examples]


def fit(examples: list[TrainExample], config: TrainConfig, *, components=None,
        hidden: int | None = None, validation: list[TrainExample] | None = None) -> TrainReport:
    """Train a fresh model on the given examples.

    The model is initialized deterministically from ``config.seed``;
    identical inputs produce identical reports. ``hidden`` defaults to 512
    in generic mode and must equal the query feature dimension in query
    mode (it is inferred when omitted).
    """
    config = replace(config).validate()
    if not examples:
        raise DataError("no training examples")
    dims = {ex.collection.dim for ex in examples + (validation or [])}
    if len(dims) != 1:
        raise DimensionError(f"collections disagree on feature dimension: {sorted(dims)}")
    dim = dims.pop()

    if config.mode == "query":
        if any(ex.query is None for ex in examples + (validation or [])):
            raise DataError("query-mode training needs a query set on every example")
        qdims = {ex.query.features.shape[1] for ex in examples + (validation or [])}
        if len(qdims) != 1:
            raise DimensionError(f"query sets disagree on dimension: {sorted(qdims)}")
        qdim = qdims.pop()
        if hidden is not None and hidden != qdim:
            raise DimensionError(
                f"hidden width {hidden} must equal the query feature dimension {qdim}"
            )
        hidden = qdim
    else:
        if any(ex.query is not None for ex in examples + (validation or [])):
            raise DataError("generic-mode training does not accept query sets")
        if hidden is None:
            hidden = 512

    rng = seeded_rng(config.seed)
    model = build_model(rng, dim, hidden, kinds=components, mode=config.mode)
    workers = worker_count()

    adam_w = Adam(config.lr_w, decay=config.decay)
    adam_theta = Adam(config.lr_theta, decay=config.decay)
    adam_params = [
        Adam(config.lr_lambda, decay=config.decay) if c.get_param() is not None else None
        for c in model.components
    ]
    update_inner = config.lr_theta > 0.0 or config.lr_lambda > 0.0

    def epoch_metrics():
        cache = _StateCache(model)
        objective = 0.0
        train_total = 0.0
        for ex in examples:
            state = cache.for_example(ex)
            objective += hinge_objective(model, ex, config.beta, state=state)
            train_total += score_example(model, ex, state=state)
        val = None
        if validation:
            val = sum(score_example(model, ex, state=cache.for_example(ex)) for ex in validation)
            val /= len(validation)
        return objective, train_total / len(examples), val

    initial_objective, initial_train, initial_val = epoch_metrics()
    _check_finite(initial_objective, "initial objective")

    rows: list[EpochRow] = []
    best_model = model.copy()
    best_epoch = 0
    best_val = initial_val if initial_val is not None else -math.inf
    prev_objective = initial_objective

    for epoch in range(config.epochs):
        # Phase 1: mixture weights, embedding and internal parameters fixed.
        cache = _StateCache(model).prewarm(examples)
        subs = _map_examples(
            lambda ex: compute_subgradients(model, ex, config.beta, state=cache.for_example(ex)),
            examples, workers,
        )
        grad_w = np.sum([s.d_weights for s in subs], axis=0)
        if model.composition is None:
            model.weights = adam_w.step(model.weights, grad_w, epoch)
            model.project()
            _check_finite(model.weights, "mixture weights")
        else:
            model.composition.weights = adam_w.step(model.composition.weights, grad_w, epoch)
            model.project()
            _check_finite(model.composition.weights, "composition weights")

        # Phase 2: internal parameters and embedding, weights fixed. States
        # are still valid (theta unchanged) but inference is rerun because
        # the weights moved.
        if update_inner:
            subs = _map_examples(
                lambda ex: compute_subgradients(model, ex, config.beta, state=cache.for_example(ex)),
                examples, workers,
            )
            for i, comp in enumerate(model.components):
                if adam_params[i] is None:
                    continue
                grad_p = np.sum([np.asarray(s.d_params[i], dtype=np.float64) for s in subs], axis=0)
                param = np.asarray(comp.get_param(), dtype=np.float64)
                comp.set_param(adam_params[i].step(param, grad_p, epoch))
            grad_theta = np.sum([s.d_theta for s in subs], axis=0)
            model.theta = adam_theta.step(model.theta, grad_theta, epoch)
            model.project()
            _check_finite(model.theta, "embedding parameters")

        objective, train_score, val_score = epoch_metrics()
        _check_finite(objective, "training objective")
        rows.append(EpochRow(epoch=epoch + 1, objective=objective,
                             train_score=train_score, val_score=val_score))

        if val_score is not None and val_score > best_val:
            best_val = val_score
            best_model = model.copy()
            best_epoch = epoch + 1

        rel_change = abs(objective - prev_objective) / max(1.0, abs(prev_objective))
        prev_objective = objective
        if rel_change < config.tol:
            break

    if validation is None:
        best_model = model.copy()
        best_epoch = len(rows)

    return TrainReport(
        rows=rows,
        initial_objective=initial_objective,
        initial_train_score=initial_train,
        initial_val_score=initial_val,
        model=model,
        best_model=best_model,
        best_epoch=best_epoch,
        config=config,
    )


@dataclass
class FoldResult:
    test_name: str
    score: float
    best_epoch: int


@dataclass
class LoocvReport:
    folds: list[FoldResult]

    @property
    def mean_score(self) -> float:
        return sum(f.score for f in self.folds) / len(self.folds)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fold", "test_collection", "best_epoch", "score"])
            for i, fold in enumerate(self.folds):
                writer.writerow([i, fold.test_name, fold.best_epoch, repr(fold.score)])
            writer.writerow(["mean", "", "", repr(self.mean_score)])
        return path


def evaluate_on_collection(model: DsnModel, collection: Collection, k: int,
                           mode: str | None = None) -> float:
    """Mean normalized score of the model's summaries on one collection."""
    mode = mode or model.mode
    tests = examples_from_collections([collection], k, mode)
    return sum(score_example(model, ex) for ex in tests) / len(tests)


def run_loocv(collections: list[Collection], config: TrainConfig, *, components=None,
              hidden: int | None = None) -> LoocvReport:
    """Leave-one-out protocol: train on each fold, pick the best epoch by
    validation score, report the held-out test score."""
    folds: list[FoldResult] = []
    for split in loocv_splits(collections):
        train = examples_from_collections(split.train, config.budget, config.mode)
        val = examples_from_collections([split.validation], config.budget, config.mode)
        report = fit(train, config, components=components, hidden=hidden, validation=val)
        score = evaluate_on_collection(report.best_model, split.test, config.budget, config.mode)
        folds.append(FoldResult(test_name=split.test.name, score=score,
                                best_epoch=report.best_epoch))
    return LoocvReport(folds=folds)

"""scikit-learn style front end.

``DsnSummarizer`` wraps model construction, max-margin fitting, and greedy
inference behind the familiar ``fit`` / ``predict`` / ``score`` surface, so
the model composes with sklearn tooling (``get_params``, ``set_params``,
``clone``). The ``X`` accepted everywhere is a list of ``Collection``
objects rather than a feature matrix: a collection is one indivisible
training unit.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .dataset import Collection
from .errors import DataError
from .learn import (
    TrainConfig,
    evaluate_on_collection,
    examples_from_collections,
    fit,
    model_summary,
)


class DsnSummarizer(BaseEstimator):
    """Learns a submodular summarization model from example summaries.

    Parameters
    ----------
    components : sequence of component kinds, or None for the mode default
        ("fl", "fb", "gc", "sc") in generic mode, ("gcmi", "fl2mi") in
        query mode.
    mode : "generic" or "query".
    hidden : embedding width; None means 512 in generic mode and the query
        feature dimension in query mode.
    budget : summary size produced during training and prediction.
    epochs, lr_w, lr_theta, lr_lambda, decay, beta, tol : training
        hyperparameters; see TrainConfig.
    random_state : seed for the embedding and weight initialization.
    """

    def __init__(self, components=None, mode="generic", hidden=None, budget=10,
                 epochs=50, lr_w=0.01, lr_theta=0.001, lr_lambda=0.01,
                 decay=0.1, beta=0.01, tol=1e-4, random_state=0):
        self.components = components
        self.mode = mode
        self.hidden = hidden
        self.budget = budget
        self.epochs = epochs
        self.lr_w = lr_w
        self.lr_theta = lr_theta
        self.lr_lambda = lr_lambda
        self.decay = decay
        self.beta = beta
        self.tol = tol
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            mode=self.mode, budget=self.budget, epochs=self.epochs, lr_w=self.lr_w,
            lr_theta=self.lr_theta, lr_lambda=self.lr_lambda, decay=self.decay,
            beta=self.beta, tol=self.tol, seed=self.random_state,
        )

    @staticmethod
    def _as_collections(X) -> list[Collection]:
        cols = [X] if isinstance(X, Collection) else list(X)
        if not cols:
            raise DataError("need at least one collection")
        for c in cols:
            if not isinstance(c, Collection):
                raise TypeError(f"expected Collection instances, got {type(c).__name__}")
        return cols

    def fit(self, X, y=None, validation=None):
        """Train on a list of collections; ``y`` is unused (summaries travel
        inside the collections). ``validation`` optionally holds collections
        used for best-epoch selection."""
        cols = self._as_collections(X)
        cfg = self._config()
        examples = examples_from_collections(cols, cfg.budget, cfg.mode)
        val_examples = None
        if validation is not None:
            val_examples = examples_from_collections(
                self._as_collections(validation), cfg.budget, cfg.mode
            )
        self.report_ = fit(examples, cfg, components=self.components,
                           hidden=self.hidden, validation=val_examples)
        self.model_ = self.report_.best_model
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this DsnSummarizer instance is not fitted yet")

    def summarize(self, collection: Collection, budget=None, query=None):
        """Greedy summary trace for one collection."""
        self._check_fitted()
        k = self.budget if budget is None else budget
        if self.mode == "query" and query is None:
            if not collection.queries:
                raise DataError(f"{collection.name}: query mode needs a query set")
            query = collection.queries[0]
        return model_summary(self.model_, collection, k, query=query)

    def predict(self, X):
        """Summaries (lists of item ids) for each collection. Query-mode
        prediction uses each collection's first query set."""
        cols = self._as_collections(X)
        return [self.summarize(c).ids for c in cols]

    def score(self, X, y=None) -> float:
        """Mean normalized summary score across collections."""
        self._check_fitted()
        cols = self._as_collections(X)
        total = sum(evaluate_on_collection(self.model_, c, self.budget, self.mode) for c in cols)
        return total / len(cols)

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dsn.dataset import make_synthetic_dataset
from dsn.errors import DataError
from dsn.estimator import DsnSummarizer


def small_dataset():
    return make_synthetic_dataset(collections=3, items=12, dim=4, clusters=3,
                                  words=2, budget=3, seed=17)


class TestSklearnProtocol:
    def test_get_params_roundtrip(self):
        est = DsnSummarizer(budget=5, epochs=3, random_state=9)
        params = est.get_params()
        assert params["budget"] == 5 and params["epochs"] == 3
        est.set_params(budget=7)
        assert est.budget == 7

    def test_clone_preserves_params(self):
        est = DsnSummarizer(components=("fl", "gc"), hidden=16, lr_w=0.2)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_not_fitted_error(self):
        est = DsnSummarizer()
        with pytest.raises(NotFittedError):
            est.predict(small_dataset())


class TestFitPredict:
    def test_fit_predict_returns_budget_sized_summaries(self):
        cols = small_dataset()
        est = DsnSummarizer(budget=3, epochs=2, hidden=8, random_state=0)
        est.fit(cols)
        preds = est.predict(cols)
        assert len(preds) == len(cols)
        for ids in preds:
            assert len(ids) == 3
            assert len(set(ids)) == 3

    def test_fit_is_deterministic(self):
        cols = small_dataset()
        a = DsnSummarizer(budget=3, epochs=2, hidden=8, random_state=4).fit(cols)
        b = DsnSummarizer(budget=3, epochs=2, hidden=8, random_state=4).fit(cols)
        assert a.predict(cols) == b.predict(cols)
        np.testing.assert_array_equal(a.model_.theta, b.model_.theta)

    def test_single_collection_accepted(self):
        cols = small_dataset()
        est = DsnSummarizer(budget=3, epochs=1, hidden=8).fit(cols)
        trace = est.summarize(cols[0])
        assert len(trace.ids) == 3

    def test_score_returns_float(self):
        cols = small_dataset()
        est = DsnSummarizer(budget=3, epochs=1, hidden=8).fit(cols)
        score = est.score(cols)
        assert isinstance(score, float)
        assert np.isfinite(score)

    def test_validation_collections(self):
        cols = small_dataset()
        est = DsnSummarizer(budget=3, epochs=2, hidden=8)
        est.fit(cols[:2], validation=cols[2:])
        assert est.report_.rows[0].val_score is not None

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            DsnSummarizer().fit([])

    def test_non_collection_rejected(self):
        with pytest.raises(TypeError):
            DsnSummarizer().fit([np.zeros((3, 2))])


class TestQueryMode:
    def test_query_fit_and_predict(self):
        cols = make_synthetic_dataset(collections=3, items=12, dim=4, clusters=3,
                                      words=0, budget=3, seed=23, queries=1)
        est = DsnSummarizer(mode="query", components=("gcmi", "fl2mi"), budget=3,
                            epochs=2, random_state=1)
        est.fit(cols)
        preds = est.predict(cols)
        assert all(len(p) == 3 for p in preds)
        assert est.model_.mode == "query"
        assert est.model_.hidden == 4

    def test_generic_collection_without_queries_rejected_in_query_mode(self):
        cols = small_dataset()
        est = DsnSummarizer(mode="query", components=("gcmi",), budget=3, epochs=1)
        with pytest.raises(DataError):
            est.fit(cols)

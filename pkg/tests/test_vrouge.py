import numpy as np
import pytest

from dsn.dataset import Collection, make_synthetic_dataset
from dsn.errors import DegenerateCollectionError
from dsn.numerics import seeded_rng
from dsn.vrouge import (
    NormConstants,
    RecallLossObjective,
    merge_counts,
    norm_constants,
    normalized_vrouge,
    raw_vrouge,
    sample_random_subsets,
    training_loss,
)


def small_collection():
    # item 0: {w0:1}; items 1, 2: {w0:1, w1:1}; item 3: {w5:2} (off-support)
    word_counts = [{0: 1}, {0: 1, 1: 1}, {0: 1, 1: 1}, {5: 2}]
    return Collection(
        name="tiny",
        features=np.zeros((4, 2)),
        word_counts=word_counts,
        summaries=[frozenset({1, 2})],
    )


class TestRawScore:
    def test_full_recall(self):
        coll = small_collection()
        assert raw_vrouge({1, 2}, coll.summaries, coll.word_counts) == 1.0

    def test_disjoint_support_scores_zero(self):
        coll = small_collection()
        assert raw_vrouge({3}, coll.summaries, coll.word_counts) == 0.0
        assert training_loss({3}, coll.summaries, coll.word_counts) == 1.0

    def test_quarter_recall(self):
        # candidate {w0:1} against reference {w0:2, w1:2} -> 1/4
        coll = small_collection()
        assert raw_vrouge({0}, coll.summaries, coll.word_counts) == 0.25
        assert training_loss({0}, coll.summaries, coll.word_counts) == 0.75

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            raw_vrouge({0}, [frozenset()], [{0: 1}])
        with pytest.raises(ValueError):
            raw_vrouge({0}, [], [{0: 1}])

    def test_monotone_and_submodular(self):
        rng = seeded_rng(11)
        for _ in range(300):
            n = int(rng.integers(5, 9))
            vocab = int(rng.integers(2, 6))
            wc = [
                {int(w): int(rng.integers(1, 4)) for w in rng.choice(vocab, size=rng.integers(1, 3), replace=False)}
                for _ in range(n)
            ]
            refs = [frozenset(rng.choice(n, size=2, replace=False).tolist())]
            pool = rng.permutation(n)
            a = set(pool[:2].tolist())
            b = a | set(pool[2:4].tolist())
            v = int(pool[4])
            fa = raw_vrouge(a, refs, wc)
            fb = raw_vrouge(b, refs, wc)
            ga = raw_vrouge(a | {v}, refs, wc) - fa
            gb = raw_vrouge(b | {v}, refs, wc) - fb
            assert ga >= -1e-12 and gb >= -1e-12  # monotone
            assert ga >= gb - 1e-12  # diminishing returns


class TestNormalization:
    def test_affine_endpoints(self):
        coll = small_collection()
        consts = NormConstants(r_random=0.25, r_human=1.0, samples=10, seed=0, k=1)
        assert normalized_vrouge({1, 2}, consts, coll.summaries, coll.word_counts) == 1.0
        assert normalized_vrouge({0}, consts, coll.summaries, coll.word_counts) == 0.0
        # raw({0,1}) = min(2,2)/4 + min(1,2)/4 = 0.75 -> (0.75-0.25)/0.75
        assert normalized_vrouge({0, 1}, consts, coll.summaries, coll.word_counts) == pytest.approx(2.0 / 3.0)

    def test_degenerate_collection_flagged(self):
        wc = [{0: 1}, {0: 1}, {0: 1}]
        coll = Collection(name="flat", features=np.zeros((3, 1)), word_counts=wc,
                          summaries=[frozenset({0})])
        with pytest.raises(DegenerateCollectionError):
            norm_constants(coll, 1, samples=20, seed=3)

    def test_constants_deterministic(self):
        coll = small_collection()
        a = norm_constants(coll, 2, samples=64, seed=9)
        b = norm_constants(coll, 2, samples=64, seed=9)
        assert a == b

    def test_planted_human_score_is_one(self):
        cols = make_synthetic_dataset(collections=2, items=12, dim=3, clusters=3,
                                      words=0, budget=3, seed=4)
        for coll in cols:
            assert coll.vrouge_norm.r_human == 1.0

    def test_mean_identities_reproduce_from_seed(self):
        coll = make_synthetic_dataset(collections=1, items=15, dim=3, clusters=3,
                                      words=2, budget=3, seed=8)[0]
        consts = coll.vrouge_norm
        subsets = sample_random_subsets(coll.n, consts.k, consts.samples, consts.seed)
        mean_random = sum(
            normalized_vrouge(s, consts, coll.summaries, coll.word_counts) for s in subsets
        ) / len(subsets)
        mean_human = sum(
            normalized_vrouge(y, consts, coll.summaries, coll.word_counts) for y in coll.summaries
        ) / len(coll.summaries)
        assert abs(mean_random) < 1e-12
        assert abs(mean_human - 1.0) < 1e-12


class TestRecallLossObjective:
    def test_gains_match_from_scratch(self):
        rng = seeded_rng(21)
        coll = make_synthetic_dataset(collections=1, items=12, dim=3, clusters=3,
                                      words=3, budget=3, seed=21)[0]
        refs = coll.summaries
        for _ in range(20):
            obj = RecallLossObjective(coll.word_counts, refs)
            current: list[int] = []
            for v in rng.permutation(coll.n)[:6].tolist():
                expected = training_loss(current + [v], refs, coll.word_counts) - training_loss(
                    current, refs, coll.word_counts
                )
                assert obj.gain(v) == pytest.approx(expected, abs=1e-12)
                obj.add(v)
                current.append(v)

    def test_duplicate_add_rejected(self):
        coll = small_collection()
        obj = RecallLossObjective(coll.word_counts, coll.summaries)
        obj.add(1)
        with pytest.raises(ValueError):
            obj.add(1)


def test_merge_counts_pools_histograms():
    wc = [{0: 1, 2: 1}, {0: 2}, {1: 5}]
    assert merge_counts(wc, {0, 1}) == {0: 3, 2: 1}

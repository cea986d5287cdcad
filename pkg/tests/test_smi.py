import numpy as np
import pytest

from dsn.embedder import build_state
from dsn.gradcheck import fd_theta
from dsn.mixture import make_component
from dsn.numerics import seeded_rng
from dsn.smi import eval_fl1mi, eval_fl2mi, eval_gcmi

S2 = np.array([[1.0, 0.5], [0.5, 1.0]])


def query_state(rng, n=6, d=3, h=4, m=2):
    theta = rng.normal(0, 0.6, (d, h))
    u = rng.normal(0, 1.2, (n, d))
    q = np.abs(rng.normal(0.5, 0.4, (m, h))) + 0.05
    return build_state(theta, u, q)


class TestEvaluation:
    def test_gcmi_values(self):
        sq = np.array([[0.3, 0.2]])
        assert eval_gcmi(sq, set()) == 0.0
        assert eval_gcmi(sq, {0}) == pytest.approx(1.0)
        assert eval_gcmi(2.0 * sq, {0}) == pytest.approx(2.0)

    def test_gcmi_modular(self):
        rng = seeded_rng(1)
        sq = rng.uniform(0, 1, (6, 3))
        a, b = {0, 2}, {3, 5}
        assert eval_gcmi(sq, a | b) == pytest.approx(eval_gcmi(sq, a) + eval_gcmi(sq, b), abs=1e-12)

    def test_fl1mi_values(self):
        sq = np.array([[0.8], [0.2]])
        assert eval_fl1mi(S2, sq, set(), 1.0) == 0.0
        # min(0.5, 0.8) + min(1, 0.2)
        assert eval_fl1mi(S2, sq, {1}, 1.0) == pytest.approx(0.7)
        assert eval_fl1mi(S2, sq, {0, 1}, 0.0) == 0.0

    def test_fl2mi_values(self):
        sq = np.array([[0.8], [0.2]])
        assert eval_fl2mi(sq, set(), 0.5) == 0.0
        assert eval_fl2mi(sq, {0}, 0.5) == pytest.approx(1.2)
        assert eval_fl2mi(sq, {0}, 0.0) == pytest.approx(0.8)

    def test_invalid_ids(self):
        with pytest.raises(ValueError):
            eval_gcmi(np.ones((2, 1)), {4})


class TestSubgradients:
    @pytest.mark.parametrize("kind", ["gcmi", "fl1mi", "fl2mi"])
    def test_empty_set_zero_gradients(self, kind):
        comp = make_component(kind)
        state = query_state(seeded_rng(2))
        np.testing.assert_array_equal(comp.theta_grad(state, set()), 0.0)
        if comp.get_param() is not None:
            assert comp.param_grad(state, set()) == 0.0

    def test_fl1mi_data_side_active_zeroes_lambda_grad(self):
        # with a large lambda the data side of every min is active
        comp = make_component("fl1mi", lam=50.0)
        state = query_state(seeded_rng(3))
        assert comp.param_grad(state, {0, 1}) == 0.0

    @pytest.mark.parametrize("kind", ["gcmi", "fl1mi", "fl2mi"])
    def test_theta_grad_matches_fd(self, kind):
        rng = seeded_rng(4)
        checked = 0
        while checked < 10:
            comp = make_component(kind)
            if comp.get_param() is not None:
                comp.set_param(float(rng.uniform(0.4, 1.2)))
            theta = rng.normal(0, 0.6, (3, 4))
            u = rng.normal(0, 1.2, (5, 3))
            q = np.abs(rng.normal(0.5, 0.4, (2, 4))) + 0.05
            subset = set(rng.choice(5, size=2, replace=False).tolist())
            state = build_state(theta, u, q)
            from dsn.gradcheck import tie_margin

            if tie_margin(comp, state, subset) < 1e-5:
                continue
            checked += 1

            def value(th):
                return comp.evaluate(build_state(th, u, q), subset)

            numeric = fd_theta(value, theta, 1e-5)
            np.testing.assert_allclose(comp.theta_grad(state, subset), numeric,
                                       rtol=1e-4, atol=1e-8)

    def test_fl2mi_lambda_grad(self):
        sq_state = query_state(seeded_rng(5))
        comp = make_component("fl2mi", lam=0.3)
        subset = {1, 4}
        expected = sq_state.sq[sorted(subset)].max(axis=1).sum()
        assert comp.param_grad(sq_state, subset) == pytest.approx(expected, abs=1e-12)


class TestStructuralProperties:
    @pytest.mark.parametrize("kind", ["gcmi", "fl1mi", "fl2mi"])
    def test_nonnegative_monotone_normalized(self, kind):
        rng = seeded_rng(6)
        for _ in range(150):
            comp = make_component(kind)
            if comp.get_param() is not None:
                comp.set_param(float(rng.uniform(0.1, 1.5)))
            n = int(rng.integers(5, 10))
            state = query_state(rng, n=n, m=int(rng.integers(1, 4)))
            assert comp.evaluate(state, set()) == 0.0
            pool = rng.permutation(n)
            a = set(pool[:2].tolist())
            b = a | set(pool[2:4].tolist())
            v = int(pool[4])
            fa = comp.evaluate(state, a)
            ga = comp.evaluate(state, a | {v}) - fa
            gb = comp.evaluate(state, b | {v}) - comp.evaluate(state, b)
            assert fa >= 0.0
            assert ga >= -1e-9 and gb >= -1e-9  # monotone
            assert ga >= gb - 1e-9  # diminishing returns

    @pytest.mark.parametrize("kind", ["fl1mi", "fl2mi"])
    def test_value_nondecreasing_in_lambda(self, kind):
        rng = seeded_rng(7)
        for _ in range(50):
            state = query_state(rng)
            subset = set(rng.choice(6, size=3, replace=False).tolist())
            lams = sorted(rng.uniform(0.0, 2.0, size=3))
            vals = []
            for lam in lams:
                comp = make_component(kind, lam=float(lam))
                vals.append(comp.evaluate(state, subset))
            assert vals[0] <= vals[1] + 1e-12 <= vals[2] + 2e-12

    @pytest.mark.parametrize("kind", ["fl1mi", "fl2mi"])
    def test_cache_matches_from_scratch(self, kind):
        rng = seeded_rng(8)
        for _ in range(20):
            comp = make_component(kind, lam=float(rng.uniform(0.2, 1.2)))
            state = query_state(rng, n=7, m=3)
            cache = comp.make_cache(state)
            current = []
            for v in rng.permutation(7)[:5].tolist():
                scratch = comp.evaluate(state, current + [v]) - comp.evaluate(state, current)
                assert cache.gain(v) == pytest.approx(scratch, abs=1e-10)
                cache.add(v)
                current.append(v)

    def test_gcmi_cache(self):
        rng = seeded_rng(9)
        comp = make_component("gcmi")
        state = query_state(rng)
        cache = comp.make_cache(state)
        assert cache.gain(3) == pytest.approx(comp.evaluate(state, {3}), abs=1e-12)
        cache.add(3)
        assert cache.gain(1) == pytest.approx(
            comp.evaluate(state, {1, 3}) - comp.evaluate(state, {3}), abs=1e-12
        )

    def test_lambda_clamped_nonnegative(self):
        comp = make_component("fl1mi", lam=-1.0)
        comp.clamp()
        assert comp.lam == 0.0

    def test_state_without_queries_rejected(self):
        rng = seeded_rng(10)
        state = build_state(rng.normal(0, 0.5, (3, 4)), rng.normal(0, 1, (5, 3)))
        comp = make_component("gcmi")
        with pytest.raises(ValueError):
            comp.evaluate(state, {0})

import math

import numpy as np
import pytest

from dsn.numerics import Adam, l2_normalize_rows, seeded_rng, sigmoid, xavier_init


class TestSigmoid:
    def test_symmetry_point(self):
        assert float(sigmoid(0.0)) == 0.5

    def test_saturation(self):
        assert float(sigmoid(50.0)) > 1.0 - 1e-15

    def test_known_value(self):
        # independent evaluation of 1/(1+e^-1) through the math module
        expected = 1.0 / (1.0 + math.exp(-1.0))
        assert abs(float(sigmoid(1.0)) - expected) < 1e-15

    def test_complement_identity(self):
        rng = seeded_rng(0)
        x = rng.uniform(-30, 30, size=2000)
        np.testing.assert_allclose(sigmoid(-x), 1.0 - sigmoid(x), atol=1e-12)

    def test_strictly_inside_unit_interval(self):
        x = np.array([-1e6, -700.0, -50.0, 0.0, 50.0, 700.0, 1e6])
        s = sigmoid(x)
        assert np.all(s > 0.0)
        assert np.all(s < 1.0)

    def test_monotone(self):
        x = np.linspace(-20, 20, 5000)
        assert np.all(np.diff(sigmoid(x)) >= 0)


class TestXavierInit:
    def test_bound_for_1x5(self):
        # sqrt(6 / (1 + 5)) = 1
        m = xavier_init(seeded_rng(1), 1, 5)
        assert m.shape == (1, 5)
        assert np.all(np.abs(m) <= 1.0)

    def test_deterministic(self):
        a = xavier_init(seeded_rng(99), 7, 3)
        b = xavier_init(seeded_rng(99), 7, 3)
        np.testing.assert_array_equal(a, b)

    def test_monte_carlo_mean(self):
        # 10^4 draws; SE of the mean of U(-a, a) is a / sqrt(3 N)
        rows, cols = 100, 100
        a = math.sqrt(6.0 / (rows + cols))
        m = xavier_init(seeded_rng(5), rows, cols)
        se = a / math.sqrt(3 * rows * cols)
        assert abs(m.mean()) < 3 * se

    @pytest.mark.parametrize("rows,cols", [(0, 3), (3, 0), (-1, 2)])
    def test_zero_dimension_rejected(self, rows, cols):
        with pytest.raises(ValueError):
            xavier_init(seeded_rng(0), rows, cols)


class TestAdam:
    def test_zero_gradient_is_identity(self):
        opt = Adam(lr0=0.1)
        params = np.array([1.0, -2.0, 3.5])
        out = opt.step(params, np.zeros(3), epoch=0)
        np.testing.assert_array_equal(out, params)

    def test_first_step_magnitude_is_lr(self):
        # bias correction makes the first step ~lr0 regardless of |g|
        for g in (3.7, 1e-3, -250.0):
            opt = Adam(lr0=0.05)
            out = opt.step(np.array([0.0]), np.array([g]), epoch=0)
            assert abs(abs(out[0]) - 0.05) < 1e-5
            assert np.sign(out[0]) == -np.sign(g)

    def test_no_decay_keeps_lr_constant(self):
        step_sizes = []
        for epoch in (0, 7):
            opt = Adam(lr0=0.02, decay=0.0)
            out = opt.step(np.array([0.0]), np.array([4.0]), epoch=epoch)
            step_sizes.append(abs(out[0]))
        assert step_sizes[0] == step_sizes[1]

    def test_decay_shrinks_lr(self):
        opt_late = Adam(lr0=0.02, decay=0.5)
        late = abs(opt_late.step(np.array([0.0]), np.array([4.0]), epoch=10)[0])
        assert late == pytest.approx(0.02 / 6.0, rel=1e-3)

    def test_shape_mismatch_rejected(self):
        opt = Adam(lr0=0.1)
        with pytest.raises(ValueError):
            opt.step(np.zeros(3), np.zeros(4))

    def test_first_step_moves_against_gradient(self):
        opt = Adam(lr0=0.01)
        params = np.array([1.0, 1.0])
        grads = np.array([2.0, -3.0])
        out = opt.step(params, grads, epoch=0)
        assert out[0] < params[0]
        assert out[1] > params[1]


class TestRows:
    def test_l2_normalize_rows(self):
        m = np.array([[3.0, 4.0], [1.0, 0.0]])
        out = l2_normalize_rows(m)
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-15)

    def test_zero_row_rejected(self):
        with pytest.raises(ValueError):
            l2_normalize_rows(np.array([[0.0, 0.0]]))

    def test_rng_stream_reproducible(self):
        a = seeded_rng(123).normal(size=16)
        b = seeded_rng(123).normal(size=16)
        np.testing.assert_array_equal(a, b)

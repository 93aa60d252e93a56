import numpy as np
import pytest

from conftest import random_model
from oracles import brute_loss, central_difference
from qms import (ClassPartitionedBatch, NumericalError, QmsModel, ShapeError, clamp_indicator,
                 gradients, loss, phi_jk)
from qms.loss import DEN_EPS, loss_and_gradients_arrays


def scalar_model(a1, b1, a2, b2, alpha):
    return QmsModel([[[a1]], [[a2]]], [[b1], [b2]], alpha, ("one", "two"))


class TestPhi:
    def test_ratio_above_floor(self):
        assert phi_jk(4.0, 9.0, 0.3) == 4.0 / 9.0

    def test_floor(self):
        assert phi_jk(1.0, 4.0, 0.3) == 0.3

    def test_zero_denominator_guarded(self):
        assert phi_jk(1.0, 0.0, 0.3) == 1.0 / DEN_EPS

    def test_indicator_boundary_is_flat(self):
        assert clamp_indicator(3.0, 10.0, 0.3) == 0
        assert clamp_indicator(3.1, 10.0, 0.3) == 1


class TestLossValue:
    def test_two_point_example(self):
        # f_1(x) = x^2, f_2(x) = (x + 1)^2; x1 = 2 in class one, x2 = -2 in class two
        model = QmsModel([[[1.0]], [[1.0]]], [[0.0], [-1.0]], 0.3, ("one", "two"))
        X = np.array([[2.0, -2.0]])
        np.testing.assert_array_equal(model.member_values(X), [[4.0, 4.0], [9.0, 1.0]])
        batch = ClassPartitionedBatch(X, [0, 1], 2)
        # 4/9 stays above the floor; 1/4 is below alpha = 0.3 and clamps to 0.3
        assert loss(model, batch) == pytest.approx(0.7444444444444445, rel=1e-12)
        oracle = brute_loss(model.weights.tolist(), model.offsets.tolist(),
                            model.alpha.tolist(), X.tolist(), [0, 1])
        assert loss(model, batch) == pytest.approx(oracle, rel=1e-14)

    def test_two_point_example_unclamped(self):
        model = QmsModel([[[1.0]], [[1.0]]], [[0.0], [-1.0]], 0.2, ("one", "two"))
        batch = ClassPartitionedBatch([[2.0, -2.0]], [0, 1], 2)
        assert loss(model, batch) == pytest.approx(4 / 9 + 1 / 4, rel=1e-12)

    def test_all_clamped_floor(self):
        model = scalar_model(1.0, 0.0, 1.0, 10.0, 0.5)
        batch = ClassPartitionedBatch([[0.1, 0.2, 0.3, 9.9, 10.1]], [0, 0, 0, 1, 1], 2)
        assert loss(model, batch) == 0.5 * 5 * 1

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            m = int(rng.integers(2, 5))
            model = random_model(rng, 3, 4, m, alpha=float(rng.uniform(0, 0.9)))
            X = rng.standard_normal((4, 9))
            y = rng.integers(0, m, 9)
            expect = brute_loss(model.weights.tolist(), model.offsets.tolist(),
                                model.alpha.tolist(), X.tolist(), y.tolist())
            assert loss(model, ClassPartitionedBatch(X, y, m)) == pytest.approx(expect, rel=1e-12)

    def test_asymmetric_alpha(self):
        model = QmsModel([[[1.0]], [[1.0]]], [[0.0], [-1.0]], [[0, 0.1], [0.9, 0]],
                         ("one", "two"))
        batch = ClassPartitionedBatch([[2.0, -2.0]], [0, 1], 2)
        # class-one point uses alpha[0,1] = 0.1; class-two point uses alpha[1,0] = 0.9
        assert loss(model, batch) == pytest.approx(4 / 9 + 0.9, rel=1e-12)

    def test_empty_batch_is_zero(self, rng):
        model = random_model(rng, 2, 3, 3)
        assert loss(model, ClassPartitionedBatch(np.zeros((3, 0)), [], 3)) == 0.0

    def test_shape_mismatch(self, rng):
        model = random_model(rng, 2, 3, 3)
        with pytest.raises(ShapeError):
            loss(model, ClassPartitionedBatch(np.zeros((2, 1)), [0], 3))
        with pytest.raises(ShapeError):
            loss(model, ClassPartitionedBatch(np.zeros((3, 1)), [0], 2))


class TestGradients:
    def test_scalar_example(self):
        # x = 2 in class one, A1 = 1, b1 = 0, A2 = 2, b2 = 1: f1 = 4, f2 = 9.
        model = scalar_model(1.0, 0.0, 2.0, 1.0, 0.3)
        g = gradients(model, ClassPartitionedBatch([[2.0]], [0], 2))
        np.testing.assert_allclose(g.dA[:, 0, 0], [8 / 9, -16 / 27], rtol=1e-12)
        np.testing.assert_allclose(g.db[:, 0], [-4 / 9, 8 / 27], rtol=1e-12)

    def test_scalar_example_against_fd(self):
        def f(theta):
            a1, b1, a2, b2 = theta
            return loss(scalar_model(a1, b1, a2, b2, 0.3),
                        ClassPartitionedBatch([[2.0]], [0], 2))
        fd = central_difference(f, [1.0, 0.0, 2.0, 1.0], 1e-6)
        np.testing.assert_allclose(fd, [8 / 9, -4 / 9, -16 / 27, 8 / 27], rtol=1e-7)

    def test_clamped_gives_zero(self):
        model = scalar_model(1.0, 0.0, 1.0, 10.0, 0.5)
        g = gradients(model, ClassPartitionedBatch([[0.1, 9.9]], [0, 1], 2))
        assert not g.dA.any() and not g.db.any()

    def test_boundary_counts_as_flat(self):
        # f_0(1) = 1, f_1(1) = 4 -> ratio exactly 0.25 = alpha
        model = scalar_model(1.0, 0.0, 1.0, 3.0, 0.25)
        g = gradients(model, ClassPartitionedBatch([[1.0]], [0], 2))
        assert not g.dA.any()

    def test_iterable_pairs(self, rng):
        model = random_model(rng, 2, 3, 3)
        g = gradients(model, ClassPartitionedBatch(rng.standard_normal((3, 5)),
                                                   [0, 1, 2, 0, 1], 3))
        assert len(g) == 3
        for (dA, db), A, b in zip(g, model.weights, model.offsets):
            assert dA.shape == A.shape and db.shape == b.shape

    def test_value_matches_loss(self, rng):
        model = random_model(rng, 3, 2, 3)
        X, y = rng.standard_normal((2, 7)), rng.integers(0, 3, 7)
        value, _, _ = loss_and_gradients_arrays(model.weights, model.offsets, model.alpha, X, y)
        assert value == loss(model, ClassPartitionedBatch(X, y, 3))

    def test_zero_member_value_guarded(self):
        # x sits exactly on the rival's zero set: denominator guard keeps it finite
        model = scalar_model(1.0, 0.0, 1.0, 1.0, 0.3)
        g = gradients(model, ClassPartitionedBatch([[1.0]], [0], 2))
        assert np.isfinite(g.dA).all()

    def test_overflow_raises_numerical(self):
        model = scalar_model(1e200, 0.0, 1.0, 1.0, 0.3)
        with pytest.raises(NumericalError):
            gradients(model, ClassPartitionedBatch([[1.0]], [0], 2))


class TestBatch:
    def test_from_blocks(self):
        b = ClassPartitionedBatch.from_blocks([np.ones((2, 3)), np.zeros((2, 1))])
        np.testing.assert_array_equal(b.labels, [0, 0, 0, 1])
        np.testing.assert_array_equal(b.counts, [3, 1])
        assert b.blocks[1].shape == (2, 1)

    def test_label_range(self):
        with pytest.raises(ShapeError):
            ClassPartitionedBatch(np.ones((1, 2)), [0, 2], 2)


class TestNearSingular:
    def test_small_denominator_matches_fine_differences(self):
        # Rival member value ~1e-6: central differences need h well below sqrt(f).
        rng = np.random.default_rng(81)
        W, c = rng.standard_normal((2, 1, 3)), rng.standard_normal((2, 1))
        x = rng.standard_normal(3)
        c[1, 0] = W[1, 0] @ x - 1e-3  # f_1(x) = 1e-6
        model = QmsModel(W, c, 0.3, ("a", "b"))
        batch = ClassPartitionedBatch(x[:, None], [0], 2)
        g = gradients(model, batch)
        theta = np.concatenate([W.ravel(), c.ravel()])

        def f(t):
            return loss(model.replace_params(t[:6].reshape(2, 1, 3), t[6:].reshape(2, 1)), batch)

        fd = central_difference(f, theta, 1e-8)
        np.testing.assert_allclose(np.concatenate([g.dA.ravel(), g.db.ravel()]), fd, rtol=1e-5)


class TestSummationOrder:
    def test_matches_sequential_reference_bitwise(self, rng):
        from qms.loss import _accumulate
        G = rng.standard_normal((3, 2, 37)) * 10.0 ** rng.integers(-8, 8, (3, 2, 37))
        X = rng.standard_normal((4, 37))
        dA, db = _accumulate(G, X)
        for i in range(3):
            for r in range(2):
                sb = 0.0
                for j in range(37):
                    sb += G[i, r, j]
                assert db[i, r] == -2.0 * sb
                for c in range(4):
                    sa = 0.0
                    for j in range(37):
                        sa += G[i, r, j] * X[c, j]
                    assert dA[i, r, c] == 2.0 * sa

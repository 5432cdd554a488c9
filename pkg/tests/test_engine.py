import math

import numpy as np
import pytest

from sshfd.engine import (
    AdamState,
    LayerSpec,
    MlpModel,
    Tensor,
    TrainSchedule,
    adam_step,
    cross_entropy_loss,
    grad_check,
    lr_at,
    mse_loss,
    softmax,
)
from sshfd.errors import ParameterError, ShapeError, StateError


def linear_model(in_dim=4, out_dim=3, seed=0):
    return MlpModel([LayerSpec("linear", in_dim, out_dim)], seed=seed)


def small_block(seed=0, dropout_p=0.0):
    specs = [
        LayerSpec("linear", 6, 8),
        LayerSpec("batchnorm", 8, 8),
        LayerSpec("relu"),
        LayerSpec("dropout", dropout_p=dropout_p),
        LayerSpec("linear", 8, 5),
    ]
    return MlpModel(specs, seed=seed)


class TestForward:
    def test_linear_matches_manual_product(self, rng):
        model = linear_model()
        x = rng.normal(size=(7, 4)).astype(np.float32)
        params = dict(model.parameters())
        w = params["layer0.W"].value
        b = params["layer0.b"].value
        got = model.forward(x)
        assert np.allclose(got, x @ w + b, atol=1e-6)

    def test_bias_starts_zero_weights_small(self):
        params = dict(linear_model().parameters())
        assert (params["layer0.b"].value == 0).all()
        w = params["layer0.W"].value
        assert abs(float(w.std()) - 0.01) < 0.01

    def test_relu_clamps_negatives(self):
        model = MlpModel([LayerSpec("relu")], seed=0)
        x = np.array([[-2.0, 0.0, 3.0]], dtype=np.float32)
        # relu-only model has no linear layer, forward still works
        assert np.array_equal(model.forward(x), [[0.0, 0.0, 3.0]])

    def test_batchnorm_train_normalizes_batch(self, rng):
        model = MlpModel([LayerSpec("batchnorm", 5, 5)], seed=0)
        x = rng.normal(3.0, 2.5, size=(512, 5)).astype(np.float32)
        y = model.forward(x, train=True)
        assert np.allclose(y.mean(axis=0), 0.0, atol=1e-4)
        assert np.allclose(y.var(axis=0), 1.0, atol=1e-2)

    def test_batchnorm_eval_uses_running_stats(self, rng):
        model = MlpModel([LayerSpec("batchnorm", 3, 3)], seed=0)
        x = rng.normal(1.0, 2.0, size=(64, 3)).astype(np.float32)
        for _ in range(200):
            model.forward(x, train=True)
            model._forwarded = False
        y_eval = model.forward(x)
        y_train = model.forward(x, train=True)
        assert np.allclose(y_eval, y_train, atol=1e-2)

    def test_residual_span_adds_identity(self, rng):
        specs = [
            LayerSpec("residual-begin"),
            LayerSpec("linear", 4, 4),
            LayerSpec("residual-end"),
        ]
        model = MlpModel(specs, seed=3)
        x = rng.normal(size=(5, 4)).astype(np.float32)
        inner = MlpModel([LayerSpec("linear", 4, 4)], seed=0)
        for (_, dst), (_, src) in zip(inner.parameters(), model.parameters()):
            dst.value = src.value.copy()
        assert np.allclose(model.forward(x), x + inner.forward(x), atol=1e-6)

    def test_unbalanced_residual_rejected(self):
        with pytest.raises(ParameterError):
            MlpModel([LayerSpec("residual-begin"), LayerSpec("linear", 2, 2)], seed=0)

    def test_wrong_width_rejected(self, rng):
        with pytest.raises(ShapeError):
            linear_model().forward(rng.normal(size=(2, 5)))

    def test_seed_determinism(self, rng):
        a = small_block(seed=11)
        b = small_block(seed=11)
        c = small_block(seed=12)
        for (_, ta), (_, tb) in zip(a.parameters(), b.parameters()):
            assert np.array_equal(ta.value, tb.value)
        assert not np.array_equal(
            dict(a.parameters())["layer0.W"].value,
            dict(c.parameters())["layer0.W"].value,
        )


class TestDropout:
    def test_eval_mode_is_identity(self, rng):
        model = MlpModel([LayerSpec("dropout", dropout_p=0.5)], seed=0)
        x = rng.normal(size=(10, 6)).astype(np.float32)
        assert np.array_equal(model.forward(x, train=False), x)

    def test_train_mode_zeroes_about_p_and_rescales(self, rng):
        p = 0.4
        model = MlpModel([LayerSpec("dropout", dropout_p=p)], seed=0)
        x = np.ones((400, 50), dtype=np.float32)
        y = model.forward(x, train=True, rng=rng)
        frac_zero = float((y == 0).mean())
        assert abs(frac_zero - p) < 0.02
        survivors = y[y != 0]
        assert np.allclose(survivors, 1.0 / (1.0 - p), atol=1e-6)

    def test_train_mode_without_rng_rejected(self):
        model = MlpModel([LayerSpec("dropout", dropout_p=0.5)], seed=0)
        with pytest.raises(StateError):
            model.forward(np.ones((2, 3)), train=True, rng=None)

    def test_invalid_probability_rejected(self):
        with pytest.raises(ParameterError):
            LayerSpec("dropout", dropout_p=1.0)


class TestBackward:
    def brute_force_grads(self, model, x, loss_fn, h=1e-6):
        # independent oracle: plain central differences on every parameter
        out = {}
        for name, t in model.parameters():
            g = np.zeros_like(t.value)
            for i in range(t.value.size):
                orig = t.value.flat[i]
                t.value.flat[i] = orig + h
                lp, _ = loss_fn(model.forward(x, train=True))
                t.value.flat[i] = orig - h
                lm, _ = loss_fn(model.forward(x, train=True))
                t.value.flat[i] = orig
                g.flat[i] = (lp - lm) / (2 * h)
            out[name] = g
        return out

    def test_linear_gradients_match_finite_differences(self, rng):
        model = linear_model().astype(np.float64)
        x = rng.normal(size=(6, 4))
        target = rng.normal(size=(6, 3))
        loss_fn = lambda y: mse_loss(y, target)
        expected = self.brute_force_grads(model, x, loss_fn)
        model.zero_grad()
        _, dy = loss_fn(model.forward(x, train=True))
        model.backward(dy)
        for name, t in model.parameters():
            assert np.allclose(t.grad, expected[name], rtol=1e-5, atol=1e-7), name

    def test_batchnorm_gradients_match_finite_differences(self, rng):
        specs = [LayerSpec("linear", 3, 4), LayerSpec("batchnorm", 4, 4)]
        model = MlpModel(specs, seed=2).astype(np.float64)
        x = rng.normal(size=(8, 3))
        target = rng.normal(size=(8, 4))
        loss_fn = lambda y: mse_loss(y, target)
        expected = self.brute_force_grads(model, x, loss_fn)
        model.zero_grad()
        _, dy = loss_fn(model.forward(x, train=True))
        model.backward(dy)
        for name, t in model.parameters():
            assert np.allclose(t.grad, expected[name], rtol=1e-4, atol=1e-7), name

    def test_full_block_grad_check(self, rng):
        model = small_block(seed=5, dropout_p=0.5)
        x = rng.normal(size=(16, 6))
        target = rng.normal(size=(16, 5))
        err = grad_check(model, x, lambda y: mse_loss(y, target), n_params=60)
        assert err < 1e-6

    def test_residual_block_grad_check(self, rng):
        specs = [
            LayerSpec("linear", 4, 6),
            LayerSpec("residual-begin"),
            LayerSpec("linear", 6, 6),
            LayerSpec("batchnorm", 6, 6),
            LayerSpec("relu"),
            LayerSpec("residual-end"),
            LayerSpec("linear", 6, 2),
        ]
        model = MlpModel(specs, seed=9)
        x = rng.normal(size=(12, 4))
        labels = rng.integers(0, 2, 12)
        err = grad_check(model, x, lambda y: cross_entropy_loss(y, labels), n_params=40)
        assert err < 1e-6

    def test_backward_before_forward_rejected(self):
        with pytest.raises(StateError):
            linear_model().backward(np.ones((1, 3)))


class TestLosses:
    def test_mse_trivial(self):
        loss, grad = mse_loss(np.array([[1.0, 3.0]]), np.array([[0.0, 1.0]]))
        assert loss == pytest.approx((1 + 4) / 2)
        assert np.allclose(grad, [[1.0, 2.0]])

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mse_loss(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_cross_entropy_uniform_logits_is_log_n(self):
        loss, _ = cross_entropy_loss(np.zeros((1, 2)), np.array([0]))
        assert loss == pytest.approx(math.log(2.0), rel=1e-12)
        loss4, _ = cross_entropy_loss(np.zeros((3, 4)), np.array([0, 1, 3]))
        assert loss4 == pytest.approx(math.log(4.0), rel=1e-12)

    def test_cross_entropy_gradient_is_probs_minus_onehot(self, rng):
        logits = rng.normal(size=(5, 3))
        labels = rng.integers(0, 3, 5)
        _, grad = cross_entropy_loss(logits, labels)
        probs = softmax(logits)
        onehot = np.eye(3)[labels]
        assert np.allclose(grad, (probs - onehot) / 5, atol=1e-6)

    def test_cross_entropy_shift_invariance(self, rng):
        logits = rng.normal(size=(4, 3))
        labels = np.array([0, 2, 1, 1])
        a, _ = cross_entropy_loss(logits, labels)
        b, _ = cross_entropy_loss(logits + 1000.0, labels)
        assert a == pytest.approx(b, rel=1e-9)

    def test_cross_entropy_bad_labels_rejected(self):
        with pytest.raises(ParameterError):
            cross_entropy_loss(np.zeros((2, 2)), np.array([0, 2]))

    def test_softmax_rows_sum_to_one(self, rng):
        p = softmax(rng.normal(size=(6, 4)))
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert (p > 0).all()


class TestSchedule:
    def test_step_decay_boundaries(self):
        sch = TrainSchedule(epochs=100, lr0=0.01)
        assert lr_at(sch, 0) == pytest.approx(0.01)
        assert lr_at(sch, 49) == pytest.approx(0.01)
        assert lr_at(sch, 50) == pytest.approx(0.001)
        assert lr_at(sch, 74) == pytest.approx(0.001)
        assert lr_at(sch, 75) == pytest.approx(0.0001)
        assert lr_at(sch, 99) == pytest.approx(0.0001)

    def test_defaults(self):
        sch = TrainSchedule()
        assert sch.epochs == 300
        assert sch.lr0 == 0.01
        assert sch.weight_decay == 0.0005
        assert sch.dropout_p == 0.5
        assert (sch.beta1, sch.beta2, sch.eps) == (0.9, 0.999, 1e-8)

    def test_invalid_schedule_rejected(self):
        with pytest.raises(ParameterError):
            TrainSchedule(lr0=0.0)
        with pytest.raises(ParameterError):
            TrainSchedule(decay_epochs=(0.5, 1.5))


class TestAdam:
    def test_first_step_moves_by_almost_lr(self):
        # hand oracle: after one step, m/bc1 = g and sqrt(v/bc2) = |g|,
        # so the update is lr * g / (|g| + eps) regardless of magnitude
        t = Tensor(np.array([1.0, -2.0, 0.5]))
        t.grad = np.array([0.3, -0.1, 4.0])
        state = AdamState([("p", t)])
        sch = TrainSchedule(epochs=10, lr0=0.01, weight_decay=0.0)
        adam_step([("p", t)], state, sch, lr=0.01)
        expected = np.array([1.0, -2.0, 0.5]) - 0.01 * np.sign([0.3, -0.1, 4.0])
        assert np.allclose(t.value, expected, atol=1e-6)

    def test_weight_decay_added_to_gradient(self):
        t = Tensor(np.array([2.0]))
        t.grad = np.array([0.0])
        state = AdamState([("p", t)])
        sch = TrainSchedule(epochs=10, lr0=0.01, weight_decay=0.1)
        adam_step([("p", t)], state, sch, lr=0.01)
        # effective gradient 0.1 * 2.0 = 0.2, first step is -lr * sign
        assert t.value[0] == pytest.approx(2.0 - 0.01, abs=1e-6)

    def test_zero_gradient_without_decay_is_fixed_point(self):
        t = Tensor(np.array([1.5, -0.5]))
        t.grad = np.zeros(2)
        state = AdamState([("p", t)])
        sch = TrainSchedule(epochs=10, weight_decay=0.0)
        for _ in range(5):
            adam_step([("p", t)], state, sch, lr=0.01)
        assert np.array_equal(t.value, [1.5, -0.5])

    def test_missing_gradient_rejected(self):
        t = Tensor(np.array([1.0]))
        state = AdamState([("p", t)])
        with pytest.raises(StateError):
            adam_step([("p", t)], state, TrainSchedule(epochs=10), lr=0.01)

    def test_converges_on_quadratic(self):
        t = Tensor(np.array([5.0]))
        state = AdamState([("p", t)])
        sch = TrainSchedule(epochs=10, weight_decay=0.0)
        for _ in range(2000):
            t.grad = 2.0 * t.value
            adam_step([("p", t)], state, sch, lr=0.01)
        assert abs(t.value[0]) < 1e-3


class TestModelUtilities:
    def test_num_params_closed_form(self):
        model = small_block()
        # 6*8+8 linear, 8+8 batchnorm, 8*5+5 linear
        assert model.num_params() == (6 * 8 + 8) + (8 + 8) + (8 * 5 + 5)

    def test_in_out_dims(self):
        model = small_block()
        assert model.in_dim == 6
        assert model.out_dim == 5

    def test_astype_preserves_values(self, rng):
        model = small_block(seed=4)
        x = rng.normal(size=(3, 6)).astype(np.float32)
        clone = model.astype(np.float64)
        assert np.allclose(model.forward(x), clone.forward(x), atol=1e-6)
        assert clone.parameters()[0][1].value.dtype == np.float64

    def test_set_dropout(self):
        model = small_block(dropout_p=0.5)
        model.set_dropout(0.0)
        drops = [l for l in model.layers if l.spec.kind == "dropout"]
        assert all(l.p == 0.0 for l in drops)

    def test_unknown_layer_kind_rejected(self):
        with pytest.raises(ParameterError):
            LayerSpec("conv", 3, 3)

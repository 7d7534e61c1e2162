import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from spnforensics.errors import DataError, DimensionError, NumericError
from spnforensics.nn import (EVAL, TRAIN, AdamState, BatchNormLayer, Block, ConvLayer, Network,
                             adam_step, backward, batchnorm, conv2d, conv2d_backward, forward,
                             grad_check, mse_loss)
from spnforensics.spncnn import SpnCnnConfig, build_spncnn


def _linear_net(depth, width, rng):
    blocks = [Block(ConvLayer.he_normal(1, width, rng))]
    blocks += [Block(ConvLayer.he_normal(width, width, rng)) for _ in range(depth - 2)]
    blocks.append(Block(ConvLayer.he_normal(width, 1, rng)))
    return Network(blocks)


class TestConv:
    def setup_method(self):
        self.x = np.random.default_rng(0).normal(size=(2, 1, 6, 5))

    def test_identity_kernel(self):
        assert_array_equal(conv2d(self.x, ConvLayer.identity(dtype=np.float64)), self.x)

    def test_ones_kernel(self):
        layer = ConvLayer(np.ones((1, 1, 3, 3)), np.zeros(1))
        out = conv2d(np.full((1, 1, 5, 5), 4.0), layer)
        assert out[0, 0, 2, 2] == 36.0
        # zero padding at the corner
        assert out[0, 0, 0, 0] == 16.0

    def test_corner_value(self):
        x = np.arange(1.0, 10.0).reshape(1, 1, 3, 3)
        layer = ConvLayer(np.ones((1, 1, 3, 3)), np.zeros(1))
        assert conv2d(x, layer)[0, 0, 0, 0] == 1 + 2 + 4 + 5

    def test_cross_correlation_orientation(self):
        k = np.zeros((1, 1, 3, 3))
        k[0, 0, 1, 2] = 1
        out = conv2d(self.x, ConvLayer(k, np.zeros(1)))
        assert_array_equal(out[..., :-1], self.x[..., 1:])

    def test_bias_and_channels(self):
        layer = ConvLayer(np.zeros((3, 1, 3, 3)), np.array([1.0, 2.0, 3.0]))
        out = conv2d(self.x, layer)
        assert out.shape == (2, 3, 6, 5)
        assert_array_equal(out[1, 2], 3.0)
        with pytest.raises(DimensionError):
            conv2d(np.zeros((1, 2, 4, 4)), layer)

    def test_backward_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        layer = ConvLayer(rng.normal(size=(2, 1, 3, 3)), rng.normal(size=2))
        dout = rng.normal(size=(2, 2, 6, 5))
        dx, dk, db = conv2d_backward(dout, self.x, layer)
        eps = 1e-6
        x2 = self.x.copy()
        x2[1, 0, 3, 2] += eps
        num = ((conv2d(x2, layer) - conv2d(self.x, layer)) * dout).sum() / eps
        assert_allclose(dx[1, 0, 3, 2], num, rtol=1e-5)
        k2 = ConvLayer(layer.kernels.copy(), layer.bias)
        k2.kernels[1, 0, 0, 2] += eps
        num = ((conv2d(self.x, k2) - conv2d(self.x, layer)) * dout).sum() / eps
        assert_allclose(dk[1, 0, 0, 2], num, rtol=1e-5)
        assert_allclose(db, dout.sum(axis=(0, 2, 3)))


class TestBatchNorm:
    def test_eval_identity(self):
        x = np.random.default_rng(0).normal(size=(2, 3, 4, 4))
        layer = BatchNormLayer.fresh(3, np.float64)
        layer.epsilon = 0.0
        assert_allclose(batchnorm(x, layer, EVAL), x)

    def test_train_normalizes(self):
        x = np.random.default_rng(1).normal(5, 3, size=(4, 2, 6, 6))
        layer = BatchNormLayer.fresh(2, np.float64)
        out = batchnorm(x, layer, TRAIN)
        assert_allclose(out.mean(axis=(0, 2, 3)), 0, atol=1e-12)
        assert_allclose(out.var(axis=(0, 2, 3)), 1, rtol=1e-4)
        # running statistics moved a tenth of the way
        assert_allclose(layer.running_mean, 0.1 * x.mean(axis=(0, 2, 3)))

    def test_constant_beta(self):
        x = np.random.default_rng(2).normal(size=(2, 1, 3, 3))
        layer = BatchNormLayer.fresh(1, np.float64)
        layer.gamma[:] = 0
        layer.beta[:] = 5
        assert_array_equal(batchnorm(x, layer, TRAIN), 5.0)

    def test_single_value_rejected(self):
        with pytest.raises(DataError):
            batchnorm(np.zeros((1, 1, 1, 1)), BatchNormLayer.fresh(1), TRAIN)


class TestForward:
    def test_identity_net(self):
        x = np.random.default_rng(0).uniform(size=(1, 1, 7, 7)).astype(np.float32)
        out, tape = forward(Network([Block(ConvLayer.identity())]), x)
        assert_array_equal(out, x)
        assert len(tape.records) == 1

    def test_zero_net(self):
        net = Network([Block(ConvLayer(np.zeros((1, 1, 3, 3), np.float32), np.zeros(1, np.float32)))])
        out, _ = forward(net, np.random.default_rng(0).normal(size=(1, 1, 5, 5)))
        assert_array_equal(out, 0)

    def test_eval_is_pure(self):
        net = build_spncnn(SpnCnnConfig(depth=4, width=4, seed=3))
        x = np.random.default_rng(1).uniform(size=(2, 1, 9, 9))
        a = forward(net, x, EVAL)[0]
        b = forward(net, x, EVAL)[0]
        assert_array_equal(a, b)
        assert a.dtype == np.float32

    def test_record_flag(self):
        net = build_spncnn(SpnCnnConfig(depth=3, width=2))
        out, tape = forward(net, np.ones((1, 1, 4, 4)), EVAL, record=False)
        assert tape.records == []
        with pytest.raises(DataError):
            backward(tape, np.ones_like(out))

    def test_chain_validation(self):
        with pytest.raises(DimensionError):
            Network([Block(ConvLayer.identity(1)), Block(ConvLayer.identity(2))])
        with pytest.raises(DataError):
            Network([])


def test_mse_loss():
    assert mse_loss(np.ones((1, 1, 2, 2)), np.ones((1, 1, 2, 2)))[0] == 0
    assert mse_loss(np.ones((1, 1, 2, 2)), np.zeros((1, 1, 2, 2)))[0] == 1
    loss, grad = mse_loss(np.array([0.0, 0.0]), np.array([3.0, 4.0]))
    assert loss == 12.5
    assert_array_equal(grad, [-3.0, -4.0])
    with pytest.raises(DimensionError):
        mse_loss(np.zeros(2), np.zeros(3))


def test_mse_zero_gradients_through_network():
    net = build_spncnn(SpnCnnConfig(depth=3, width=3))
    x = np.random.default_rng(0).uniform(size=(2, 1, 6, 6))
    out, tape = forward(net, x, TRAIN)
    _, g = mse_loss(out, out)
    grads, gx = backward(tape, g)
    for entry in grads:
        for v in entry.values():
            assert_array_equal(v, 0)
    assert_array_equal(gx, 0)


class TestAdam:
    def test_first_step(self):
        p = [np.zeros(1)]
        state = AdamState.for_params(p, lr=1e-3)
        adam_step(p, [np.ones(1)], state)
        assert abs(p[0][0] + 1e-3) < 1e-8
        assert state.t == 1

    def test_zero_gradient(self):
        p = [np.array([1.5, -2.0])]
        state = AdamState.for_params(p)
        adam_step(p, [np.zeros(2)], state)
        assert_array_equal(p[0], [1.5, -2.0])
        assert state.t == 1

    def test_weight_decay_pulls_to_zero(self):
        p = [np.array([2.0])]
        state = AdamState.for_params(p, lr=0.1)
        adam_step(p, [np.zeros(1)], state, weight_decay=0.5)
        assert p[0][0] < 2.0

    def test_non_finite(self):
        p = [np.zeros(2)]
        state = AdamState.for_params(p)
        with pytest.raises(NumericError):
            adam_step(p, [np.array([np.nan, 0.0])], state)
        assert state.t == 0
        with pytest.raises(DimensionError):
            adam_step(p, [np.zeros(3)], state)


class TestGradCheck:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.x = rng.uniform(size=(2, 1, 12, 12))
        self.target = rng.normal(0, 0.01, size=self.x.shape)

    def test_linear_stack(self):
        net = _linear_net(4, 8, np.random.default_rng(1))
        assert grad_check(net, self.x, self.target) < 1e-6

    def test_full_stack(self):
        net = build_spncnn(SpnCnnConfig(depth=4, width=8, seed=2))
        assert grad_check(net, self.x, self.target, eps=1e-6) < 1e-3

    def test_full_stack_every_parameter(self):
        net = build_spncnn(SpnCnnConfig(depth=4, width=8, seed=2))
        total = sum(p.size for p in net.parameters())
        assert grad_check(net, self.x, self.target, eps=1e-6, n_params=total) < 1e-3

    def test_wide_step_crosses_relu_kinks(self):
        net = build_spncnn(SpnCnnConfig(depth=4, width=8, seed=2))
        assert grad_check(net, self.x, self.target, eps=1e-3) > grad_check(net, self.x, self.target, eps=1e-6)

    def test_does_not_modify_net(self):
        net = build_spncnn(SpnCnnConfig(depth=3, width=4, seed=2))
        before = [p.copy() for p in net.parameters()]
        grad_check(net, self.x, self.target, n_params=20)
        for a, b in zip(before, net.parameters()):
            assert_array_equal(a, b)

    def test_detects_sign_flip(self):
        def flipped(tape, g):
            grads, gx = backward(tape, g)
            return [{k: -v for k, v in e.items()} for e in grads], gx

        net = build_spncnn(SpnCnnConfig(depth=4, width=8, seed=2))
        assert grad_check(net, self.x, self.target, backward_fn=flipped) > 0.5

"""Tests for the primitive layers: conv, ReLU, batch norm, BN folding."""

import numpy as np
import pytest

from mapdenoise.errors import ContractError
from mapdenoise.nn import (
    BatchNormLayer,
    ConvLayer,
    batchnorm_backward,
    batchnorm_fold,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    linear_index,
    relu_backward,
    relu_forward,
)

from reference import conv2d_loop, max_rel_error, numeric_gradient


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def random_conv(g, out_c, in_c):
    return ConvLayer(g.normal(size=(out_c, in_c, 3, 3)), g.normal(size=out_c))


def identity_kernel(channels=1):
    w = np.zeros((channels, channels, 3, 3))
    for c in range(channels):
        w[c, c, 1, 1] = 1.0
    return ConvLayer(w, np.zeros(channels))


class TestLinearIndex:
    def test_matches_ravel(self):
        shape = (2, 3, 4, 5)
        arr = np.arange(np.prod(shape)).reshape(shape)
        g = rng(1)
        for _ in range(20):
            n, c, y, x = (int(g.integers(0, s)) for s in shape)
            assert arr.reshape(-1)[linear_index(shape, n, c, y, x)] == arr[n, c, y, x]


class TestConvForward:
    def test_zero_input_gives_bias(self):
        g = rng(2)
        layer = random_conv(g, 3, 1)
        out = conv2d_forward(np.zeros((1, 1, 3, 3)), layer)
        expected = np.broadcast_to(layer.bias.reshape(1, 3, 1, 1), (1, 3, 3, 3))
        np.testing.assert_array_equal(out, expected)

    def test_identity_kernel(self):
        g = rng(3)
        x = g.normal(size=(1, 1, 5, 5))
        np.testing.assert_array_equal(conv2d_forward(x, identity_kernel()), x)

    def test_matches_loop_reference(self):
        g = rng(4)
        x = g.normal(size=(1, 2, 4, 4))
        layer = random_conv(g, 3, 2)
        got = conv2d_forward(x, layer)
        want = conv2d_loop(x, layer.weights, layer.bias)
        np.testing.assert_allclose(got, want, atol=1e-12)

    @pytest.mark.parametrize("shape", [(2, 3, 5, 7), (1, 1, 8, 8), (3, 4, 6, 5)])
    def test_matches_loop_reference_shapes(self, shape):
        g = rng(hash(shape) % 2**31)
        x = g.normal(size=shape)
        layer = random_conv(g, 4, shape[1])
        np.testing.assert_allclose(
            conv2d_forward(x, layer), conv2d_loop(x, layer.weights, layer.bias), atol=1e-12)

    def test_channel_mismatch_raises(self):
        layer = identity_kernel()
        with pytest.raises(ContractError):
            conv2d_forward(np.zeros((1, 2, 4, 4)), layer)

    def test_linearity_minus_bias(self):
        g = rng(5)
        layer = random_conv(g, 3, 2)
        x, z = g.normal(size=(1, 2, 6, 6)), g.normal(size=(1, 2, 6, 6))
        a, b = 1.7, -0.4
        bias_term = layer.bias.reshape(1, -1, 1, 1)
        lhs = conv2d_forward(a * x + b * z, layer) - bias_term
        rhs = (a * (conv2d_forward(x, layer) - bias_term)
               + b * (conv2d_forward(z, layer) - bias_term))
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


class TestConvBackward:
    def test_zero_grad_out(self):
        g = rng(6)
        x = g.normal(size=(1, 2, 4, 4))
        layer = random_conv(g, 3, 2)
        gx, gw, gb = conv2d_backward(x, layer, np.zeros((1, 3, 4, 4)))
        assert not gx.any() and not gw.any() and not gb.any()

    def test_identity_kernel_adjoint(self):
        x = np.zeros((1, 1, 5, 5))
        grad_out = np.zeros((1, 1, 5, 5))
        grad_out[0, 0, 2, 3] = 1.0
        gx, _, _ = conv2d_backward(x, identity_kernel(), grad_out)
        np.testing.assert_array_equal(gx, grad_out)

    def test_matches_finite_differences(self):
        g = rng(7)
        x = g.normal(size=(1, 2, 4, 4))
        layer = random_conv(g, 2, 2)
        grad_out = g.normal(size=(1, 2, 4, 4))

        gx, gw, gb = conv2d_backward(x, layer, grad_out)

        def loss_x(xv):
            return float(np.sum(conv2d_forward(xv, layer) * grad_out))

        def loss_w(wv):
            return float(np.sum(conv2d_forward(x, ConvLayer(wv, layer.bias)) * grad_out))

        def loss_b(bv):
            return float(np.sum(conv2d_forward(x, ConvLayer(layer.weights, bv)) * grad_out))

        assert max_rel_error(gx, numeric_gradient(loss_x, x)) < 1e-6
        assert max_rel_error(gw, numeric_gradient(loss_w, layer.weights)) < 1e-6
        assert max_rel_error(gb, numeric_gradient(loss_b, layer.bias)) < 1e-6

    def test_adjoint_identity(self):
        # <conv(x) - bias, g> == <x, conv_adjoint(g)> for random x, g
        g = rng(8)
        layer = random_conv(g, 3, 2)
        x = g.normal(size=(2, 2, 5, 5))
        gout = g.normal(size=(2, 3, 5, 5))
        gx, _, _ = conv2d_backward(x, layer, gout)
        bias_term = layer.bias.reshape(1, -1, 1, 1)
        lhs = float(np.sum((conv2d_forward(x, layer) - bias_term) * gout))
        rhs = float(np.sum(x * gx))
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_shape_mismatch_raises(self):
        g = rng(9)
        layer = random_conv(g, 3, 2)
        with pytest.raises(ContractError):
            conv2d_backward(np.zeros((1, 2, 4, 4)), layer, np.zeros((1, 3, 5, 5)))


class TestRelu:
    def test_values(self):
        x = np.array([-1.0, 0.0, 2.0]).reshape(1, 1, 1, 3)
        np.testing.assert_array_equal(relu_forward(x), [[[[0.0, 0.0, 2.0]]]])

    def test_positive_passthrough(self):
        g = rng(10)
        x = np.abs(g.normal(size=(1, 2, 3, 3))) + 0.1
        gout = g.normal(size=x.shape)
        np.testing.assert_array_equal(relu_forward(x), x)
        np.testing.assert_array_equal(relu_backward(x, gout), gout)

    def test_grad_at_zero_is_zero(self):
        x = np.zeros((1, 1, 1, 1))
        assert relu_backward(x, np.ones_like(x))[0, 0, 0, 0] == 0.0

    def test_matches_finite_differences(self):
        g = rng(11)
        x = g.normal(size=(1, 2, 4, 4))
        x[np.abs(x) < 1e-3] = 0.5  # keep away from the kink
        gout = g.normal(size=x.shape)
        gx = relu_backward(x, gout)

        def loss(xv):
            return float(np.sum(relu_forward(xv) * gout))

        assert max_rel_error(gx, numeric_gradient(loss, x)) < 1e-6


class TestBatchNorm:
    def make_bn(self, channels, g=None):
        if g is None:
            return BatchNormLayer(
                np.ones(channels), np.zeros(channels), np.zeros(channels), np.ones(channels))
        return BatchNormLayer(
            g.normal(size=channels), g.normal(size=channels),
            g.normal(size=channels), np.abs(g.normal(size=channels)) + 0.5)

    def test_normalized_input_passthrough(self):
        g = rng(12)
        x = g.normal(size=(4, 3, 8, 8))
        x -= x.mean(axis=(0, 2, 3), keepdims=True)
        x /= x.std(axis=(0, 2, 3), keepdims=True)
        bn = self.make_bn(3)
        out, stats = batchnorm_forward(x, bn, train=True)
        assert stats is not None
        np.testing.assert_allclose(out, x, atol=1e-4)

    def test_zero_gamma_gives_beta(self):
        g = rng(13)
        bn = BatchNormLayer(np.zeros(2), np.array([1.5, -2.0]), np.zeros(2), np.ones(2))
        x = g.normal(size=(2, 2, 3, 3))
        out, _ = batchnorm_forward(x, bn, train=True)
        np.testing.assert_allclose(out[:, 0], 1.5)
        np.testing.assert_allclose(out[:, 1], -2.0)

    def test_running_stats_update(self):
        g = rng(14)
        bn = self.make_bn(2)
        x = g.normal(size=(4, 2, 4, 4)) * 2.0 + 3.0
        batchnorm_forward(x, bn, train=True)
        expected_mean = 0.9 * 0.0 + 0.1 * x.mean(axis=(0, 2, 3))
        np.testing.assert_allclose(bn.running_mean, expected_mean, atol=1e-12)

    def test_infer_uses_running_stats(self):
        bn = BatchNormLayer(
            np.array([2.0]), np.array([1.0]), np.array([0.5]), np.array([4.0]), epsilon=1e-12)
        x = np.full((1, 1, 2, 2), 2.5)
        out, stats = batchnorm_forward(x, bn, train=False)
        assert stats is None
        np.testing.assert_allclose(out, 2.0 * (2.5 - 0.5) / 2.0 + 1.0, rtol=1e-9)

    def test_backward_matches_finite_differences(self):
        g = rng(15)
        x = g.normal(size=(2, 3, 4, 4))
        gout = g.normal(size=x.shape)
        bn = self.make_bn(3, g)

        def fresh():
            return BatchNormLayer(
                bn.gamma.copy(), bn.beta.copy(),
                bn.running_mean.copy(), bn.running_var.copy(), bn.epsilon)

        out, stats = batchnorm_forward(x, fresh(), train=True)
        gx, ggamma, gbeta = batchnorm_backward(x, bn, stats, gout)

        def loss_x(xv):
            return float(np.sum(batchnorm_forward(xv, fresh(), train=True)[0] * gout))

        def loss_gamma(gv):
            layer = fresh()
            layer.gamma = gv
            return float(np.sum(batchnorm_forward(x, layer, train=True)[0] * gout))

        def loss_beta(bv):
            layer = fresh()
            layer.beta = bv
            return float(np.sum(batchnorm_forward(x, layer, train=True)[0] * gout))

        assert max_rel_error(gx, numeric_gradient(loss_x, x)) < 1e-5
        assert max_rel_error(ggamma, numeric_gradient(loss_gamma, bn.gamma)) < 1e-5
        assert max_rel_error(gbeta, numeric_gradient(loss_beta, bn.beta)) < 1e-5

    def test_zero_epsilon_rejected(self):
        with pytest.raises(ContractError):
            BatchNormLayer(np.ones(1), np.zeros(1), np.zeros(1), np.ones(1), epsilon=0.0)

    def test_train_needs_two_values(self):
        bn = self.make_bn(1)
        with pytest.raises(ContractError):
            batchnorm_forward(np.zeros((1, 1, 1, 1)), bn, train=True)


class TestBatchNormFold:
    def test_identity_bn_is_noop(self):
        g = rng(16)
        conv = random_conv(g, 3, 2)
        bn = BatchNormLayer(
            np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), epsilon=1e-15)
        folded = batchnorm_fold(conv, bn)
        np.testing.assert_allclose(folded.weights, conv.weights, rtol=1e-9)
        np.testing.assert_allclose(folded.bias, conv.bias, rtol=1e-9, atol=1e-12)

    def test_bias_only_closed_form(self):
        b = np.array([0.7, -1.2])
        m = np.array([0.3, 0.1])
        v = np.array([2.0, 0.5])
        gamma = np.array([1.5, -0.5])
        beta = np.array([0.25, 0.75])
        eps = 1e-5
        conv = ConvLayer(np.zeros((2, 1, 3, 3)), b)
        folded = batchnorm_fold(conv, BatchNormLayer(gamma, beta, m, v, eps))
        np.testing.assert_allclose(folded.bias, gamma * (b - m) / np.sqrt(v + eps) + beta)
        assert not folded.weights.any()

    @pytest.mark.parametrize("seed", range(5))
    def test_fold_equivalence_random(self, seed):
        g = rng(100 + seed)
        conv = random_conv(g, 4, 3)
        bn = BatchNormLayer(
            g.normal(size=4), g.normal(size=4), g.normal(size=4),
            np.abs(g.normal(size=4)) + 0.3)
        x = g.normal(size=(2, 3, 6, 6))
        composed, _ = batchnorm_forward(conv2d_forward(x, conv), bn, train=False)
        folded = conv2d_forward(x, batchnorm_fold(conv, bn))
        np.testing.assert_allclose(folded, composed, atol=1e-10)

    def test_fold_equivalence_float32(self):
        g = rng(17)
        conv = random_conv(g, 3, 2).astype(np.float32)
        bn = BatchNormLayer(
            g.normal(size=3), g.normal(size=3), g.normal(size=3),
            np.abs(g.normal(size=3)) + 0.3).astype(np.float32)
        x = g.normal(size=(1, 2, 8, 8)).astype(np.float32)
        composed, _ = batchnorm_forward(conv2d_forward(x, conv), bn, train=False)
        folded = conv2d_forward(x, batchnorm_fold(conv, bn))
        np.testing.assert_allclose(folded, composed, atol=1e-5)


class TestFiniteDifferenceSweep:
    """Every backward op against central differences on many random instances."""

    @pytest.mark.parametrize("seed", range(20))
    def test_conv_backward_sweep(self, seed):
        g = rng(1000 + seed)
        in_c = int(g.integers(1, 4))
        out_c = int(g.integers(1, 4))
        h, w = int(g.integers(2, 6)), int(g.integers(2, 6))
        x = g.normal(size=(1, in_c, h, w))
        layer = random_conv(g, out_c, in_c)
        gout = g.normal(size=(1, out_c, h, w))
        gx, gw, gb = conv2d_backward(x, layer, gout)

        def loss_x(xv):
            return float(np.sum(conv2d_forward(xv, layer) * gout))

        def loss_w(wv):
            return float(np.sum(conv2d_forward(x, ConvLayer(wv, layer.bias)) * gout))

        assert max_rel_error(gx, numeric_gradient(loss_x, x)) < 1e-5
        assert max_rel_error(gw, numeric_gradient(loss_w, layer.weights)) < 1e-5
        np.testing.assert_allclose(gb, gout.sum(axis=(0, 2, 3)))

"""Differentiable primitive layers: 2-D convolution, ReLU, batch normalization.

Tensor convention
-----------------
All activations, filters and gradients are dense numpy arrays in
``(batch, channel, height, width)`` order, C-contiguous, so the flat offset
of element ``(n, c, y, x)`` in an array of shape ``(N, C, H, W)`` is::

    ((n * C + c) * H + y) * W + x

(see :func:`linear_index`, which the test suite pins against ``ravel``).
Arrays are treated as immutable values: every operation allocates its
output. float64 is the default and is required for gradient checks;
float32 inputs are honoured end to end for faster inference
(:meth:`ConvLayer.astype` converts a layer's parameters).

Convolutions are 3x3, stride 1, zero padding 1, so spatial size is always
preserved. The implementation is direct convolution, vectorised as
pad + strided patch extraction + one batched BLAS matmul; backward passes
are exact adjoints, not approximations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

KERNEL = 3
PAD = 1

BN_EPSILON = 1e-5   # conventional default
BN_MOMENTUM = 0.9   # running = momentum * running + (1 - momentum) * batch


def linear_index(shape: tuple[int, int, int, int], n: int, c: int, y: int, x: int) -> int:
    """Flat offset of element (n, c, y, x) in a C-contiguous (N, C, H, W) array."""
    _, channels, height, width = shape
    return ((n * channels + c) * height + y) * width + x


@dataclass
class ConvLayer:
    """3x3 convolution parameters: weights (out, in, 3, 3) and per-output bias."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights)
        if w.ndim != 4 or w.shape[2:] != (KERNEL, KERNEL):
            raise ContractError(f"conv weights must be (out, in, {KERNEL}, {KERNEL}), got {w.shape}")
        b = np.ascontiguousarray(self.bias)
        if b.shape != (w.shape[0],):
            raise ContractError(f"conv bias must have shape ({w.shape[0]},), got {b.shape}")
        self.weights = w
        self.bias = b

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    def astype(self, dtype) -> "ConvLayer":
        return ConvLayer(self.weights.astype(dtype), self.bias.astype(dtype))


@dataclass
class BatchNormLayer:
    """Per-channel batch normalization parameters and running statistics."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = BN_EPSILON
    momentum: float = BN_MOMENTUM

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ContractError("batchnorm epsilon must be > 0")
        for name in ("gamma", "beta", "running_mean", "running_var"):
            arr = np.ascontiguousarray(getattr(self, name))
            if arr.ndim != 1 or arr.shape != np.asarray(self.gamma).shape:
                raise ContractError(f"batchnorm {name} must be 1-D and channel-sized")
            setattr(self, name, arr)
        if np.any(self.running_var + self.epsilon <= 0):
            raise ContractError("running_var + epsilon must be positive for every channel")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    def astype(self, dtype) -> "BatchNormLayer":
        return BatchNormLayer(
            self.gamma.astype(dtype), self.beta.astype(dtype),
            self.running_mean.astype(dtype), self.running_var.astype(dtype),
            self.epsilon, self.momentum,
        )


@dataclass
class BatchStats:
    """Train-mode batch statistics cached for the backward pass."""

    mean: np.ndarray
    var: np.ndarray
    x_hat: np.ndarray = field(repr=False)


def _check_4d(x: np.ndarray, name: str = "input") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 4:
        raise ContractError(f"{name} must be a 4-axis (batch, channel, height, width) array, got ndim={x.ndim}")
    return x


def _im2col(x_padded: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """All 3x3 patches of a padded (N, C, H+2, W+2) array as (N, C*9, out_h*out_w)."""
    n, c = x_padded.shape[:2]
    sn, sc, sh, sw = x_padded.strides
    patches = np.lib.stride_tricks.as_strided(
        x_padded,
        shape=(n, c, KERNEL, KERNEL, out_h, out_w),
        strides=(sn, sc, sh, sw, sh, sw),
        writeable=False,
    )
    return patches.reshape(n, c * KERNEL * KERNEL, out_h * out_w)


def _pad(x: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    out = np.zeros((n, c, h + 2 * PAD, w + 2 * PAD), dtype=x.dtype)
    out[:, :, PAD:-PAD, PAD:-PAD] = x
    return out


def _conv_raw(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Same-padding 3x3 correlation of x with weights (out, in, 3, 3), no bias."""
    n, _, h, w = x.shape
    cols = _im2col(_pad(x), h, w)
    out = np.matmul(weights.reshape(weights.shape[0], -1), cols)
    return out.reshape(n, weights.shape[0], h, w)


def conv2d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """3x3 / stride-1 / zero-pad-1 convolution; spatial size is preserved."""
    x = _check_4d(x)
    if x.shape[1] != layer.in_channels:
        raise ContractError(
            f"conv input has {x.shape[1]} channels, layer expects {layer.in_channels}")
    out = _conv_raw(x, layer.weights)
    out += layer.bias.reshape(1, -1, 1, 1)
    return out


def conv2d_backward(
    x: np.ndarray, layer: ConvLayer, grad_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of sum(grad_out * conv2d_forward(x, layer)) w.r.t. x, weights, bias."""
    x = _check_4d(x)
    grad_out = _check_4d(grad_out, "grad_out")
    n, c, h, w = x.shape
    if x.shape[1] != layer.in_channels:
        raise ContractError(
            f"conv input has {x.shape[1]} channels, layer expects {layer.in_channels}")
    if grad_out.shape != (n, layer.out_channels, h, w):
        raise ContractError(
            f"grad_out shape {grad_out.shape} does not match output shape "
            f"{(n, layer.out_channels, h, w)}")

    grad_bias = grad_out.sum(axis=(0, 2, 3))

    # dL/dW[o, i, ki, kj] = sum_{n, y, x} x_padded[n, i, y+ki, x+kj] * grad_out[n, o, y, x]
    cols = _im2col(_pad(x), h, w)                       # (n, c*9, h*w)
    go = grad_out.reshape(n, layer.out_channels, h * w)
    grad_weights = np.matmul(go, cols.transpose(0, 2, 1)).sum(axis=0)
    grad_weights = grad_weights.reshape(layer.weights.shape)

    # Adjoint of same-padding correlation: correlate grad_out with the
    # spatially flipped, in/out-transposed kernel bank.
    w_adj = layer.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    grad_input = _conv_raw(grad_out, np.ascontiguousarray(w_adj))

    return grad_input, grad_weights, grad_bias


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x), 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Masks the gradient where the forward input was <= 0 (derivative at 0 is 0)."""
    return np.asarray(grad_out) * (np.asarray(x) > 0)


def batchnorm_forward(
    x: np.ndarray, layer: BatchNormLayer, train: bool,
) -> tuple[np.ndarray, BatchStats | None]:
    """Normalize per channel.

    Train mode normalizes by the batch mean and biased variance over
    (batch, height, width), updates the layer's running statistics in place
    via ``running = momentum * running + (1 - momentum) * batch``, and
    returns the cached batch statistics for the backward pass. Infer mode
    uses the stored running statistics and returns ``None`` stats.
    """
    x = _check_4d(x)
    if x.shape[1] != layer.channels:
        raise ContractError(
            f"batchnorm input has {x.shape[1]} channels, layer expects {layer.channels}")
    gamma = layer.gamma.reshape(1, -1, 1, 1)
    beta = layer.beta.reshape(1, -1, 1, 1)

    if not train:
        inv_std = 1.0 / np.sqrt(layer.running_var + layer.epsilon)
        x_hat = (x - layer.running_mean.reshape(1, -1, 1, 1)) * inv_std.reshape(1, -1, 1, 1)
        return gamma * x_hat + beta, None

    n, _, h, w = x.shape
    if n * h * w < 2:
        raise ContractError("train-mode batchnorm needs at least 2 values per channel")
    mean = x.mean(axis=(0, 2, 3))
    var = x.var(axis=(0, 2, 3))
    x_hat = (x - mean.reshape(1, -1, 1, 1)) / np.sqrt(var + layer.epsilon).reshape(1, -1, 1, 1)

    m = layer.momentum
    layer.running_mean = m * layer.running_mean + (1.0 - m) * mean
    layer.running_var = m * layer.running_var + (1.0 - m) * var

    return gamma * x_hat + beta, BatchStats(mean=mean, var=var, x_hat=x_hat)


def batchnorm_backward(
    x: np.ndarray, layer: BatchNormLayer, stats: BatchStats, grad_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Train-mode gradients w.r.t. input, gamma, beta.

    Differentiates through the batch statistics, so the input gradient
    carries the mean/variance coupling terms.
    """
    x = _check_4d(x)
    grad_out = _check_4d(grad_out, "grad_out")
    n, _, h, w = x.shape
    m = n * h * w
    inv_std = 1.0 / np.sqrt(stats.var + layer.epsilon)

    grad_gamma = (grad_out * stats.x_hat).sum(axis=(0, 2, 3))
    grad_beta = grad_out.sum(axis=(0, 2, 3))

    dx_hat = grad_out * layer.gamma.reshape(1, -1, 1, 1)
    sum_dx_hat = dx_hat.sum(axis=(0, 2, 3)).reshape(1, -1, 1, 1)
    sum_dx_hat_xhat = (dx_hat * stats.x_hat).sum(axis=(0, 2, 3)).reshape(1, -1, 1, 1)
    grad_input = (inv_std.reshape(1, -1, 1, 1) / m) * (
        m * dx_hat - sum_dx_hat - stats.x_hat * sum_dx_hat_xhat
    )
    return grad_input, grad_gamma, grad_beta


def batchnorm_fold(conv: ConvLayer, bn: BatchNormLayer) -> ConvLayer:
    """Absorb inference-mode batch normalization into the preceding convolution.

    Returns a ConvLayer f with conv2d_forward(x, f) equal to
    batchnorm_forward(conv2d_forward(x, conv), bn, train=False) for all x.
    """
    if bn.channels != conv.out_channels:
        raise ContractError(
            f"batchnorm has {bn.channels} channels, conv produces {conv.out_channels}")
    scale = bn.gamma / np.sqrt(bn.running_var + bn.epsilon)
    weights = conv.weights * scale.reshape(-1, 1, 1, 1)
    bias = (conv.bias - bn.running_mean) * scale + bn.beta
    return ConvLayer(weights, bias)

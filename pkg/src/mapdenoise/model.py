"""The full map-conditioned denoising network.

Layout: the even-sized noisy image is rearranged to half resolution with
:func:`~mapdenoise.shuffle.space_to_depth` (4C channels for a C-channel
image), the per-pixel noise level map is bilinearly downsampled to the same
half resolution and concatenated as one extra channel, and the stack of 3x3
convolutions runs on that (4C + 1)-channel tensor. The first layer is
Conv+ReLU, middle layers are Conv+BN+ReLU, the last is a plain Conv back to
4C channels, and depth_to_space restores full resolution. The network
predicts the clean image directly (no residual path).

Parameters travel as a :class:`ParameterSet`; :func:`backward` returns
gradients in a ParameterSet of identical shape so optimizers can walk the
two structures in lockstep. Model files are a short text header followed by
raw little-endian parameter blobs; see :func:`save_model`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, DataError, TrainingError
from .nn import (
    BatchNormLayer,
    ConvLayer,
    batchnorm_backward,
    batchnorm_fold,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    relu_backward,
    relu_forward,
)
from .noise import NoiseLevelMap
from .shuffle import depth_to_space, space_to_depth

MODEL_MAGIC = "MDNZ1"

_DTYPE_TAGS = {"f8": np.float64, "f4": np.float32}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    ``in_channels`` is the image channel count C (1 grayscale, 3 color); the
    convolution stack itself runs on 4C + map_channels inputs because of the
    factor-2 rearrangement. Presets: :meth:`grayscale` (15 layers, 64
    channels) and :meth:`color` (12 layers, 96 channels).
    """

    num_layers: int
    num_channels: int
    in_channels: int = 1
    factor: int = 2
    map_channels: int = 1

    def __post_init__(self):
        if self.num_layers < 1:
            raise ContractError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.num_channels < 1:
            raise ContractError("num_channels must be >= 1")
        if self.in_channels < 1:
            raise ContractError("in_channels must be >= 1")
        if self.factor < 1:
            raise ContractError("factor must be >= 1")
        if self.map_channels < 1:
            raise ContractError("map_channels must be >= 1")

    @classmethod
    def grayscale(cls) -> "ModelConfig":
        return cls(num_layers=15, num_channels=64, in_channels=1)

    @classmethod
    def color(cls) -> "ModelConfig":
        return cls(num_layers=12, num_channels=96, in_channels=3)

    @property
    def stack_in_channels(self) -> int:
        """Channels entering the first conv: 4C + 1 for the factor-2 default."""
        return self.in_channels * self.factor ** 2 + self.map_channels

    @property
    def stack_out_channels(self) -> int:
        """Channels leaving the last conv: 4C for the factor-2 default."""
        return self.in_channels * self.factor ** 2


def receptive_field(config: ModelConfig) -> int:
    """Receptive field in original-image pixels.

    Each 3x3 / stride-1 layer grows the sub-image receptive field by 2, so a
    stack of L layers sees 2L + 1 sub-image pixels, and mapping back through
    the factor-f rearrangement scales that by f: the grayscale preset gives
    2 * (2 * 15 + 1) = 62 and the same depth without rearrangement gives 31.
    """
    return config.factor * (2 * config.num_layers + 1)


@dataclass
class ParameterSet:
    """Ordered conv (+ optional BN) layers plus the config they realize.

    Unmerged sets carry a BatchNormLayer on every middle layer and None on
    the first and last; merged sets carry None everywhere. Shapes are fully
    determined by the config and validated on construction.
    """

    layers: list[tuple[ConvLayer, BatchNormLayer | None]]
    config: ModelConfig
    merged: bool = False

    def __post_init__(self):
        cfg = self.config
        if len(self.layers) != cfg.num_layers:
            raise ContractError(
                f"expected {cfg.num_layers} layers, got {len(self.layers)}")
        last = cfg.num_layers - 1
        for i, (conv, bn) in enumerate(self.layers):
            want_in = cfg.stack_in_channels if i == 0 else cfg.num_channels
            want_out = cfg.stack_out_channels if i == last else cfg.num_channels
            if conv.in_channels != want_in or conv.out_channels != want_out:
                raise ContractError(
                    f"layer {i}: conv is {conv.in_channels}->{conv.out_channels}, "
                    f"config requires {want_in}->{want_out}")
            middle = 0 < i < last
            if bn is not None and (not middle or self.merged):
                raise ContractError(f"layer {i} must not carry batch normalization")
            if bn is None and middle and not self.merged:
                raise ContractError(f"unmerged layer {i} must carry batch normalization")
            if bn is not None and bn.channels != conv.out_channels:
                raise ContractError(
                    f"layer {i}: batchnorm has {bn.channels} channels, conv produces "
                    f"{conv.out_channels}")

    @property
    def dtype(self) -> np.dtype:
        return self.layers[0][0].weights.dtype

    def astype(self, dtype) -> "ParameterSet":
        layers = [
            (conv.astype(dtype), None if bn is None else bn.astype(dtype))
            for conv, bn in self.layers
        ]
        return ParameterSet(layers, self.config, self.merged)

    def copy(self) -> "ParameterSet":
        return self.astype(self.dtype)


def learnable_arrays(params: ParameterSet) -> list[tuple[str, np.ndarray]]:
    """Flat named view of the trainable arrays, in a fixed walk order.

    BN running statistics are excluded: they are updated by train-mode
    forward passes, not by gradient descent.
    """
    out = []
    for i, (conv, bn) in enumerate(params.layers):
        out.append((f"layer{i}.weights", conv.weights))
        out.append((f"layer{i}.bias", conv.bias))
        if bn is not None:
            out.append((f"layer{i}.gamma", bn.gamma))
            out.append((f"layer{i}.beta", bn.beta))
    return out


def rebuild_with_arrays(params: ParameterSet, arrays: list[np.ndarray]) -> ParameterSet:
    """Inverse of :func:`learnable_arrays`: same structure, new values.

    BN running statistics and hyperparameters are carried over unchanged.
    """
    it = iter(arrays)
    layers: list[tuple[ConvLayer, BatchNormLayer | None]] = []
    for conv, bn in params.layers:
        new_conv = ConvLayer(next(it).reshape(conv.weights.shape), next(it))
        new_bn = None
        if bn is not None:
            new_bn = BatchNormLayer(
                next(it), next(it), bn.running_mean, bn.running_var,
                bn.epsilon, bn.momentum)
        layers.append((new_conv, new_bn))
    leftovers = sum(1 for _ in it)
    if leftovers:
        raise ContractError(f"{leftovers} extra arrays do not fit the parameter structure")
    return ParameterSet(layers, params.config, params.merged)


# -- forward / backward -------------------------------------------------------

@dataclass
class _LayerCache:
    x_in: np.ndarray = field(repr=False)
    conv_out: np.ndarray = field(repr=False)
    stats: object = None
    pre_relu: np.ndarray | None = field(default=None, repr=False)


def _resolve_map(noise_map, batch: int, spatial: tuple[int, int], factor: int) -> np.ndarray:
    """Normalize the accepted map forms to a (batch, 1, H/f, W/f) array.

    Accepts a NoiseLevelMap or a bare array at full resolution (H, W) or
    (batch, H, W), or already downsampled at (H/f, W/f) / (batch, H/f, W/f).
    Full-resolution input is bilinearly downsampled (factor-f block mean).
    """
    h, w = spatial
    half = (h // factor, w // factor)

    if isinstance(noise_map, NoiseLevelMap):
        values = noise_map.values
    else:
        values = np.asarray(noise_map, dtype=np.float64)
    if values.ndim == 2:
        values = values[None, :, :]
        per_sample = False
    elif values.ndim == 3:
        per_sample = True
    else:
        raise ContractError(f"noise map must have 2 or 3 axes, got {values.ndim}")
    if per_sample and values.shape[0] != batch:
        raise ContractError(
            f"per-sample map batch {values.shape[0]} does not match image batch {batch}")

    if values.shape[1:] == (h, w):
        b = values.shape[0]
        values = values.reshape(b, half[0], factor, half[1], factor).mean(axis=(2, 4))
    elif values.shape[1:] != half:
        raise ContractError(
            f"map spatial dims {values.shape[1:]} match neither image dims {(h, w)} "
            f"nor their downsampled size {half}")

    if values.shape[0] == 1 and batch > 1:
        values = np.broadcast_to(values, (batch,) + half)
    return values[:, None, :, :]


def _run_stack(
    params: ParameterSet, x: np.ndarray, train: bool, keep: bool,
) -> tuple[np.ndarray, list[_LayerCache]]:
    caches: list[_LayerCache] = []
    last = len(params.layers) - 1
    for i, (conv, bn) in enumerate(params.layers):
        x_in = x
        z = conv2d_forward(x_in, conv)
        stats = None
        if bn is not None:
            z_bn, stats = batchnorm_forward(z, bn, train)
        else:
            z_bn = z
        if i < last:
            x = relu_forward(z_bn)
            pre_relu = z_bn
        else:
            x = z_bn
            pre_relu = None
        if train and not np.all(np.isfinite(x)):
            raise TrainingError(f"non-finite activation after layer {i}")
        if keep:
            caches.append(_LayerCache(x_in=x_in, conv_out=z, stats=stats, pre_relu=pre_relu))
    return x, caches


def _stack_input(params: ParameterSet, noisy: np.ndarray, noise_map) -> np.ndarray:
    cfg = params.config
    noisy = np.asarray(noisy)
    if noisy.ndim != 4:
        raise ContractError(f"noisy input must be 4-axis, got ndim={noisy.ndim}")
    n, c, h, w = noisy.shape
    if c != cfg.in_channels:
        raise ContractError(f"input has {c} channels, model expects {cfg.in_channels}")
    if h % cfg.factor or w % cfg.factor:
        raise ContractError(
            f"spatial dims ({h}, {w}) must be divisible by {cfg.factor}; "
            "use pad_to_even first")
    sub = space_to_depth(noisy, cfg.factor)
    m = _resolve_map(noise_map, n, (h, w), cfg.factor).astype(noisy.dtype, copy=False)
    return np.concatenate([sub, m], axis=1)


def forward(params: ParameterSet, noisy, noise_map, train: bool = False) -> np.ndarray:
    """Denoise: returns the estimate of the clean image, same shape as noisy.

    ``train=True`` switches batch normalization to batch statistics and
    updates its running statistics in place (one EMA step per call).
    """
    stacked = _stack_input(params, noisy, noise_map)
    out, _ = _run_stack(params, stacked, train=train, keep=False)
    return depth_to_space(out, params.config.factor)


def backward(params: ParameterSet, noisy, noise_map, target) -> tuple[float, ParameterSet]:
    """Loss and parameter gradients for one batch.

    Runs a train-mode forward (batch statistics; running stats get their EMA
    update as a side effect), computes

        loss = sum((output - target)^2) / (2 * batch)

    and backpropagates. Gradients come back as a ParameterSet of identical
    structure; BN slots in it hold (d gamma, d beta) with zeroed running
    statistics, which optimizers must ignore.
    """
    noisy = np.asarray(noisy)
    target = np.asarray(target)
    if target.shape != noisy.shape:
        raise ContractError(
            f"target shape {target.shape} does not match input shape {noisy.shape}")
    factor = params.config.factor
    stacked = _stack_input(params, noisy, noise_map)
    out_sub, caches = _run_stack(params, stacked, train=True, keep=True)
    out = depth_to_space(out_sub, factor)

    batch = noisy.shape[0]
    diff = out - target
    loss = float(np.sum(diff * diff)) / (2.0 * batch)
    if not np.isfinite(loss):
        raise TrainingError("non-finite loss")

    g = space_to_depth(diff / batch, factor)
    grad_layers: list[tuple[ConvLayer, BatchNormLayer | None]] = []
    for i in reversed(range(len(params.layers))):
        conv, bn = params.layers[i]
        cache = caches[i]
        if cache.pre_relu is not None:
            g = relu_backward(cache.pre_relu, g)
        bn_grad = None
        if bn is not None:
            g, d_gamma, d_beta = batchnorm_backward(cache.conv_out, bn, cache.stats, g)
            zeros = np.zeros_like(bn.running_mean)
            bn_grad = BatchNormLayer(
                d_gamma, d_beta, zeros, zeros.copy(), bn.epsilon, bn.momentum)
        g, d_weights, d_bias = conv2d_backward(cache.x_in, conv, g)
        grad_layers.append((ConvLayer(d_weights, d_bias), bn_grad))
    grad_layers.reverse()
    return loss, ParameterSet(grad_layers, params.config, params.merged)


def merge_batchnorm(params: ParameterSet) -> ParameterSet:
    """Fold every BN layer into its convolution; infer outputs are preserved.

    The result has no BN anywhere and forwards slightly faster. Merging an
    already merged set is a contract violation.
    """
    if params.merged:
        raise ContractError("parameters are already merged")
    layers = []
    for conv, bn in params.layers:
        if bn is None:
            layers.append((ConvLayer(conv.weights.copy(), conv.bias.copy()), None))
        else:
            layers.append((batchnorm_fold(conv, bn), None))
    return ParameterSet(layers, params.config, merged=True)


def pad_to_even(image) -> tuple[np.ndarray, tuple[int, int]]:
    """Reflect-pad bottom/right so both spatial dims are even.

    Returns the padded tensor and a (pad_bottom, pad_right) crop spec;
    :func:`crop_padding` undoes it. Even input comes back unchanged with an
    empty (0, 0) crop. Singleton dims fall back to edge padding, since there
    is nothing to reflect.
    """
    image = np.asarray(image)
    if image.ndim != 4:
        raise ContractError(f"expected 4-axis image tensor, got ndim={image.ndim}")
    pad_bottom = image.shape[2] % 2
    pad_right = image.shape[3] % 2
    if not pad_bottom and not pad_right:
        return image, (0, 0)
    out = image
    if pad_bottom:
        mode = "reflect" if out.shape[2] > 1 else "edge"
        out = np.pad(out, ((0, 0), (0, 0), (0, 1), (0, 0)), mode=mode)
    if pad_right:
        mode = "reflect" if out.shape[3] > 1 else "edge"
        out = np.pad(out, ((0, 0), (0, 0), (0, 0), (0, 1)), mode=mode)
    return out, (pad_bottom, pad_right)


def crop_padding(image: np.ndarray, crop_spec: tuple[int, int]) -> np.ndarray:
    """Remove the rows/cols added by :func:`pad_to_even`."""
    pad_bottom, pad_right = crop_spec
    h = image.shape[2] - pad_bottom
    w = image.shape[3] - pad_right
    return image[:, :, :h, :w]


def denoise(params: ParameterSet, noisy, noise_map) -> np.ndarray:
    """Infer-mode forward that tolerates odd image sizes.

    Takes the noise map at full image resolution (NoiseLevelMap or bare
    (H, W) array), pads image and map to even dims when needed, and crops
    the result back.
    """
    noisy = np.asarray(noisy)
    if noisy.ndim != 4:
        raise ContractError(f"noisy input must be 4-axis, got ndim={noisy.ndim}")
    values = noise_map.values if isinstance(noise_map, NoiseLevelMap) else np.asarray(noise_map)
    if values.ndim != 2 or values.shape != noisy.shape[2:]:
        raise ContractError(
            f"denoise needs a full-resolution map; got {values.shape} for image "
            f"dims {noisy.shape[2:]}")
    padded, crop = pad_to_even(noisy)
    if crop != (0, 0):
        values = np.pad(values, ((0, crop[0]), (0, crop[1])), mode="edge")
    return crop_padding(forward(params, padded, values), crop)


# -- model files --------------------------------------------------------------

def _dtype_tag(dtype: np.dtype) -> str:
    for tag, dt in _DTYPE_TAGS.items():
        if dtype == dt:
            return tag
    raise ContractError(f"unsupported parameter dtype {dtype}; use float64 or float32")


def save_model(path, params: ParameterSet) -> None:
    """Write the versioned model container.

    Byte layout: an ASCII header of ``key=value`` lines between the magic
    line and ``end``, then the parameter arrays as raw little-endian blobs
    in layer order (weights, bias, then gamma/beta/running_mean/running_var
    for layers that carry BN). load_model(save_model(p)) round-trips
    bitwise.
    """
    cfg = params.config
    tag = _dtype_tag(params.dtype)
    header = (
        f"{MODEL_MAGIC}\n"
        f"layers={cfg.num_layers}\n"
        f"channels={cfg.num_channels}\n"
        f"in_channels={cfg.in_channels}\n"
        f"factor={cfg.factor}\n"
        f"map_channels={cfg.map_channels}\n"
        f"merged={int(params.merged)}\n"
        f"dtype={tag}\n"
        "end\n"
    )
    le = np.dtype(params.dtype).newbyteorder("<")
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for conv, bn in params.layers:
            f.write(np.ascontiguousarray(conv.weights, dtype=le).tobytes())
            f.write(np.ascontiguousarray(conv.bias, dtype=le).tobytes())
            if bn is not None:
                for arr in (bn.gamma, bn.beta, bn.running_mean, bn.running_var):
                    f.write(np.ascontiguousarray(arr, dtype=le).tobytes())


def load_model(path) -> ParameterSet:
    """Read a model container written by :func:`save_model`."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read model file {path}: {e}") from e

    newline = blob.find(b"\n")
    if newline < 0 or blob[:newline].decode("ascii", "replace") != MODEL_MAGIC:
        raise DataError(f"{path}: not a model file (bad magic)")
    fields: dict[str, str] = {}
    pos = newline + 1
    while True:
        newline = blob.find(b"\n", pos)
        if newline < 0:
            raise DataError(f"{path}: truncated header")
        line = blob[pos:newline].decode("ascii", "replace")
        pos = newline + 1
        if line == "end":
            break
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"{path}: malformed header line {line!r}")
        fields[key] = value

    try:
        config = ModelConfig(
            num_layers=int(fields["layers"]),
            num_channels=int(fields["channels"]),
            in_channels=int(fields["in_channels"]),
            factor=int(fields["factor"]),
            map_channels=int(fields["map_channels"]),
        )
        merged = bool(int(fields["merged"]))
        dtype = _DTYPE_TAGS[fields["dtype"]]
    except (KeyError, ValueError, ContractError) as e:
        raise DataError(f"{path}: invalid header: {e}") from e

    le = np.dtype(dtype).newbyteorder("<")
    itemsize = le.itemsize

    def take(shape: tuple[int, ...]) -> np.ndarray:
        nonlocal pos
        count = int(np.prod(shape))
        end = pos + count * itemsize
        if end > len(blob):
            raise DataError(f"{path}: truncated parameter data")
        arr = np.frombuffer(blob, dtype=le, count=count, offset=pos).astype(dtype)
        pos = end
        return arr.reshape(shape)

    last = config.num_layers - 1
    layers: list[tuple[ConvLayer, BatchNormLayer | None]] = []
    for i in range(config.num_layers):
        c_in = config.stack_in_channels if i == 0 else config.num_channels
        c_out = config.stack_out_channels if i == last else config.num_channels
        conv = ConvLayer(take((c_out, c_in, 3, 3)), take((c_out,)))
        bn = None
        if 0 < i < last and not merged:
            bn = BatchNormLayer(take((c_out,)), take((c_out,)), take((c_out,)), take((c_out,)))
        layers.append((conv, bn))
    if pos != len(blob):
        raise DataError(f"{path}: {len(blob) - pos} trailing bytes after parameters")
    return ParameterSet(layers, config, merged)

"""Parameter initialization: orthogonal conv filters, neutral BN and biases."""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .model import ModelConfig, ParameterSet
from .nn import BatchNormLayer, ConvLayer
from .rng import make_rng


def orthogonal_init(
    shape: tuple[int, int, int, int], gain: float = 1.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Filter bank whose flattened (out, in*k*k) matrix is orthogonal.

    If out <= in*k*k the rows are orthonormal (W Wt = gain^2 I); otherwise
    the columns are (Wt W = gain^2 I). Built by QR-factorizing a Gaussian
    matrix and fixing signs from R's diagonal, which makes the draw uniform
    over the orthogonal group.
    """
    if rng is None:
        rng = make_rng(0)
    out, c_in, kh, kw = shape
    cols = c_in * kh * kw
    if out < 1 or cols < 1:
        raise ContractError(f"degenerate filter shape {shape}")
    a = rng.standard_normal((out, cols))
    if out < cols:
        a = a.T
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if out < cols:
        q = q.T
    return np.ascontiguousarray((gain * q).reshape(shape))


def default_init(config: ModelConfig, seed: int = 0) -> ParameterSet:
    """Fresh untrained parameters for a config.

    Conv weights are orthogonally initialized with gain 1 (one shared RNG,
    consumed in layer order, so the result is a pure function of the seed);
    biases start at 0, BN at gamma 1 / beta 0 with running stats (0, 1).
    """
    rng = make_rng(seed)
    last = config.num_layers - 1
    layers: list[tuple[ConvLayer, BatchNormLayer | None]] = []
    for i in range(config.num_layers):
        c_in = config.stack_in_channels if i == 0 else config.num_channels
        c_out = config.stack_out_channels if i == last else config.num_channels
        weights = orthogonal_init((c_out, c_in, 3, 3), gain=1.0, rng=rng)
        conv = ConvLayer(weights, np.zeros(c_out))
        bn = None
        if 0 < i < last:
            bn = BatchNormLayer(
                np.ones(c_out), np.zeros(c_out), np.zeros(c_out), np.ones(c_out))
        layers.append((conv, bn))
    return ParameterSet(layers, config, merged=False)

"""Reversible downsampling: space-to-depth and its exact inverse.

A factor-f space_to_depth moves each f x f pixel block into f*f channels at
1/f resolution. Sub-image ordering is fixed as channel-major, then
(row-offset, col-offset) row-major: output channel ``c*f*f + i*f + j``
holds the source pixels at rows congruent to i and columns congruent to j
(mod f) of input channel c. depth_to_space applies the same convention in
reverse, so both directions are pure permutations and round-trip bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError


def space_to_depth(x: np.ndarray, factor: int = 2) -> np.ndarray:
    """(N, C, H, W) -> (N, C*factor^2, H/factor, W/factor)."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ContractError(f"expected 4-axis array, got ndim={x.ndim}")
    if factor < 1:
        raise ContractError(f"factor must be >= 1, got {factor}")
    n, c, h, w = x.shape
    if h % factor or w % factor:
        raise ContractError(
            f"spatial dims ({h}, {w}) not divisible by factor {factor}; pad first")
    x = x.reshape(n, c, h // factor, factor, w // factor, factor)
    x = x.transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(x.reshape(n, c * factor * factor, h // factor, w // factor))


def depth_to_space(x: np.ndarray, factor: int = 2) -> np.ndarray:
    """Exact inverse of :func:`space_to_depth` under the same ordering."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ContractError(f"expected 4-axis array, got ndim={x.ndim}")
    if factor < 1:
        raise ContractError(f"factor must be >= 1, got {factor}")
    n, c, h, w = x.shape
    if c % (factor * factor):
        raise ContractError(
            f"channel count {c} not divisible by factor^2 = {factor * factor}")
    out_c = c // (factor * factor)
    x = x.reshape(n, out_c, factor, factor, h, w)
    x = x.transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(x.reshape(n, out_c, h * factor, w * factor))

"""PSNR and the two evaluation protocols built on it.

PSNR is computed on the continuous [0, 1] tensors by default; pass
``quantize=True`` to snap both inputs to 8-bit levels first, which mirrors
evaluation on saved images. Identical inputs give the +inf sentinel,
rendered as the string ``inf`` in text output.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractError
from .model import ParameterSet, denoise
from .noise import NoiseLevelMap, NoiseSpec, add_awgn, quantize_unit, uniform_map

PEAK = 1.0


def psnr(reference, test, quantize: bool = False) -> float:
    """10 * log10(peak^2 / MSE) in dB over all pixels and channels."""
    reference = np.asarray(reference, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if reference.shape != test.shape:
        raise ContractError(
            f"psnr needs equal shapes, got {reference.shape} vs {test.shape}")
    if quantize:
        reference = quantize_unit(reference)
        test = quantize_unit(test)
    mse = float(np.mean((reference - test) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def format_db(value: float) -> str:
    """Decibel value for text reports; the sentinel prints as ``inf``."""
    return "inf" if math.isinf(value) else f"{value:.2f}"


def sensitivity_sweep(
    params: ParameterSet,
    clean: np.ndarray,
    true_sigma: float,
    input_sigmas: list[float],
    seed: int = 0,
    clipped: bool = False,
    quantize: bool = False,
) -> list[tuple[float, float]]:
    """Denoise one fixed corruption under a range of assumed noise levels.

    The clean image is corrupted once at ``true_sigma`` (uniform map, fixed
    seed); each entry of ``input_sigmas`` then drives a separate denoising
    pass with a uniform map at that level. Returns (input_sigma, psnr)
    pairs in input order.
    """
    clean = np.asarray(clean)
    h, w = clean.shape[2], clean.shape[3]
    noisy = add_awgn(clean, NoiseSpec(uniform_map(h, w, true_sigma), clipped=clipped, seed=seed))
    rows = []
    for sigma in input_sigmas:
        restored = denoise(params, noisy, uniform_map(h, w, sigma))
        rows.append((float(sigma), psnr(clean, restored, quantize=quantize)))
    return rows


def variant_noise_report(
    params: ParameterSet,
    clean: np.ndarray,
    true_map: NoiseLevelMap,
    seed: int = 0,
    quantize: bool = False,
) -> tuple[float, float]:
    """PSNR with the matched map vs a uniform map at the true map's mean.

    The same corrupted image is denoised twice; the gap quantifies what
    spatial noise information buys on non-uniform corruption.
    """
    clean = np.asarray(clean)
    h, w = clean.shape[2], clean.shape[3]
    noisy = add_awgn(clean, NoiseSpec(true_map, seed=seed))
    matched = denoise(params, noisy, true_map)
    flat = denoise(params, noisy, uniform_map(h, w, true_map.mean_sigma()))
    return (
        psnr(clean, matched, quantize=quantize),
        psnr(clean, flat, quantize=quantize),
    )


def sweep_csv(rows: list[tuple[float, float]]) -> str:
    """CSV with an ``input_sigma,psnr`` header; sentinel spelled ``inf``."""
    out = ["input_sigma,psnr"]
    for sigma, value in rows:
        out.append(f"{sigma:g},{format_db(value)}")
    return "\n".join(out) + "\n"


def sweep_table(rows: list[tuple[float, float]]) -> str:
    """Fixed-width two-column text table of a sweep."""
    out = [f"{'sigma':>8}  {'psnr_db':>8}"]
    for sigma, value in rows:
        out.append(f"{sigma:>8g}  {format_db(value):>8}")
    return "\n".join(out) + "\n"

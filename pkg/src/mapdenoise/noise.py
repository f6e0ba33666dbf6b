"""Synthetic corruption: Gaussian noise fields and per-pixel noise level maps.

A noise level map is a 2-D field of per-pixel standard deviations stored in
sigma/255 units so that it shares the [0, 1] scale of pixel values. Noisy
images are produced as ``y = x + v1 * map`` where v1 is unit-variance
Gaussian noise; in clipped mode y is additionally clamped to [0, 1] and
quantized to 8-bit levels, which biases the noise away from zero mean at
the range extremes.

All sampling uses numpy's Philox counter-based generator so that a given
seed yields bitwise identical noise everywhere; golden tests pin this.

File formats (byte-exact):
  * ``.nlm``  -- ASCII header ``NLM1\\n<width> <height>\\n`` followed by
    width*height little-endian float32 values, row-major, in sigma/255 units.
  * PNG export/import for visualization scales by 255/75 so sigma = 75 maps
    to white; values quantize to 8 bits on export.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, DataError
from .rng import make_rng

SIGMA_MAX = 75.0  # upper end of the supported noise range, in 8-bit units
SIGMA_SCALE = 255.0  # map values are sigma / SIGMA_SCALE

_NLM_MAGIC = b"NLM1"


@dataclass(frozen=True)
class RegionAnchor:
    """A user-placed (row, col) position with its estimated sigma in [0, 75]."""

    row: int
    col: int
    sigma: float

    def __post_init__(self):
        if not (0.0 <= self.sigma <= SIGMA_MAX):
            raise ContractError(
                f"anchor sigma must be in [0, {SIGMA_MAX:g}], got {self.sigma}")


@dataclass
class NoiseLevelMap:
    """Per-pixel sigma field in sigma/255 units; ``kind`` records provenance."""

    values: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ContractError(f"noise map must be 2-D, got ndim={v.ndim}")
        if np.any(v < 0):
            raise ContractError("noise map values must be non-negative")
        self.values = v

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def mean_sigma(self) -> float:
        """Mean level in 8-bit sigma units."""
        return float(self.values.mean() * SIGMA_SCALE)


@dataclass
class NoiseSpec:
    """Recipe for one corruption: the map, clipped/un-clipped mode, RNG seed."""

    map: NoiseLevelMap
    clipped: bool = False
    seed: int = 0


def uniform_map(height: int, width: int, sigma: float) -> NoiseLevelMap:
    """Constant field with every element sigma (8-bit units)."""
    if sigma < 0:
        raise ContractError(f"sigma must be >= 0, got {sigma}")
    return NoiseLevelMap(
        np.full((height, width), sigma / SIGMA_SCALE), kind="uniform")


def gradient_map(
    height: int, width: int, sigma_lo: float, sigma_hi: float, axis: str = "x",
) -> NoiseLevelMap:
    """Linear ramp from sigma_lo to sigma_hi along ``axis`` ('x' or 'y')."""
    if sigma_lo > sigma_hi:
        raise ContractError("sigma_lo must be <= sigma_hi")
    if axis not in ("x", "y"):
        raise ContractError(f"axis must be 'x' or 'y', got {axis!r}")
    n = width if axis == "x" else height
    ramp = np.linspace(sigma_lo, sigma_hi, n) / SIGMA_SCALE
    if axis == "x":
        values = np.broadcast_to(ramp, (height, width)).copy()
    else:
        values = np.broadcast_to(ramp[:, None], (height, width)).copy()
    return NoiseLevelMap(values, kind="gradient")


def anchored_map(
    height: int, width: int, anchors: list[RegionAnchor], power: float = 2.0,
) -> NoiseLevelMap:
    """Inverse-distance-weighted interpolation over anchors.

    Exact at each anchor pixel; a single anchor degenerates to a uniform
    map. Values are clamped to [0, 75]/255.
    """
    if not anchors:
        raise ContractError("anchored_map needs at least one anchor")
    for a in anchors:
        if not (0 <= a.row < height and 0 <= a.col < width):
            raise ContractError(
                f"anchor ({a.row}, {a.col}) outside {height}x{width} image")

    if len(anchors) == 1:
        m = uniform_map(height, width, min(max(anchors[0].sigma, 0.0), SIGMA_MAX))
        return NoiseLevelMap(m.values, kind="anchored")

    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    num = np.zeros((height, width))
    den = np.zeros((height, width))
    for a in anchors:
        d2 = (rows - a.row) ** 2 + (cols - a.col) ** 2
        w = 1.0 / np.power(d2, power / 2.0, where=d2 > 0, out=np.full_like(d2, np.inf, dtype=float))
        num += w * a.sigma
        den += w
    values = num / den
    # IDW is undefined at the anchor pixels themselves; set exactly.
    for a in anchors:
        values[a.row, a.col] = a.sigma
    values = np.clip(values, 0.0, SIGMA_MAX) / SIGMA_SCALE
    return NoiseLevelMap(values, kind="anchored")


def downsample_map_bilinear(m: NoiseLevelMap, factor: int = 2) -> NoiseLevelMap:
    """Bilinear downsampling; for factor 2 this is the 2x2 block average."""
    h, w = m.shape
    if h % factor or w % factor:
        raise ContractError(
            f"map dims ({h}, {w}) not divisible by factor {factor}")
    v = m.values.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))
    return NoiseLevelMap(v, kind=m.kind)


def add_awgn(clean: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Corrupt a (N, C, H, W) image tensor as a NoiseSpec describes.

    Un-clipped (default): ``y = x + v1 * map`` with v1 ~ N(0, 1), exactly the
    continuous-valued setting used for training. Clipped: y is then clamped
    to [0, 1] and rounded to 8-bit levels (round half up), mirroring 8-bit
    quantized noisy images.
    """
    clean = np.asarray(clean)
    if clean.ndim != 4:
        raise ContractError(f"expected 4-axis image tensor, got ndim={clean.ndim}")
    if spec.map.shape != clean.shape[2:]:
        raise ContractError(
            f"map shape {spec.map.shape} does not match image spatial dims {clean.shape[2:]}")
    g = make_rng(spec.seed)
    v1 = g.standard_normal(size=clean.shape)
    noisy = clean + v1 * spec.map.values[None, None, :, :]
    if spec.clipped:
        noisy = quantize_unit(noisy)
    return noisy.astype(clean.dtype, copy=False)


def quantize_unit(x: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and snap to the 256 8-bit levels (round half up)."""
    levels = np.floor(np.clip(x, 0.0, 1.0) * 255.0 + 0.5)
    return levels / 255.0


# -- map file I/O -------------------------------------------------------------

def save_map(path, m: NoiseLevelMap) -> None:
    """Write the .nlm container (header + f32le field)."""
    h, w = m.shape
    with open(path, "wb") as f:
        f.write(_NLM_MAGIC + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(m.values.astype("<f4").tobytes())


def load_map(path) -> NoiseLevelMap:
    """Read a .nlm file written by :func:`save_map`."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read noise map {path}: {e}") from e
    buf = io.BytesIO(blob)
    if buf.readline().strip() != _NLM_MAGIC:
        raise DataError(f"{path}: not a noise map file (bad magic)")
    try:
        w, h = (int(t) for t in buf.readline().split())
    except ValueError as e:
        raise DataError(f"{path}: malformed dimension header") from e
    data = buf.read()
    if len(data) != 4 * w * h:
        raise DataError(f"{path}: expected {4 * w * h} payload bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f4").reshape(h, w).astype(np.float64)
    return NoiseLevelMap(values, kind="custom")


def map_to_png_bytes(m: NoiseLevelMap) -> bytes:
    """Grayscale PNG visualization: sigma = 75 renders white."""
    from PIL import Image

    levels = np.floor(np.clip(m.values * SIGMA_SCALE / SIGMA_MAX, 0.0, 1.0) * 255.0 + 0.5)
    img = Image.fromarray(levels.astype(np.uint8), mode="L")
    out = io.BytesIO()
    img.save(out, format="PNG")
    return out.getvalue()


def map_from_png_bytes(blob: bytes) -> NoiseLevelMap:
    """Inverse of :func:`map_to_png_bytes` up to 8-bit quantization."""
    from PIL import Image

    try:
        img = Image.open(io.BytesIO(blob))
        img.load()
    except Exception as e:
        raise DataError(f"cannot decode PNG noise map: {e}") from e
    if img.mode != "L":
        img = img.convert("L")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return NoiseLevelMap(arr * SIGMA_MAX / SIGMA_SCALE, kind="custom")

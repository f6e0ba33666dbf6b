"""Image files, dataset manifests, patch extraction, dihedral augmentation.

Images travel as (1, C, H, W) float tensors on the [0, 1] scale. Supported
containers: binary PGM (P5) and PPM (P6) with maxval 255, decoded here
directly, and 8-bit non-interlaced PNG (gray or RGB) via Pillow. Anything
else is rejected with a DataError naming the file. Saving quantizes with
round-half-up, so an 8-bit image round-trips byte-exactly through any of
the three containers.

A dataset manifest is a plain text file listing one image per line as
``path [gray|color]`` (mode defaults to gray); ``#`` starts a comment.
Relative paths are resolved against the manifest's own directory.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, DataError

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def to_bytes_scale(t: np.ndarray) -> np.ndarray:
    """[0,1] floats to uint8 with clamp and round-half-up."""
    return np.floor(np.clip(t, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


# -- PNM (PGM / PPM) ----------------------------------------------------------

def _pnm_header_tokens(blob: bytes, start: int, count: int) -> tuple[list[int], int]:
    """Read whitespace-separated integer tokens, honouring '#' comments.

    Returns the tokens and the offset one byte past the single whitespace
    character that terminates the last token (where binary data begins).
    """
    tokens: list[int] = []
    pos = start
    while len(tokens) < count:
        if pos >= len(blob):
            raise DataError("truncated header")
        ch = blob[pos]
        if ch in b" \t\r\n":
            pos += 1
        elif ch in b"#":
            eol = blob.find(b"\n", pos)
            if eol < 0:
                raise DataError("unterminated comment")
            pos = eol + 1
        elif ch in b"0123456789":
            end = pos
            while end < len(blob) and blob[end] in b"0123456789":
                end += 1
            tokens.append(int(blob[pos:end]))
            pos = end
            if len(tokens) == count:
                if pos >= len(blob) or blob[pos] not in b" \t\r\n":
                    raise DataError("missing whitespace after header")
                pos += 1
        else:
            raise DataError(f"unexpected byte {blob[pos:pos + 1]!r} in header")
    return tokens, pos


def _decode_pnm(blob: bytes) -> np.ndarray:
    magic = blob[:2]
    channels = 1 if magic == b"P5" else 3
    (width, height, maxval), pos = _pnm_header_tokens(blob, 2, 3)
    if maxval != 255:
        raise DataError(f"only maxval 255 supported, got {maxval}")
    need = width * height * channels
    payload = blob[pos:pos + need]
    if len(payload) != need:
        raise DataError(f"expected {need} pixel bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        arr = arr.reshape(height, width)[None, :, :]
    else:
        arr = arr.reshape(height, width, 3).transpose(2, 0, 1)
    return arr[None].astype(np.float64) / 255.0


def _encode_pnm(t: np.ndarray) -> bytes:
    _, c, h, w = t.shape
    u8 = to_bytes_scale(t[0])
    if c == 1:
        magic, payload = b"P5", u8[0].tobytes()
    else:
        magic, payload = b"P6", u8.transpose(1, 2, 0).tobytes()
    return magic + b"\n%d %d\n255\n" % (w, h) + payload


# -- PNG ----------------------------------------------------------------------

def _decode_png(blob: bytes, label: str) -> np.ndarray:
    from PIL import Image

    try:
        img = Image.open(io.BytesIO(blob))
        img.load()
    except Exception as e:
        raise DataError(f"{label}: cannot decode PNG: {e}") from e
    if img.info.get("interlace"):
        raise DataError(f"{label}: interlaced PNG not supported")
    if img.mode == "L":
        arr = np.asarray(img, dtype=np.float64)[None, :, :]
    elif img.mode == "RGB":
        arr = np.asarray(img, dtype=np.float64).transpose(2, 0, 1)
    else:
        raise DataError(
            f"{label}: unsupported PNG mode {img.mode!r}; need 8-bit gray or RGB")
    return arr[None] / 255.0


def encode_png(t: np.ndarray) -> bytes:
    """(1, C, H, W) tensor to 8-bit PNG bytes (mode L or RGB by channel count)."""
    from PIL import Image

    t = _check_image_tensor(t)
    u8 = to_bytes_scale(t[0])
    if t.shape[1] == 1:
        img = Image.fromarray(u8[0], mode="L")
    else:
        img = Image.fromarray(u8.transpose(1, 2, 0), mode="RGB")
    out = io.BytesIO()
    img.save(out, format="PNG")
    return out.getvalue()


def decode_image_bytes(blob: bytes, label: str = "<bytes>") -> np.ndarray:
    """Sniff the container from magic bytes and decode to a (1, C, H, W) tensor."""
    if blob[:2] in (b"P5", b"P6"):
        try:
            return _decode_pnm(blob)
        except DataError as e:
            raise DataError(f"{label}: {e}") from e
    if blob[:8] == _PNG_SIGNATURE:
        return _decode_png(blob, label)
    raise DataError(f"{label}: unrecognized image format")


def _check_image_tensor(t) -> np.ndarray:
    t = np.asarray(t)
    if t.ndim != 4 or t.shape[0] != 1 or t.shape[1] not in (1, 3):
        raise ContractError(
            f"expected a (1, C, H, W) image tensor with C in (1, 3), got shape {t.shape}")
    return t


def load_image(path) -> np.ndarray:
    """Decode a PGM/PPM/PNG file to a (1, C, H, W) tensor in [0, 1]."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read image {path}: {e}") from e
    return decode_image_bytes(blob, str(path))


def save_image(path, t) -> None:
    """Encode to the container named by the extension (.pgm/.ppm/.png)."""
    path = Path(path)
    t = _check_image_tensor(t)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        if t.shape[1] != 1:
            raise ContractError("PGM holds a single channel; use .ppm or .png for color")
        blob = _encode_pnm(t)
    elif suffix == ".ppm":
        if t.shape[1] != 3:
            raise ContractError("PPM holds three channels; use .pgm or .png for gray")
        blob = _encode_pnm(t)
    elif suffix == ".png":
        blob = encode_png(t)
    else:
        raise ContractError(f"unsupported image extension {suffix!r}")
    try:
        path.write_bytes(blob)
    except OSError as e:
        raise DataError(f"cannot write image {path}: {e}") from e


# -- manifests ----------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    mode: str  # "gray" | "color"


@dataclass
class DatasetManifest:
    """Training file list plus the sampling flags that apply to it."""

    entries: list[ManifestEntry]
    patch_size: int = 32
    clipped: bool = False
    augment: bool = True

    def __post_init__(self):
        if not self.entries:
            raise DataError("manifest lists no images")
        if self.patch_size < 2 or self.patch_size % 2:
            raise ContractError(f"patch_size must be even and >= 2, got {self.patch_size}")


def load_manifest(
    path, patch_size: int = 32, clipped: bool = False, augment: bool = True,
) -> DatasetManifest:
    """Parse a manifest file and verify every listed image exists."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}") from e
    entries: list[ManifestEntry] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) > 2:
            raise DataError(f"{path}:{lineno}: expected 'path [gray|color]', got {raw!r}")
        mode = parts[1] if len(parts) == 2 else "gray"
        if mode not in ("gray", "color"):
            raise DataError(f"{path}:{lineno}: unknown mode {mode!r}")
        img = Path(parts[0])
        if not img.is_absolute():
            img = path.parent / img
        if not img.is_file():
            raise DataError(f"{path}:{lineno}: image not found: {img}")
        entries.append(ManifestEntry(img, mode))
    return DatasetManifest(entries, patch_size=patch_size, clipped=clipped, augment=augment)


def load_manifest_images(manifest: DatasetManifest) -> list[np.ndarray]:
    """Decode every manifest entry, checking channel counts against modes."""
    images = []
    for entry in manifest.entries:
        t = load_image(entry.path)
        want = 1 if entry.mode == "gray" else 3
        if t.shape[1] != want:
            raise DataError(
                f"{entry.path}: has {t.shape[1]} channels but manifest says {entry.mode}")
        images.append(t)
    return images


# -- patches and augmentation -------------------------------------------------

def extract_patch(image: np.ndarray, top_left: tuple[int, int], size: int) -> np.ndarray:
    """Copy a size x size window; the window must lie inside the image."""
    image = np.asarray(image)
    if image.ndim != 4:
        raise ContractError(f"expected 4-axis image tensor, got ndim={image.ndim}")
    top, left = top_left
    _, _, h, w = image.shape
    if top < 0 or left < 0 or top + size > h or left + size > w:
        raise ContractError(
            f"patch {size}x{size} at ({top}, {left}) outside {h}x{w} image")
    return image[:, :, top:top + size, left:left + size].copy()


def augment8(patch: np.ndarray, k: int) -> np.ndarray:
    """k-th of the 8 dihedral transforms (rotations x optional flip); k=0 is identity."""
    if not 0 <= k <= 7:
        raise ContractError(f"augmentation index must be in 0..7, got {k}")
    out = np.asarray(patch)
    if out.ndim != 4:
        raise ContractError(f"expected 4-axis patch tensor, got ndim={out.ndim}")
    if k >= 4:
        out = out[:, :, :, ::-1]
    out = np.rot90(out, k % 4, axes=(2, 3))
    return np.ascontiguousarray(out)

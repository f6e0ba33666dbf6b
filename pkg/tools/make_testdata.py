"""Regenerate the bundled grayscale test images under testdata/.

Pulls a handful of public-domain photographs from scikit-image's sample
data, center-crops each to at most 256x256, and writes them as binary PGM
plus a training manifest. Run from the repository root:

    python3 tools/make_testdata.py

The outputs are committed, so this only needs re-running if the set
changes. clock.pgm is deliberately left out of the manifest; tests use it
as held-out evaluation data.
"""

from pathlib import Path

import numpy as np
import skimage.data

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "testdata" / "images"
TRAIN = ["camera", "coins", "moon", "page"]
HELD_OUT = ["clock"]


def center_crop(arr: np.ndarray, cap: int = 256) -> np.ndarray:
    h, w = arr.shape
    ch, cw = min(h, cap), min(w, cap)
    top, left = (h - ch) // 2, (w - cw) // 2
    return arr[top:top + ch, left:left + cw]


def write_pgm(path: Path, arr: np.ndarray) -> None:
    h, w = arr.shape
    path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + arr.astype(np.uint8).tobytes())


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name in TRAIN + HELD_OUT:
        arr = center_crop(getattr(skimage.data, name)())
        write_pgm(OUT / f"{name}.pgm", arr)
        print(f"{name}.pgm {arr.shape[1]}x{arr.shape[0]}")
    manifest = ROOT / "testdata" / "manifest.txt"
    lines = ["# bundled public-domain training images (see tools/make_testdata.py)"]
    lines += [f"images/{name}.pgm gray" for name in TRAIN]
    manifest.write_text("\n".join(lines) + "\n")
    print(f"wrote {manifest}")


if __name__ == "__main__":
    main()

"""Corrupt and restore an image with the committed toy model.

Writes clean / noisy / restored PNGs side by side into demos/out/ so the
result can be eyeballed.
"""

from pathlib import Path

from mapdenoise import NoiseSpec, add_awgn, denoise, load_model, psnr, uniform_map
from mapdenoise.data import load_image, save_image

root = Path(__file__).resolve().parents[1]
out = root / "demos" / "out"
out.mkdir(exist_ok=True)

params = load_model(root / "testdata" / "golden" / "toy.model")
clean = load_image(root / "testdata" / "images" / "clock.pgm")
h, w = clean.shape[2], clean.shape[3]

sigma = 25.0
level = uniform_map(h, w, sigma)
noisy = add_awgn(clean, NoiseSpec(level, seed=0))
restored = denoise(params, noisy, level)

save_image(out / "clock_clean.png", clean)
save_image(out / "clock_noisy.png", noisy)
save_image(out / "clock_restored.png", restored)

print(f"sigma {sigma:g}")
print(f"noisy    {psnr(clean, noisy):5.2f} dB")
print(f"restored {psnr(clean, restored):5.2f} dB")
print(f"wrote {out}/clock_*.png")

"""What the noise level input actually does at inference time.

Two small experiments with the committed toy model:

1. Corrupt at sigma 25 and denoise while telling the model a range of
   levels. Under-assuming leaves noise behind; over-assuming smooths a
   bit too much but degrades gracefully.
2. Corrupt with a spatial ramp (sigma 5 on the left to 50 on the right)
   and compare giving the model the true ramp vs its scalar mean.
"""

from pathlib import Path

from mapdenoise import gradient_map, load_model, sensitivity_sweep, variant_noise_report
from mapdenoise.data import load_image
from mapdenoise.metrics import sweep_table

root = Path(__file__).resolve().parents[1]
params = load_model(root / "testdata" / "golden" / "toy.model")
clean = load_image(root / "testdata" / "images" / "clock.pgm")
h, w = clean.shape[2], clean.shape[3]

rows = sensitivity_sweep(params, clean, true_sigma=25.0,
                         input_sigmas=[5.0, 15.0, 25.0, 40.0, 60.0])
print("true sigma 25, assumed level varied:")
print(sweep_table(rows))

true_map = gradient_map(h, w, 5.0, 50.0)
matched, flat = variant_noise_report(params, clean, true_map)
print("ramp 5 -> 50 across the image:")
print(f"  true map   {matched:5.2f} dB")
print(f"  flat mean  {flat:5.2f} dB")
print(f"  gap        {matched - flat:+5.2f} dB")

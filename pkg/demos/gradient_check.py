"""Check the hand-written backward pass against finite differences.

Builds a small two-layer net, computes analytic gradients for every
learnable array, then wiggles each entry by +/- h and compares. The match
should be around 1e-7; anything near 1e-4 means a broken gradient.
"""

import numpy as np

from mapdenoise import ModelConfig, backward, default_init, forward, make_rng, uniform_map
from mapdenoise.model import learnable_arrays

config = ModelConfig(num_layers=2, num_channels=4)
params = default_init(config, seed=0)
rng = make_rng(1)

noisy = rng.random((1, 1, 8, 8))
target = noisy + 0.05 * rng.standard_normal(noisy.shape)
level = uniform_map(8, 8, 25.0)


def loss_value():
    diff = forward(params, noisy, level, train=True) - target
    return float((diff * diff).sum() / 2.0)


loss, grads = backward(params, noisy, level, target)
print(f"loss = {loss:.6f}")

analytic = dict(learnable_arrays(grads))
h = 1e-5
for name, arr in learnable_arrays(params):
    flat = arr.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_value()
        flat[i] = keep - h
        down = loss_value()
        flat[i] = keep
        numeric = (up - down) / (2 * h)
        a = analytic[name].reshape(-1)[i]
        denom = max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, abs(a - numeric) / denom)
    print(f"{name:18s} max rel err {worst:.2e}")

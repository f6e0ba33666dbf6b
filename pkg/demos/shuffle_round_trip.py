"""The reversible rearrangement the network runs on.

An (N, C, H, W) image becomes (N, C*f*f, H/f, W/f): every f x f block of
pixels turns into f*f channels at one spatial site. Nothing is lost, so
the inverse brings back the exact bytes.
"""

import numpy as np

from mapdenoise import depth_to_space, make_rng, space_to_depth

rng = make_rng(0)
x = rng.random((2, 1, 8, 8))

down = space_to_depth(x, factor=2)
print("input ", x.shape)
print("packed", down.shape)

back = depth_to_space(down, factor=2)
print("round trip exact:", np.array_equal(back, x))

# The first output channel is the top-left pixel of each 2x2 block.
print("x[0,0,:2,:2] =", x[0, 0, :2, :2].round(3).tolist())
print("down[0,:4,0,0] =", down[0, :4, 0, 0].round(3).tolist())

# Works for any factor that divides the sides.
y = rng.random((1, 3, 12, 12))
print("factor 3 exact:", np.array_equal(depth_to_space(space_to_depth(y, 3), 3), y))

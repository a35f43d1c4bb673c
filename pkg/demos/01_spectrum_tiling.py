"""How 2x upsampling replicates an image's spectrum.

Zero-insertion upsampling tiles the (unshifted) magnitude spectrum exactly:
every quadrant of the upsampled image's spectrum is a copy of the original
spectrum.  Nearest-neighbour upsampling does the same thing through a
separable cosine low-pass, so the copies are attenuated but still there.

Run:  python demos/01_spectrum_tiling.py
"""

import numpy as np

from fsf import quadrant_split, spectrum_of, synth_real, upsample_nearest, upsample_zero

image = synth_real(seed=7, size=32)
base = spectrum_of(image)

print("zero-insertion: quadrants of the upsampled spectrum vs the original")
up = spectrum_of(upsample_zero(image))
for name, block in zip(("q00", "q01", "q10", "q11"), quadrant_split(up)):
    err = np.max(np.abs(block - base)) / base.max()
    print(f"  {name}: max deviation {err:.2e} of peak (exact copy)")

print("\nnearest-neighbour: copies modulated by 4|cos(pi*u/2H)cos(pi*v/2W)|")
up_nn = spectrum_of(upsample_nearest(image))
h, w = image.shape
u = np.arange(2 * h)[:, None]
v = np.arange(2 * w)[None, :]
envelope = 4 * np.abs(np.cos(np.pi * u / (2 * h))) * np.abs(np.cos(np.pi * v / (2 * w)))
tiled = base[np.arange(2 * h) % h][:, np.arange(2 * w) % w]
err = np.max(np.abs(up_nn - tiled * envelope)) / up_nn.max()
print(f"  measured spectrum vs tiled-times-envelope: max deviation {err:.2e} of peak")

print("\nenvelope gain near each replica center (the exact centers are nulled,")
print("the copies survive around them):")
for uu, vv in ((0, 0), (0, w), (h, 0), (h, w)):
    print(
        f"  replica at ({uu:>2},{vv:>2}): gain {envelope[uu, vv]:.3f} at center, "
        f"{envelope[(uu + 2) % (2 * h), (vv + 2) % (2 * w)]:.3f} two bins over"
    )

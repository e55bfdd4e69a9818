"""
Amplitude-encoding digits
=========================

Each 28x28 digit is centered on a 32x32 canvas, optionally pooled, and
normalized into the amplitudes of a register.
"""

from pathlib import Path

import numpy as np

from tqnn import amplitude_encode, load_split, readout_distribution
from tqnn.encoder import zero_pad
from tqnn.mnist import downscale

data_dir = Path(__file__).resolve().parents[1] / "data" / "mnist5k"
train = load_split(data_dir, "train")
print("train images:", train.images.shape, "class counts:", np.bincount(train.labels))

img = train.images[0]
padded = zero_pad(img, 32, 32)
small = downscale(padded, 4)
for name, x in (("32x32", padded), ("8x8", small)):
    s = amplitude_encode(x)
    print(f"{name}: {s.num_qubits} qubits, norm {s.norm_squared():.12f}")

# %%
# Reading out a raw input without any circuit: the first ten basis
# probabilities come from the top-left pixels, which are empty border.

print("readout of the bare 8x8 input:", readout_distribution(amplitude_encode(small)).round(3))

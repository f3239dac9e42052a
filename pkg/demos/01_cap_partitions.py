"""
Anisotropic cap partitions
==========================

The quartic t**4 is flat near 0, so equal-length intervals waste pieces
there.  The anisotropic partition keeps one flat block [0, R**(-1/4)] and
splits each dyadic block [2**(k-1) s, 2**k s] into 4**(k-1) equal pieces.
Each piece then sits within about 1/R of its secant.
"""

# %%
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from decoup.caps import cap_family, flatness, locate
from decoup.plotting import plot_family

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

# %%
# One axis at R = 2**12: 22 intervals, the shortest of length 2 R**(-1/2).
R = 2 ** 12
axis = cap_family(R, 2, 1).axis_lists[0]
print(len(axis), "intervals; shortest", min(iv.length for iv in axis))
for iv in axis[:4]:
    print(f"  {iv.label():>28}  flatness*R = {flatness(iv) * R:.4f}")

# %%
# flatness * R stays bounded across scales.  The flat block gives the
# smallest value, (3/4) 4**(-1/3) = 0.4725, at every R.
for R in (2 ** 4, 2 ** 8, 2 ** 12, 2 ** 16):
    vals = [flatness(iv) * R for iv in cap_family(R, 2, 1).axis_lists[0]]
    print(f"R = {R:>6}: flatness*R in [{min(vals):.4f}, {max(vals):.4f}]")

# %%
# The box family in d = 2 with a lookup.
fam = cap_family(256, 2, 2)
plot_family(fam, out / "caps_R256_d2.svg")
idx = locate((0.9, 0.1), fam)
print("(0.9, 0.1) lies in", fam.caps[idx].label())

# %%
# Pieces shrink towards 1, where the curvature of t**4 is largest.
lengths = np.array([float(iv.length) for iv in cap_family(2 ** 16, 2, 1).axis_lists[0]])
lows = np.array([float(iv.lo) for iv in cap_family(2 ** 16, 2, 1).axis_lists[0]])
fig, ax = plt.subplots(figsize=(5, 3))
ax.loglog(lows[1:], lengths[1:], ".")
ax.set_xlabel("left endpoint")
ax.set_ylabel("length")
fig.tight_layout()
fig.savefig(out / "lengths_R65536.png", dpi=120)

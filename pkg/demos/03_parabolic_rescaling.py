"""
Rescaling a cap to the unit cube
================================

A box tau = prod [a_j, a_j + w_j] maps to [0, 1]**3 by xi = a + w eta.
Expanding t**4 around a_j and dropping the linear part (absorbed into x)
gives a new phase psi_j.  The map on space is affine, so |E_tau f| at x
equals |E^psi f~| at the image point.
"""

# %%
from fractions import Fraction

import numpy as np

from decoup.caps import box_cap, cap_family, omega_regions, tau_decompose
from decoup.oscillo import FrequencyFunction, SpacePointSet
from decoup.rescale import check_phase_conditions, conjugate, verify_conjugation

# %%
# The cap [1/2, 1] at K = 16: psi = 6 eta**2 + 4 eta**3 + eta**4.
conj = conjugate(box_cap([(Fraction(1, 2), 1)]), 2, K=16)
print("psi coefficients:", conj.phase_out.coeffs[0])
print("space map:\n", conj.matrix)

# %%
# The identity holds to rounding on random caps and atoms.
fam = cap_family(256, 2, 3)
rng = np.random.default_rng(1)
pts = SpacePointSet.monte_carlo(4, 256, 100, seed=1)
for idx in rng.choice(len(fam), 5, replace=False):
    tau = fam.caps[idx]
    xi = tau.lo + rng.random((8, 3)) * (tau.hi - tau.lo)
    f = FrequencyFunction.atomic(xi, np.exp(2j * np.pi * rng.random(8)))
    res = verify_conjugation(f, tau, 2, pts, K=16)
    print(f"{tau.label():>60}  max rel error {res.max_rel_error:.1e}")

# %%
# Away from the flat corner (the region Omega_7) every rescaled axis has
# psi'' between 6 and 48: a uniformly curved phase.
K = 256
worst = [np.inf, 0.0]
for tau in tau_decompose(omega_regions(K)[7]):
    for rep in check_phase_conditions(conjugate(tau, 2, K=K).phase_out):
        worst = [min(worst[0], rep.min_d2), max(worst[1], rep.max_d2)]
print("psi'' range over Omega_7 at K = 256:", worst)

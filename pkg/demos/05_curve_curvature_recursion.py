"""
Planar curve, curvature and the induction on scales
===================================================

Three smaller pieces: the curve (t, t**4) on [lam, 2 lam] cut into
lam**2 K**(1/2) equal intervals, the curvature of the surface, and the
scalar recursion that drives the induction on scales.
"""

# %%
from fractions import Fraction

from decoup.harness import (Ensemble, curvature, curve_pieces, curve_ratio, recursion_closed_form,
                            recursion_iterate, recursion_profile)

# %%
# Interval counts shrink with lam: near 0 the curve is flatter.
for lam in (Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)):
    print(f"lam = {lam}: {len(curve_pieces(lam, 4096))} intervals at K = 4096")
rec = curve_ratio(Ensemble("random_phase"), 6.0, 4096, Fraction(1, 2), budget=5000)
print(f"curve ratio at p = 6: {rec.ratio:.3f} +- {rec.ratio_stderr:.3f}")

# %%
# Gaussian curvature numerator prod 12 xi_j**2: 1728 at (1, 1, 1), zero on
# each coordinate plane.
print(curvature((1, 1, 1))[0], curvature((0, Fraction(1, 2), 1))[0])

# %%
# D(K**n) = C K**4 K**(n eps) + 2 C K**eps D(K**(n-1)).  With K**(-eps) <= 1/4
# the normalised bound D / R**(2 eps) stops growing after one step.
C, K, eps = 1.0, 256, 0.25
print(recursion_iterate(C, K, eps, K ** 5), recursion_closed_form(C, K, eps, K ** 5))
print(recursion_profile(C, K, eps, 6))

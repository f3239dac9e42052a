"""
Evaluating the extension operator
=================================

E f(x, t) = sum over caps of the integral of f(xi) e(x.xi + t phi(xi)).
For piecewise-constant f this is evaluated per cap and per axis by a
Filon-Legendre rule, which stays accurate when the phase winds many
times across a cap.  Atomic input is summed directly.
"""

# %%
import numpy as np

from decoup.caps import box_cap, cap_family, unit_cube
from decoup.oscillo import FrequencyFunction, SpacePointSet, WeightSpec, eval_extension, lp_norm
from decoup.phase import PhaseSpec

quartic = PhaseSpec.pure_power(3)

# %%
# f = 1 on the unit cube: at the origin E f = 1.
f = FrequencyFunction.per_cap([unit_cube(3)], [1.0])
print(eval_extension(f, None, quartic, [[0, 0, 0, 0]]))

# %%
# The Filon rule against the plain Gauss rule at growing |t|.
# Gauss with q = 12 nodes per axis degrades once the phase winds several times.
cap = box_cap([(0.5, 0.625)] * 3)
g = FrequencyFunction.per_cap([cap], [1.0])
for t in (10.0, 200.0, 2000.0):
    x = np.array([[30.0, -12.0, 5.0, t]])
    a = eval_extension(g, None, quartic, x)[0]
    b = eval_extension(g, None, quartic, x, method="gauss")[0]
    print(f"t = {t:>6}: filon {a:.6e}  gauss-12 differs by {abs(a - b):.1e}")

# %%
# Random unimodular coefficients on the R = 256 family, and the L^4 norm
# over B_R by Monte Carlo with an error bar.
fam = cap_family(256, 2, 3)
rng = np.random.default_rng(0)
f = FrequencyFunction.per_cap(fam, np.exp(2j * np.pi * rng.random(len(fam))))
pts = SpacePointSet.monte_carlo(4, 256, 2000, seed=0)
vals = eval_extension(f, None, quartic, pts)
est = lp_norm(vals, 4, WeightSpec.indicator(4, 256), pts)
print(f"||E f||_4 on B_256 ~ {est.norm:.4g} +- {est.stderr:.2g}")

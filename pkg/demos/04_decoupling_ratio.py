"""
Decoupling ratios and their growth
==================================

The ratio ||E f||_{L^p(B_R)} / (sum_theta ||E_theta f||^2_{L^p(w)})**(1/2)
is estimated by Monte Carlo.  An R**eps bound means the log-log slope of
the median ratio against R stays small.
"""

# %%
from pathlib import Path

from decoup.caps import cap_family
from decoup.harness import Ensemble, SweepConfig, decoupling_ratio, sweep
from decoup.plotting import plot_sweep

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

# %%
# p = 2 is almost orthogonality: the ratio sits near 1.
fam = cap_family(256, 2, 1)
for kind in ("single_cap", "constant_one", "random_phase", "atomic_lattice"):
    rec = decoupling_ratio(Ensemble(kind), 2.0, 256, fam, rhs_weight="indicator", budget=5000)
    print(f"{rec.ensemble:>18}: ratio {rec.ratio:.3f} +- {rec.ratio_stderr:.3f}")

# %%
# A small growth sweep on the curve (d = 1) at the critical exponent p = 6.
cfg = SweepConfig(R_list=[16, 256, 4096], p_list=[6.0], d=1,
                  ensembles=[Ensemble("random_phase")], seeds=[0, 1], budget=5000,
                  rhs_weight="indicator")
res = sweep(cfg)
for fit in res.fits:
    print(f"p = {fit.p}: eps_hat = {fit.epsilon:.3f} from medians {fit.medians}")
plot_sweep(res.records, res.fits, out / "sweep_d1_p6.svg")

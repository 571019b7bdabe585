# ## Small-noise paths
# dX = theta(t) X dt + eps dG concentrates around the ODE solution as eps -> 0,
# with the gap controlled pathwise by eps e^{Lt} times the running sup of |G|.

import numpy as np

from smallnoise import CovarianceModel, GridSpec, SdeConfig, simulate
from smallnoise.sde_sim import euler_slack, gronwall_bound, lemma21b_check
from smallnoise.trends import sine

trend = sine(0.3, 0.2)
cfg = SdeConfig(1.0, 0.1, trend, CovarianceModel("FractionalBM", 0.7), GridSpec(1.0, 2048))

for eps in (0.1, 0.01, 0.001):
    path = simulate(cfg.with_epsilon(eps), seed=11)
    lhs, rhs = gronwall_bound(path, trend.bound_L)
    print(f"eps={eps:g}: max|X-x|={lhs.max():.2e}, envelope={rhs.max():.2e}")

print("Euler slack on this grid:", euler_slack(trend, 1.0, cfg.grid))

# ### The event A_t and the gated increments Y
# With a small starting value the floor x0/2 e^{-Lt} can be crossed.

path = simulate(SdeConfig(0.2, 0.2, trend, cfg.model, cfg.grid), seed=3)
print("A holds up to T:", bool(path.indicator_A[-1]),
      "first failure index:", int(np.argmin(path.indicator_A)) if not path.indicator_A.all() else None)

# ### Mean gap against the mean bound

res = lemma21b_check(cfg, n_reps=300, seed=5)
print(res, "holds:", res.holds)

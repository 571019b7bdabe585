# ## Estimating J = theta x and theta
# One path, two estimators: smoothed increments of X for J, and smoothed
# increments of the gated process Y for theta itself.

import numpy as np

from smallnoise import CovarianceModel, GridSpec, SdeConfig, simulate
from smallnoise.estimators import EstimatorConfig, RateK, RateRho, estimate_curve
from smallnoise.kernels import builtin
from smallnoise.sde_sim import ode_solution
from smallnoise.trends import sine

trend = sine(0.3, 0.2)
eps = 0.01
cfg = SdeConfig(1.0, eps, trend, CovarianceModel("FractionalBM", 0.6), GridSpec(1.0, 4096))
path = simulate(cfg, seed=21)
K = builtin("epanechnikov")

est_J = EstimatorConfig(K, eps, RateK(1))
curve = estimate_curve(path, est_J, n_eval=9)
x = np.interp(curve.eval_points, cfg.grid.nodes, ode_solution(trend, 1.0, cfg.grid))
print("phi =", est_J.bandwidth_phi)
print(np.column_stack([curve.eval_points, curve.values, trend(curve.eval_points) * x]).round(4))

est_theta = EstimatorConfig(K, eps, RateRho(2), target="Theta")
curve = estimate_curve(path, est_theta, n_eval=9)
print(np.column_stack([curve.eval_points, curve.values, trend(curve.eval_points)]).round(4))

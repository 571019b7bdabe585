# ## Gaussian drivers
# Exact sampling of fractional, sub-fractional and bifractional Brownian
# motion on a grid, via a cached Cholesky factor of the covariance matrix.

import numpy as np

from smallnoise.gp_cov import CovarianceModel, GridSpec, covariance_at, derive_seed, sample_paths

grid = GridSpec(1.0, 256)
models = [
    CovarianceModel("FractionalBM", 0.3),
    CovarianceModel("FractionalBM", 0.8),
    CovarianceModel("SubFractionalBM", 0.7),
    CovarianceModel("BifractionalBM", 0.6, 0.8),
]

# ### Covariances at a few node pairs

for m in models:
    print(m.kind, m.hurst, [round(covariance_at(m, s, 0.5), 4) for s in (0.25, 0.5, 1.0)])

# ### Sample paths and their roughness
# Rougher drivers (small H) have larger quadratic variation on a fixed grid.

seeds = [derive_seed(1, r) for r in range(200)]
for m in models:
    G = sample_paths(m, grid, seeds)
    qv = np.sum(np.diff(G, axis=1) ** 2, axis=1).mean()
    print(f"{m.kind:16s} H={m.hurst}: mean quadratic variation {qv:.3f}")

# ### Empirical check against the model

G = sample_paths(models[1], GridSpec(1.0, 4), [derive_seed(2, r) for r in range(5000)])
print(np.round(np.cov(G[:, 1:], rowvar=False), 3))

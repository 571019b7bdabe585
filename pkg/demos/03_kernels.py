# ## Kernels
# Built-in order-1 kernels and signed higher-order kernels whose moments
# 1..k vanish.

import numpy as np

from smallnoise.kernels import build_higher_order, builtin, moment, verify_conditions

for name in ("uniform", "triangular", "epanechnikov"):
    rep = verify_conditions(builtin(name))
    print(name, "order", rep.a3_order, "int K^2 =", round(rep.l2_norm_sq, 6))

for k in range(1, 6):
    K = build_higher_order(k)
    print(f"order {k}: moments 1..{k + 1} =",
          np.round([moment(K, j) for j in range(1, k + 2)], 12))

# Higher order buys bias reduction at the price of negative lobes.

u = np.linspace(-1, 1, 9)
print(np.round(build_higher_order(4).eval(u), 3))

# ## Monte Carlo rates
# Sup-risk over a ladder of noise levels; the ratio risk/eps should stay
# bounded. Reports are byte-identical for any number of worker threads.

from smallnoise import CovarianceModel, GridSpec, SdeConfig
from smallnoise.estimators import EstimatorConfig, RateK
from smallnoise.kernels import builtin
from smallnoise.mc_harness import RATE_J, ExperimentPlan, run_experiment
from smallnoise.trends import sine

cfg = SdeConfig(1.0, 0.2, sine(0.3, 0.2), CovarianceModel("FractionalBM", 0.7),
                GridSpec(1.0, 2048))
plan = ExperimentPlan(cfg, [0.2, 0.1, 0.05], 200, RATE_J,
                      EstimatorConfig(builtin("epanechnikov"), 0.2, RateK(1)), seed_base=1)

report = run_experiment(plan, n_workers=4)
for line in report.summary_lines():
    print(line)

again = run_experiment(plan, n_workers=1)
print("identical across thread counts:", again.report_csv() == report.report_csv())

"""Kernel estimation of the linear multiplier in small-noise SDEs driven by Gaussian processes."""

from .errors import (BoundaryError, ConfigError, DomainError, NumericalError,
                     ReplicationError, ResolutionError)
from .gp_cov import (CovarianceModel, GaussianPath, GridSpec, covariance_at,
                     covariance_matrix, estimate_sup_abs, sample_path, sample_paths)
from .trends import TrendFunction, Theta0, ThetaK, ThetaRho, make_trend
from .sde_sim import SdeConfig, SdePath, simulate, ode_solution, gronwall_bound, lemma21b_check
from .kernels import KernelFunction, builtin, build_higher_order, moment, verify_conditions
from .estimators import (EstimatorConfig, Explicit, RateK, RateRho, effective_window,
                         estimate_J, estimate_theta, estimate_curve, resolve_bandwidth)
from .mc_harness import ExperimentPlan, McReport, Tolerances, run_experiment, write_report

__version__ = "0.1.0"

"""Kernel estimators of ``J(t) = theta(t) x(t)`` and of ``theta(t)`` itself.

``estimate_J`` smooths the increments of X; ``estimate_theta`` smooths the
increments of the gated process Y (``dY = I(A_t) dX_t / X_t``) and is set
to zero outside the global event ``A = A_T``. Both use left-point sums on
the simulation grid and refuse evaluation points whose kernel window
leaves ``[0, T]``.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import BoundaryError, ConfigError, DomainError, ResolutionError
from .kernels import KernelFunction
from .sde_sim import SdePath

__all__ = [
    "Explicit",
    "RateK",
    "RateRho",
    "EstimatorConfig",
    "EstimateCurve",
    "TARGET_J",
    "TARGET_THETA",
    "resolve_bandwidth",
    "effective_window",
    "check_resolution",
    "kernel_weights",
    "estimate_J",
    "estimate_theta",
    "estimate_curve",
    "curve_to_csv",
]

TARGET_J = "J"
TARGET_THETA = "Theta"
RESOLUTION_FACTOR = 20
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class Explicit:
    phi: float


@dataclass(frozen=True)
class RateK:
    """phi = eps^(1/(k+1)), for (k+1)-smooth multipliers."""

    k: int


@dataclass(frozen=True)
class RateRho:
    """phi = eps^(1/rho), for Hoelder-rho multipliers."""

    rho: float


BandwidthRule = Union[Explicit, RateK, RateRho]


def resolve_bandwidth(rule: BandwidthRule, epsilon: float) -> float:
    if isinstance(rule, Explicit):
        if not rule.phi > 0:
            raise DomainError("explicit bandwidth must be positive")
        return float(rule.phi)
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon={epsilon} must lie in (0, 1) for rate bandwidths")
    if isinstance(rule, RateK):
        if rule.k < 0:
            raise DomainError("RateK needs k >= 0")
        return epsilon ** (1.0 / (rule.k + 1))
    if isinstance(rule, RateRho):
        if not rule.rho > 1:
            raise DomainError("RateRho needs rho > 1")
        return epsilon ** (1.0 / rule.rho)
    raise DomainError(f"unknown bandwidth rule {rule!r}")


def effective_window(kernel: KernelFunction, phi: float, T: float,
                     reflected: bool = False) -> Tuple[float, float]:
    """Largest ``[c, d]`` whose kernel windows stay inside ``[0, T]``.

    For ``K((tau - t)/phi)`` this is ``[-A phi, T - B phi]``; with
    ``reflected=True`` (argument ``(t - s)/phi``) it is ``[B phi, T + A phi]``.
    """
    A, B = kernel.support_A, kernel.support_B
    if reflected:
        c, d = B * phi, T + A * phi
    else:
        c, d = -A * phi, T - B * phi
    if not c < d:
        raise ConfigError(
            f"empty evaluation window: bandwidth {phi:.6g} with kernel support "
            f"[{A}, {B}] needs phi*(B-A) < T={T}"
        )
    return c, d


@dataclass(frozen=True)
class EstimatorConfig:
    """Kernel, noise level, bandwidth rule and evaluation window.

    ``window=None`` means the effective window for the target's orientation.
    ``allow_coarse`` downgrades the ``dt <= phi/20`` guard to a warning.
    """

    kernel: KernelFunction
    epsilon: float
    rule: BandwidthRule
    window: Optional[Tuple[float, float]] = None
    target: str = TARGET_J
    allow_coarse: bool = False

    def __post_init__(self):
        if self.target not in (TARGET_J, TARGET_THETA):
            raise ConfigError(f"unknown estimator target {self.target!r}")

    @property
    def bandwidth_phi(self) -> float:
        return resolve_bandwidth(self.rule, self.epsilon)

    def resolved_window(self, T: float) -> Tuple[float, float]:
        phi = self.bandwidth_phi
        if not 0 < phi < T:
            raise ConfigError(f"bandwidth {phi:.6g} must lie in (0, T={T})")
        lo, hi = effective_window(self.kernel, phi, T, self.target == TARGET_THETA)
        if self.window is None:
            return lo, hi
        c, d = map(float, self.window)
        if not (c <= d and c >= lo - _EDGE_TOL and d <= hi + _EDGE_TOL):
            raise BoundaryError(
                f"window [{c}, {d}] is not admissible; effective window is [{lo:.6g}, {hi:.6g}]"
            )
        return c, d

    def echo(self) -> dict:
        return {
            "kernel": self.kernel.name,
            "epsilon": self.epsilon,
            "rule": type(self.rule).__name__,
            "rule_param": next(iter(vars(self.rule).values())),
            "phi": self.bandwidth_phi,
            "target": self.target,
        }


def check_resolution(step: float, phi: float, allow_coarse: bool = False) -> bool:
    """Enforce ``dt <= phi / 20``; returns whether the guard holds."""
    ok = step <= phi / RESOLUTION_FACTOR * (1 + 1e-12)
    if not ok:
        msg = (f"grid step {step:.6g} exceeds phi/{RESOLUTION_FACTOR} = "
               f"{phi / RESOLUTION_FACTOR:.6g}; refine the grid or widen the bandwidth")
        if not allow_coarse:
            raise ResolutionError(msg)
        warnings.warn(msg, stacklevel=3)
    return ok


def _check_points(t, kernel, phi, T, reflected):
    lo, hi = effective_window(kernel, phi, T, reflected)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    bad = (t < lo - _EDGE_TOL) | (t > hi + _EDGE_TOL)
    if np.any(bad):
        raise BoundaryError(
            f"evaluation point {t[bad][0]:.6g} outside admissible window "
            f"[{lo:.6g}, {hi:.6g}] for phi={phi:.6g}"
        )
    return t


def kernel_weights(kernel: KernelFunction, phi: float, nodes: np.ndarray, t,
                   reflected: bool = False) -> np.ndarray:
    """``K(arg) / phi`` at the left node of every interval, one row per point."""
    left = np.asarray(nodes, dtype=float)[:-1]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if reflected:
        arg = (t[:, None] - left[None, :]) / phi
    else:
        arg = (left[None, :] - t[:, None]) / phi
    return np.asarray(kernel.eval(arg), dtype=float) / phi


def _prepare(path: SdePath, config: EstimatorConfig, t, reflected):
    phi = config.bandwidth_phi
    T = path.grid.horizon_T
    check_resolution(path.grid.step, phi, config.allow_coarse)
    t = _check_points(t, config.kernel, phi, T, reflected)
    return kernel_weights(config.kernel, phi, path.grid.nodes, t, reflected)


def estimate_J(path: SdePath, config: EstimatorConfig, t):
    """``(1/phi) sum_i K((t_i - t)/phi) (X_{i+1} - X_i)``; scalar in, scalar out."""
    W = _prepare(path, config, t, reflected=False)
    out = W @ np.diff(path.X)
    return float(out[0]) if np.ndim(t) == 0 else out


def estimate_theta(path: SdePath, config: EstimatorConfig, t):
    """``I(A_T) (1/phi) sum_i K((t - t_i)/phi) dY_i``; exactly 0 off the event A."""
    if path.x0 <= 0:
        raise DomainError("the gated estimator needs x0 > 0")
    W = _prepare(path, config, t, reflected=True)
    if not bool(path.indicator_A[-1]):
        out = np.zeros(W.shape[0])
    else:
        out = W @ path.Y_increments
    return float(out[0]) if np.ndim(t) == 0 else out


@dataclass(eq=False)
class EstimateCurve:
    eval_points: np.ndarray
    values: np.ndarray
    target: str
    config: dict = field(default_factory=dict)


def estimate_curve(path: SdePath, config: EstimatorConfig, n_eval: int) -> EstimateCurve:
    """Evaluate the configured estimator on ``n_eval`` equispaced points of [c, d]."""
    if n_eval < 1:
        raise DomainError("n_eval must be >= 1")
    c, d = config.resolved_window(path.grid.horizon_T)
    pts = np.array([0.5 * (c + d)]) if n_eval == 1 else np.linspace(c, d, n_eval)
    fn = estimate_J if config.target == TARGET_J else estimate_theta
    values = np.asarray(fn(path, config, pts), dtype=float)
    echo = dict(config.echo(), window=[c, d], n_eval=n_eval)
    return EstimateCurve(pts, values, config.target, echo)


def curve_to_csv(curve: EstimateCurve) -> str:
    """``#``-prefixed JSON header line with the config echo, then ``t,value`` rows."""
    buf = io.StringIO()
    buf.write("# " + json.dumps(curve.config, sort_keys=True) + "\n")
    buf.write("t,value\n")
    for t, v in zip(curve.eval_points, curve.values):
        buf.write(f"{float(t)!r},{float(v)!r}\n")
    return buf.getvalue()

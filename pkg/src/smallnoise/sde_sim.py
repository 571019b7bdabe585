"""Small-noise linear SDE ``dX = theta(t) X dt + eps dG`` on a uniform grid.

Also builds the noise-gated observation ``dY = I(A_t) X_t^{-1} dX_t`` and the
event ``A_t`` that the path has stayed above ``x0 exp(-L t) / 2``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericalError
from .gp_cov import (CovarianceModel, GaussianPath, GridSpec, derive_seed,
                     sample_path, sample_paths)
from .trends import TrendFunction

__all__ = [
    "SdeConfig",
    "SdePath",
    "ode_solution",
    "simulate",
    "simulate_batch",
    "gronwall_bound",
    "euler_slack",
    "lemma21b_check",
    "Lemma21Result",
    "path_to_csv",
    "path_from_csv",
    "PATH_COLUMNS",
]

PATH_COLUMNS = ("t", "X", "x_ode", "G", "indicator_A", "Y_increment")


@dataclass(frozen=True, eq=False)
class SdeConfig:
    x0: float
    epsilon: float
    trend: TrendFunction
    model: CovarianceModel
    grid: GridSpec

    def __post_init__(self):
        if not self.epsilon >= 0 or not math.isfinite(self.epsilon):
            raise DomainError(f"epsilon={self.epsilon} must be a finite number >= 0")
        if not math.isfinite(self.x0):
            raise DomainError("x0 must be finite")

    def with_epsilon(self, epsilon: float) -> "SdeConfig":
        return SdeConfig(self.x0, epsilon, self.trend, self.model, self.grid)


@dataclass(frozen=True, eq=False)
class SdePath:
    """One discretized realization.

    ``Y_increments[i]`` belongs to the interval ``[t_i, t_{i+1}]`` and is
    zero whenever ``indicator_A[i]`` is false.
    """

    grid: GridSpec
    X: np.ndarray
    x_ode: np.ndarray
    G: GaussianPath
    indicator_A: np.ndarray
    Y_increments: np.ndarray
    epsilon: float = float("nan")
    bound_L: float = float("nan")

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def x0(self) -> float:
        return float(self.X[0])


def ode_solution(trend: TrendFunction, x0: float, grid: GridSpec) -> np.ndarray:
    """``x0 exp(int_0^{t_i} theta)`` at every node.

    Composite Simpson on the grid refined four times (two Simpson panels
    per grid interval).
    """
    t = grid.nodes
    h = grid.step / 4
    sub = t[:-1, None] + h * np.arange(5)[None, :]
    f = np.asarray(trend.eval(sub.ravel()), dtype=float).reshape(sub.shape)
    pieces = h / 3 * (f[:, 0] + 4 * f[:, 1] + 2 * f[:, 2] + 4 * f[:, 3] + f[:, 4])
    integral = np.concatenate([[0.0], np.cumsum(pieces)])
    return x0 * np.exp(integral)


def _euler(x0, epsilon, theta_left, step, G):
    # G has shape (reps, n+1); X_{i+1} = X_i (1 + theta_i dt) + eps dG_i
    growth = 1.0 + theta_left * step
    noise = epsilon * np.diff(G, axis=1)
    X = np.empty_like(G)
    X[:, 0] = x0
    for i in range(G.shape[1] - 1):
        X[:, i + 1] = X[:, i] * growth[i] + noise[:, i]
    return X


def _events(X, x0, bound_L, t):
    """Running event A_{t_i} and the gated increments of Y."""
    n_rep, n_nodes = X.shape
    if x0 <= 0:
        # the floor x0 exp(-L t) / 2 is only meaningful for positive x0
        return np.zeros((n_rep, n_nodes), dtype=bool), np.zeros((n_rep, n_nodes - 1))
    floor = 0.5 * x0 * np.exp(-bound_L * t)
    running_min = np.minimum.accumulate(X, axis=1)
    indicator = np.logical_and.accumulate(running_min >= floor[None, :], axis=1)
    left = X[:, :-1]
    gate = indicator[:, :-1]
    if np.any(gate & (left == 0)):
        raise NumericalError("X hit 0 while A_t holds; cannot form 1/X")
    safe = np.where(gate, left, 1.0)
    Y = np.where(gate, np.diff(X, axis=1) / safe, 0.0)
    return indicator, Y


def simulate_batch(config: SdeConfig, G: np.ndarray):
    """Simulate one path per row of the driver array ``G``.

    Returns ``(X, indicator_A, Y_increments)`` with leading replication axis.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    t = config.grid.nodes
    theta_left = np.asarray(config.trend.eval(t[:-1]), dtype=float)
    X = _euler(config.x0, config.epsilon, theta_left, config.grid.step, G)
    if not np.all(np.isfinite(X)):
        raise NumericalError("non-finite values in simulated path")
    indicator, Y = _events(X, config.x0, config.trend.bound_L, t)
    return X, indicator, Y


def simulate(config: SdeConfig, seed: int) -> SdePath:
    """Euler scheme with exact Gaussian increments, plus x(t), A_t and Y."""
    G = sample_path(config.model, config.grid, seed)
    X, ind, Y = simulate_batch(config, G.values[None, :])
    return SdePath(
        grid=config.grid,
        X=X[0],
        x_ode=ode_solution(config.trend, config.x0, config.grid),
        G=G,
        indicator_A=ind[0],
        Y_increments=Y[0],
        epsilon=config.epsilon,
        bound_L=config.trend.bound_L,
    )


def gronwall_bound(path: SdePath, bound_L: float, epsilon: Optional[float] = None):
    """Pathwise gap and its Gronwall envelope.

    Returns ``(lhs, rhs)`` with ``lhs = |X - x|`` and
    ``rhs = eps exp(L t) max_{j <= i} |G_j|`` at every node.
    """
    eps = path.epsilon if epsilon is None else epsilon
    if not math.isfinite(eps):
        raise DomainError("path carries no epsilon; pass it explicitly")
    lhs = np.abs(path.X - path.x_ode)
    rhs = eps * np.exp(bound_L * path.t) * np.maximum.accumulate(np.abs(path.G.values))
    return lhs, rhs


def euler_slack(trend: TrendFunction, x0: float, grid: GridSpec) -> float:
    """Max node error of the noise-free Euler path against the ODE solution.

    This is ``C_euler * dt`` for the given configuration; it is the only
    term separating the discrete gap from the continuous Gronwall bound.
    """
    theta_left = np.asarray(trend.eval(grid.nodes[:-1]), dtype=float)
    X0 = _euler(x0, 0.0, theta_left, grid.step, np.zeros((1, grid.n_steps + 1)))[0]
    return float(np.max(np.abs(X0 - ode_solution(trend, x0, grid))))


class Lemma21Result(NamedTuple):
    mean_sup_gap: float
    bound: float
    se_gap: float
    se_bound: float
    slack: float

    @property
    def holds(self) -> bool:
        tol = 3.0 * math.hypot(self.se_gap, self.se_bound) + self.slack
        return self.mean_sup_gap <= self.bound + tol


def lemma21b_check(config: SdeConfig, n_reps: int, seed: int,
                   seeds: Optional[Sequence[int]] = None) -> Lemma21Result:
    """Compare ``max_i E|X_i - x_i|`` with ``eps e^{LT} E[max_i |G_i|]`` by Monte Carlo.

    Both sides use the same replications; ``holds`` applies the
    3-standard-error plus Euler-slack tolerance.
    """
    if n_reps < 100:
        raise DomainError("lemma21b_check needs n_reps >= 100")
    if seeds is None:
        seeds = [derive_seed(seed, r) for r in range(n_reps)]
    G = sample_paths(config.model, config.grid, seeds)
    X, _, _ = simulate_batch(config, G)
    x = ode_solution(config.trend, config.x0, config.grid)
    gaps = np.abs(X - x[None, :])
    means = gaps.mean(axis=0)
    i_star = int(np.argmax(means))
    se_gap = float(gaps[:, i_star].std(ddof=1) / math.sqrt(n_reps))
    sups = np.max(np.abs(G), axis=1)
    factor = config.epsilon * math.exp(config.trend.bound_L * config.grid.horizon_T)
    bound = factor * float(sups.mean())
    se_bound = factor * float(sups.std(ddof=1) / math.sqrt(n_reps))
    slack = euler_slack(config.trend, config.x0, config.grid)
    return Lemma21Result(float(means[i_star]), bound, se_gap, se_bound, slack)


def _fmt(v: float) -> str:
    return repr(float(v))


def path_to_csv(path: SdePath) -> str:
    """CSV text with one row per node; the last Y_increment cell is empty."""
    buf = io.StringIO()
    buf.write(",".join(PATH_COLUMNS) + "\n")
    t = path.t
    n = path.grid.n_steps
    for i in range(n + 1):
        y = _fmt(path.Y_increments[i]) if i < n else ""
        buf.write(f"{_fmt(t[i])},{_fmt(path.X[i])},{_fmt(path.x_ode[i])},"
                  f"{_fmt(path.G.values[i])},{int(bool(path.indicator_A[i]))},{y}\n")
    return buf.getvalue()


def path_from_csv(text: str, require=PATH_COLUMNS) -> SdePath:
    """Parse :func:`path_to_csv` output; missing required columns raise ``ValueError``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty path CSV")
    header = [h.strip() for h in lines[0].split(",")]
    for col in require:
        if col not in header:
            raise ValueError(f"path CSV is missing column {col!r}")
    cols = {h: [] for h in header}
    for ln in lines[1:]:
        cells = ln.split(",")
        for h, c in zip(header, cells):
            cols[h].append(c)
    n_nodes = len(lines) - 1
    t = np.array(cols["t"], dtype=float)
    grid = GridSpec(float(t[-1]), n_nodes - 1)
    if not np.allclose(t, grid.nodes, rtol=0, atol=1e-9 * grid.horizon_T):
        raise ValueError("path CSV time column is not a uniform grid starting at 0")

    def col(name, dtype=float, fill=0.0):
        if name not in cols:
            return np.full(n_nodes, fill, dtype=dtype)
        return np.array([c if c != "" else "nan" for c in cols[name]], dtype=float).astype(dtype)

    G = GaussianPath(grid, col("G"))
    Y = col("Y_increment")[:-1]
    ind = col("indicator_A", dtype=float).astype(bool)
    X = col("X")
    x_ode = col("x_ode", fill=float("nan"))
    return SdePath(grid, X, x_ode, G, ind, Y)

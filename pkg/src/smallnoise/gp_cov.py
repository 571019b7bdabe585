"""Covariance models for centered Gaussian drivers and exact grid sampling.

Paths are drawn from the finite-dimensional law on a uniform grid by a
lower-triangular factor of the covariance matrix, so any admissible
covariance (not just stationary-increment ones) is handled.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericalError

__all__ = [
    "FRACTIONAL_BM",
    "SUB_FRACTIONAL_BM",
    "BIFRACTIONAL_BM",
    "CUSTOM",
    "CovarianceModel",
    "GridSpec",
    "GaussianPath",
    "covariance_at",
    "covariance_matrix",
    "cholesky_factor",
    "derive_seed",
    "sample_path",
    "sample_paths",
    "estimate_sup_abs",
]

FRACTIONAL_BM = "FractionalBM"
SUB_FRACTIONAL_BM = "SubFractionalBM"
BIFRACTIONAL_BM = "BifractionalBM"
CUSTOM = "Custom"
_KINDS = (FRACTIONAL_BM, SUB_FRACTIONAL_BM, BIFRACTIONAL_BM, CUSTOM)

_JITTER_START = 1e-12
_JITTER_MAX = 1e-6


@dataclass(frozen=True)
class CovarianceModel:
    """A centered Gaussian process given by its covariance function.

    Parameters
    ----------
    kind : str
        One of ``"FractionalBM"``, ``"SubFractionalBM"``, ``"BifractionalBM"``
        or ``"Custom"``.
    hurst : float
        Hurst index in (0, 1).
    bi_exponent : float
        Second exponent in (0, 1] of the bifractional model; ignored otherwise.
    custom_eval : callable, optional
        ``R(s, t)`` for ``kind="Custom"``. Should accept broadcastable arrays;
        scalar-only callables are vectorized on the fly.
    """

    kind: str = FRACTIONAL_BM
    hurst: float = 0.5
    bi_exponent: float = 1.0
    custom_eval: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown covariance model kind {self.kind!r}")
        if not 0.0 < self.hurst < 1.0:
            raise DomainError(f"hurst={self.hurst} out of range (0,1)")
        if not 0.0 < self.bi_exponent <= 1.0:
            raise DomainError(f"bi_exponent={self.bi_exponent} out of range (0,1]")
        if self.kind == CUSTOM and self.custom_eval is None:
            raise DomainError("Custom covariance model needs custom_eval")

    def variance(self, t):
        """R(t, t)."""
        return covariance_at(self, t, t)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``t_i = i * T / n_steps`` on [0, T]."""

    horizon_T: float
    n_steps: int

    def __post_init__(self):
        if not self.horizon_T > 0:
            raise DomainError(f"horizon_T={self.horizon_T} must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps={self.n_steps} must be an integer >= 2")

    @property
    def step(self) -> float:
        return self.horizon_T / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.step
        t[-1] = self.horizon_T
        return t


@dataclass(frozen=True, eq=False)
class GaussianPath:
    """Values of G at every grid node (``values[0] == 0``)."""

    grid: GridSpec
    values: np.ndarray
    seed: Optional[int] = None


def _raw_covariance(model: CovarianceModel, s, t):
    H = model.hurst
    if model.kind == FRACTIONAL_BM:
        return 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(s - t) ** (2 * H))
    if model.kind == SUB_FRACTIONAL_BM:
        return (s ** (2 * H) + t ** (2 * H)
                - 0.5 * ((s + t) ** (2 * H) + np.abs(s - t) ** (2 * H)))
    if model.kind == BIFRACTIONAL_BM:
        K = model.bi_exponent
        return 2.0 ** (-K) * ((s ** (2 * H) + t ** (2 * H)) ** K
                              - np.abs(s - t) ** (2 * H * K))
    try:
        out = model.custom_eval(s, t)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(s, t).shape)
    except (TypeError, ValueError):
        return np.vectorize(model.custom_eval, otypes=[float])(s, t)


def covariance_at(model: CovarianceModel, s, t):
    """Evaluate R(s, t); works elementwise on arrays."""
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(s_arr < 0) or np.any(t_arr < 0):
        raise DomainError("covariance_at requires s, t >= 0")
    out = _raw_covariance(model, s_arr, t_arr)
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


def covariance_matrix(model: CovarianceModel, grid: GridSpec, check: bool = True) -> np.ndarray:
    """Covariance of ``(G(t_1), ..., G(t_n))`` over the non-zero grid nodes.

    With ``check=True`` the matrix must admit a Cholesky factor after at most
    ``1e-6 * max(diag)`` diagonal jitter, otherwise :class:`NumericalError`.
    """
    t = grid.nodes[1:]
    M = covariance_at(model, t[:, None], t[None, :])
    M = 0.5 * (M + M.T)
    if check:
        cholesky_factor(model, grid)
    return M


@functools.lru_cache(maxsize=32)
def _factor_cached(model: CovarianceModel, grid: GridSpec):
    M = covariance_matrix(model, grid, check=False)
    scale = float(np.max(np.abs(np.diag(M))))
    if not np.isfinite(M).all() or scale <= 0:
        raise NumericalError("covariance matrix has non-finite or zero diagonal")
    jitter = _JITTER_START * scale
    eye = np.eye(M.shape[0])
    while jitter <= _JITTER_MAX * scale * (1 + 1e-9):
        try:
            L = np.linalg.cholesky(M + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
            continue
        L.setflags(write=False)
        return L, jitter
    lam_min = float(np.linalg.eigvalsh(M)[0])
    raise NumericalError(
        f"covariance matrix not positive definite after jitter {jitter / 10:.3g}; "
        f"smallest eigenvalue estimate {lam_min:.3g}"
    )


def cholesky_factor(model: CovarianceModel, grid: GridSpec):
    """Return ``(L, jitter)`` with ``L @ L.T == M + jitter * I``.

    The factor is cached and read-only, so it may be shared between workers.
    """
    return _factor_cached(model, grid)


def derive_seed(seed_base: int, *keys: int) -> int:
    """Deterministic 64-bit seed for a replication keyed by integers."""
    ss = np.random.SeedSequence([int(seed_base) % 2**64] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _normals(seed: int, n: int) -> np.ndarray:
    return np.random.Generator(np.random.Philox(int(seed))).standard_normal(n)


def sample_paths(model: CovarianceModel, grid: GridSpec, seeds: Sequence[int]) -> np.ndarray:
    """Draw one path per seed; returns shape ``(len(seeds), n_steps + 1)``.

    Row r is driven by the normal stream of ``seeds[r]`` alone.
    """
    L, _ = cholesky_factor(model, grid)
    n = grid.n_steps
    Z = np.empty((len(seeds), n))
    for r, seed in enumerate(seeds):
        Z[r] = _normals(seed, n)
    out = np.zeros((len(seeds), n + 1))
    out[:, 1:] = Z @ L.T
    return out


def sample_path(model: CovarianceModel, grid: GridSpec, seed: int) -> GaussianPath:
    """Draw a single path of G on ``grid``; bit-identical for equal inputs."""
    values = sample_paths(model, grid, [seed])[0]
    return GaussianPath(grid=grid, values=values, seed=int(seed))


def estimate_sup_abs(model: CovarianceModel, grid: GridSpec, n_reps: int, seed: int):
    """Monte Carlo estimate of ``E[max_i |G(t_i)|]``.

    Returns
    -------
    mean, stderr : float
        ``stderr`` is NaN when ``n_reps == 1``.
    """
    if n_reps < 1:
        raise DomainError("n_reps must be >= 1")
    seeds = [derive_seed(seed, r) for r in range(n_reps)]
    sups = np.max(np.abs(sample_paths(model, grid, seeds)), axis=1)
    se = float(np.std(sups, ddof=1) / np.sqrt(n_reps)) if n_reps > 1 else float("nan")
    return float(np.mean(sups)), se

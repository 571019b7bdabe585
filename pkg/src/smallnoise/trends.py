"""Time-varying linear multipliers theta(t) with analytic derivatives.

Each family ships derivatives of every order, which is what the bias
constant of the normal approximation needs (derivatives of
``J(t) = theta(t) x(t)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError

__all__ = [
    "Theta0",
    "ThetaK",
    "ThetaRho",
    "TrendFunction",
    "constant",
    "affine",
    "sine",
    "polynomial",
    "logistic",
    "make_trend",
    "integrate_trend",
    "ode_value",
    "j_derivative",
]


@dataclass(frozen=True)
class Theta0:
    """Bounded functions, no smoothness."""


@dataclass(frozen=True)
class ThetaK:
    """k-times differentiable with Lipschitz k-th derivative."""

    k: int
    lipschitz: float


@dataclass(frozen=True)
class ThetaRho:
    """k-times differentiable with gamma-Hoelder k-th derivative; rho = k + gamma."""

    k: int
    gamma: float
    holder: float

    def __post_init__(self):
        if self.k < 1 or not 0.0 < self.gamma <= 1.0:
            raise DomainError("ThetaRho needs k >= 1 and gamma in (0, 1]")

    @property
    def rho(self) -> float:
        return self.k + self.gamma


@dataclass(frozen=True, eq=False)
class TrendFunction:
    """The multiplier theta(t) of ``dX = theta(t) X dt + eps dG``.

    ``derivative(j, t)`` returns the j-th derivative; ``derivative(0, t)``
    equals ``eval(t)``. ``bound_L`` is the declared uniform bound on [0, T].
    """

    eval: Callable
    derivative: Optional[Callable]
    bound_L: float
    smoothness: object = field(default_factory=Theta0)
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.bound_L > 0:
            raise DomainError(f"bound_L={self.bound_L} must be positive")

    def __call__(self, t):
        return self.eval(t)

    def deriv(self, order: int, t):
        if order == 0:
            return self.eval(t)
        if self.derivative is None:
            raise DomainError(f"trend {self.name!r} has no analytic derivatives")
        return self.derivative(order, t)

    def validate(self, horizon_T: float, n_check: int = 2001, seed: int = 0) -> None:
        """Spot-check the declared bound and smoothness class on [0, T]."""
        t = np.linspace(0.0, horizon_T, n_check)
        vals = np.asarray(self.eval(t), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"trend {self.name!r} is not finite on [0, T]")
        if np.max(np.abs(vals)) > self.bound_L * (1 + 1e-12):
            raise DomainError(
                f"trend {self.name!r} exceeds bound_L={self.bound_L} "
                f"(max |theta| = {np.max(np.abs(vals)):.6g})"
            )
        sm = self.smoothness
        if isinstance(sm, (ThetaK, ThetaRho)):
            rng = np.random.default_rng(seed)
            x, y = rng.uniform(0.0, horizon_T, size=(2, 200))
            dx = np.asarray(self.deriv(sm.k, x), dtype=float)
            dy = np.asarray(self.deriv(sm.k, y), dtype=float)
            if isinstance(sm, ThetaK):
                lim, expo = sm.lipschitz, 1.0
            else:
                lim, expo = sm.holder, sm.gamma
            lhs = np.abs(dx - dy)
            rhs = lim * np.abs(x - y) ** expo
            if np.any(lhs > rhs * (1 + 1e-9) + 1e-12):
                raise DomainError(
                    f"trend {self.name!r} violates its declared smoothness {sm}"
                )


def _as_float(t):
    return np.asarray(t, dtype=float) if np.ndim(t) else float(t)


def constant(c: float, bound_L: Optional[float] = None, smoothness=None) -> TrendFunction:
    def f(t):
        return np.full_like(np.asarray(t, dtype=float), c) if np.ndim(t) else float(c)

    def d(order, t):
        return 0.0 * _as_float(t)

    return TrendFunction(f, d, bound_L or max(abs(c), 1e-12),
                         smoothness or ThetaK(6, 1e-12), "constant", {"c": c})


def affine(a: float, b: float, bound_L: Optional[float] = None, horizon_T: float = 1.0,
           smoothness=None) -> TrendFunction:
    """theta(t) = a + b t."""
    def f(t):
        return a + b * _as_float(t)

    def d(order, t):
        return b + 0.0 * _as_float(t) if order == 1 else 0.0 * _as_float(t)

    L = bound_L or max(abs(a), abs(a + b * horizon_T), 1e-12)
    return TrendFunction(f, d, L, smoothness or ThetaK(1, 1e-12), "affine",
                         {"a": a, "b": b})


def sine(a: float, b: float, freq: float = 1.0, phase: float = 0.0,
         bound_L: Optional[float] = None, smoothness=None) -> TrendFunction:
    """theta(t) = a + b sin(2 pi freq t + phase)."""
    w = 2 * math.pi * freq

    def f(t):
        return a + b * np.sin(w * _as_float(t) + phase)

    def d(order, t):
        return b * w ** order * np.sin(w * _as_float(t) + phase + order * math.pi / 2)

    default_sm = ThetaK(1, abs(b) * w ** 2)
    return TrendFunction(f, d, bound_L or abs(a) + abs(b), smoothness or default_sm,
                         "sine", {"a": a, "b": b, "freq": freq, "phase": phase})


def polynomial(coeffs: Sequence[float], bound_L: Optional[float] = None,
               horizon_T: float = 1.0, smoothness=None) -> TrendFunction:
    """theta(t) = sum_i coeffs[i] t**i."""
    p = Polynomial(np.asarray(coeffs, dtype=float))

    def f(t):
        return p(_as_float(t))

    def d(order, t):
        return p.deriv(order)(_as_float(t))

    if bound_L is None:
        grid = np.linspace(0.0, horizon_T, 4001)
        crit = [r.real for r in p.deriv().roots() if abs(r.imag) < 1e-12
                and 0 <= r.real <= horizon_T] if p.degree() > 1 else []
        bound_L = float(np.max(np.abs(p(np.concatenate([grid, crit]))))) * (1 + 1e-9)
        bound_L = max(bound_L, 1e-12)
    return TrendFunction(f, d, bound_L, smoothness or Theta0(), "polynomial",
                         {"coeffs": [float(c) for c in coeffs]})


def _logistic_polys(order: int):
    # sigma^{(n)} = P_n(sigma) for unit rate; P_{n+1} = P_n' * (s - s^2)
    s_minus_s2 = Polynomial([0.0, 1.0, -1.0])
    polys = [Polynomial([0.0, 1.0])]
    for _ in range(order):
        polys.append(polys[-1].deriv() * s_minus_s2)
    return polys


def logistic(a: float, b: float, rate: float = 1.0, center: float = 0.5,
             bound_L: Optional[float] = None, smoothness=None) -> TrendFunction:
    """theta(t) = a + b / (1 + exp(-rate (t - center)))."""
    def sig(t):
        return 0.5 * (1.0 + np.tanh(0.5 * rate * (_as_float(t) - center)))

    def f(t):
        return a + b * sig(t)

    def d(order, t):
        return b * rate ** order * _logistic_polys(order)[order](sig(t))

    L = bound_L or max(abs(a), abs(a + b), 1e-12)
    return TrendFunction(f, d, L, smoothness or Theta0(), "logistic",
                         {"a": a, "b": b, "rate": rate, "center": center})


_FAMILIES = {
    "constant": constant,
    "affine": affine,
    "sine": sine,
    "polynomial": polynomial,
    "logistic": logistic,
}


def make_trend(form: str, params: dict, bound_L=None, smoothness=None,
               horizon_T: float = 1.0) -> TrendFunction:
    """Build a trend from a family name and keyword parameters."""
    if form not in _FAMILIES:
        raise DomainError(f"unknown trend form {form!r}; expected one of {sorted(_FAMILIES)}")
    kwargs = dict(params)
    if form in ("affine", "polynomial"):
        kwargs["horizon_T"] = horizon_T
    return _FAMILIES[form](**kwargs, bound_L=bound_L, smoothness=smoothness)


def integrate_trend(trend: TrendFunction, t: float, n_panels: int = 4096) -> float:
    """Composite Simpson approximation of the integral of theta over [0, t]."""
    if t == 0:
        return 0.0
    s = np.linspace(0.0, t, 2 * n_panels + 1)
    f = np.asarray(trend.eval(s), dtype=float)
    h = t / (2 * n_panels)
    return float(h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum()))


def ode_value(trend: TrendFunction, x0: float, t: float) -> float:
    """x(t) = x0 exp(int_0^t theta)."""
    return x0 * math.exp(integrate_trend(trend, t))


def j_derivative(trend: TrendFunction, x0: float, t: float, order: int) -> float:
    """order-th time derivative of J(t) = theta(t) x(t).

    Uses J = x' and Leibniz on x' = theta x:
    x^{(n+1)} = sum_i C(n, i) theta^{(i)} x^{(n-i)}.
    """
    if order < 0:
        raise DomainError("order must be >= 0")
    theta_d = [float(trend.deriv(i, t)) for i in range(order + 1)]
    ratios = [1.0]  # x^{(n)} / x
    for n in range(order + 1):
        ratios.append(sum(math.comb(n, i) * theta_d[i] * ratios[n - i] for i in range(n + 1)))
    return ode_value(trend, x0, t) * ratios[order + 1]

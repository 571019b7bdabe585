"""Compactly supported smoothing kernels and their moment conditions.

A kernel here is bounded, vanishes outside ``[A, B]`` (``A < 0 < B``),
integrates to one, and has order ``k`` when its moments ``1..k`` vanish.
Higher-order kernels are polynomials on the support, built from a Legendre
basis so the moment constraints form a small well-conditioned system.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial import legendre as L

from .errors import DomainError, NumericalError

__all__ = [
    "KernelFunction",
    "KernelReport",
    "builtin",
    "build_higher_order",
    "kernel_from_name",
    "moment",
    "abs_moment",
    "verify_conditions",
]

NORMALIZATION_TOL = 1e-12
MOMENT_TOL = 1e-10
_QUAD_NODES = 200
_MAX_MOMENT = 20


@dataclass(frozen=True, eq=False)
class KernelFunction:
    """Kernel ``K(u)`` with support ``[support_A, support_B]``.

    ``breakpoints`` lists interior points where K is not smooth; quadrature
    splits there. ``coefficients`` holds the Legendre coefficients (on the
    support mapped to [-1, 1]) for polynomial kernels.
    """

    eval: Callable
    support_A: float
    support_B: float
    order_k: int
    name: str
    breakpoints: Tuple[float, ...] = ()
    coefficients: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.support_A < 0 < self.support_B):
            raise DomainError("kernel support must satisfy A < 0 < B")

    def __call__(self, u):
        return self.eval(u)


def _on_support(u, A, B):
    u = np.asarray(u, dtype=float)
    return u, (u >= A) & (u <= B)


def _uniform(u):
    u, inside = _on_support(u, -1.0, 1.0)
    return np.where(inside, 0.5, 0.0)


def _triangular(u):
    u, inside = _on_support(u, -1.0, 1.0)
    return np.where(inside, 1.0 - np.abs(u), 0.0)


def _epanechnikov(u):
    u, inside = _on_support(u, -1.0, 1.0)
    return np.where(inside, 0.75 * (1.0 - u * u), 0.0)


_BUILTINS = {
    "uniform": (_uniform, ()),
    "triangular": (_triangular, (0.0,)),
    "epanechnikov": (_epanechnikov, ()),
}


def builtin(name: str) -> KernelFunction:
    """One of ``uniform``, ``triangular``, ``epanechnikov`` (all order 1)."""
    try:
        fn, bps = _BUILTINS[name]
    except KeyError:
        raise DomainError(f"unknown kernel {name!r}; expected one of {sorted(_BUILTINS)}") from None
    return KernelFunction(fn, -1.0, 1.0, 1, name, bps)


def _gauss_legendre(a, b, n=_QUAD_NODES):
    x, w = L.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _pieces(kernel: KernelFunction, extra=()):
    cuts = sorted({kernel.support_A, kernel.support_B,
                   *[p for p in (*kernel.breakpoints, *extra)
                     if kernel.support_A < p < kernel.support_B]})
    return list(zip(cuts[:-1], cuts[1:]))


def _integrate(kernel: KernelFunction, integrand, extra_breaks=()):
    total = 0.0
    for a, b in _pieces(kernel, extra_breaks):
        x, w = _gauss_legendre(a, b)
        total += float(np.dot(w, integrand(x)))
    return total


def moment(kernel: KernelFunction, j: int) -> float:
    """``int u^j K(u) du`` by Gauss-Legendre (200 nodes per smooth piece)."""
    if not 0 <= j <= _MAX_MOMENT:
        raise DomainError(f"moment order j={j} must lie in [0, {_MAX_MOMENT}]")
    return _integrate(kernel, lambda u: u ** j * kernel.eval(u))


def _sign_changes(kernel: KernelFunction):
    if kernel.coefficients is None:
        return ()
    A, B = kernel.support_A, kernel.support_B
    roots = L.legroots(kernel.coefficients) if len(kernel.coefficients) > 1 else []
    out = []
    for r in np.atleast_1d(roots):
        if abs(np.imag(r)) < 1e-12 and -1 < np.real(r) < 1:
            out.append(A + (np.real(r) + 1.0) * 0.5 * (B - A))
    return tuple(out)


def abs_moment(kernel: KernelFunction, j: int) -> float:
    """``int |u^j K(u)| du``."""
    return _integrate(kernel, lambda u: np.abs(u ** j * kernel.eval(u)),
                      _sign_changes(kernel) + (0.0,))


def _vanishing_order(kernel: KernelFunction, limit: int = _MAX_MOMENT) -> int:
    k = 0
    while k < limit and abs(moment(kernel, k + 1)) <= MOMENT_TOL:
        k += 1
    return k


def build_higher_order(k: int, support=(-1.0, 1.0)) -> KernelFunction:
    """Polynomial kernel of degree <= k whose moments 1..k vanish.

    Solves ``int u^j K = delta_{j0}`` (j = 0..k) for Legendre coefficients on
    the support. Even order requests on symmetric supports come out one
    order higher, since odd moments vanish by symmetry.
    """
    if not 1 <= k <= 10:
        raise DomainError(f"k={k} must lie in [1, 10]")
    A, B = map(float, support)
    if not A < 0 < B:
        raise DomainError("support must satisfy A < 0 < B")
    u, w = _gauss_legendre(A, B)
    x = (2.0 * u - (A + B)) / (B - A)
    basis = np.stack([L.legval(x, np.eye(k + 1)[i]) for i in range(k + 1)])
    powers = np.stack([u ** j for j in range(k + 1)])
    system = (powers * w) @ basis.T
    cond = np.linalg.cond(system)
    if cond > 1e12:
        raise NumericalError(f"moment system ill-conditioned (cond={cond:.3g})")
    rhs = np.zeros(k + 1)
    rhs[0] = 1.0
    coef = np.linalg.solve(system, rhs)
    coef.setflags(write=False)

    def K(v):
        v, inside = _on_support(v, A, B)
        z = (2.0 * v - (A + B)) / (B - A)
        return np.where(inside, L.legval(z, coef), 0.0)

    draft = KernelFunction(K, A, B, k, f"order:{k}", (), coef)
    order = _vanishing_order(draft)
    if order < k:
        raise NumericalError(f"constructed kernel only reaches order {order} < {k}")
    return KernelFunction(K, A, B, order, f"order:{k}", (), coef)


def kernel_from_name(name: str) -> KernelFunction:
    """Resolve ``"uniform"``, ``"triangular"``, ``"epanechnikov"`` or ``"order:k"``."""
    m = re.fullmatch(r"order:(\d+)", name.strip())
    if m:
        return build_higher_order(int(m.group(1)))
    return builtin(name)


@dataclass
class KernelReport:
    a2_ok: bool
    a3_order: int
    abs_moments: list
    normalization_error: float
    support_ok: bool
    bounded: bool
    l2_norm_sq: float
    moments: list

    def as_dict(self) -> dict:
        return {
            "a2_ok": self.a2_ok,
            "a3_order": self.a3_order,
            "normalization_error": self.normalization_error,
            "support_ok": self.support_ok,
            "bounded": self.bounded,
            "l2_norm_sq": self.l2_norm_sq,
            "moments": self.moments,
            "abs_moments": self.abs_moments,
        }


def verify_conditions(kernel: KernelFunction) -> KernelReport:
    """Check normalization, support, boundedness and vanishing moments.

    Failures are reported in the returned record, never raised.
    """
    A, B = kernel.support_A, kernel.support_B
    width = B - A
    outside = np.concatenate([np.linspace(A - 2 * width, A, 51)[:-1],
                              np.linspace(B, B + 2 * width, 51)[1:]])
    support_ok = bool(np.all(np.asarray(kernel.eval(outside), dtype=float) == 0.0))
    inside = np.asarray(kernel.eval(np.linspace(A, B, 1001)), dtype=float)
    bounded = bool(np.all(np.isfinite(inside)))
    norm_err = abs(moment(kernel, 0) - 1.0)
    a2_ok = bool(norm_err <= NORMALIZATION_TOL and support_ok and bounded)
    order = _vanishing_order(kernel)
    moments = [moment(kernel, j) for j in range(min(order + 2, _MAX_MOMENT) + 1)]
    abs_m = [abs_moment(kernel, j) for j in range(min(order + 1, _MAX_MOMENT) + 1)]
    l2 = _integrate(kernel, lambda u: np.asarray(kernel.eval(u), dtype=float) ** 2)
    return KernelReport(a2_ok, order, abs_m, norm_err, support_ok, bounded, l2, moments)

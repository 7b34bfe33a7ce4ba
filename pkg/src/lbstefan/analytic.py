"""Similarity solution of the one-dimensional two-phase Stefan problem.

Melting of a semi-infinite bar held at ``theta = 1`` on the left, with the
solid far field at ``theta0 < 0``. The front moves as ``x_f = 2*lam*sqrt(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "erf",
    "erfc",
    "StefanCaseParams",
    "AnalyticSolution",
    "stefan_residual",
    "solve_lambda",
    "exact_theta",
    "interface_position",
    "initial_time_for_front",
]

LAMBDA_BRACKET = (1e-8, 5.0)


def erf(z):
    """Error function, accurate to a few ulp (|err| < 1e-15 on |z| <= 6)."""
    return special.erf(z)


def erfc(z):
    """Complementary error function without cancellation for large ``z``."""
    return special.erfc(z)


@dataclass(frozen=True)
class StefanCaseParams:
    Ste: float
    theta0: float
    alpha: float = 1.0
    k: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if not self.Ste > 0:
            raise ValueError(f"Ste must be positive, got {self.Ste}")
        if not self.theta0 < 0:
            raise ValueError(f"theta0 must be negative, got {self.theta0}")
        for name in ("alpha", "k", "rho"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def stefan_residual(lam: float, params: StefanCaseParams) -> float:
    """Left minus right side of the transcendental equation for ``lam``.

    ``exp(-x^2)/erfc(x)`` is evaluated as ``1/erfcx(x)`` so the right end
    of the bracket does not underflow.
    """
    p = params
    s = math.sqrt(p.alpha)
    liquid = math.exp(-lam * lam) / special.erf(lam)
    solid = p.theta0 * p.k / s / special.erfcx(lam / s)
    return liquid + solid - p.rho * lam * math.sqrt(math.pi) / p.Ste


@dataclass(frozen=True)
class AnalyticSolution:
    params: StefanCaseParams
    lam: float

    @property
    def residual(self) -> float:
        return stefan_residual(self.lam, self.params)

    def theta(self, x, t):
        return exact_theta(self, x, t)

    def front(self, t):
        return interface_position(self, t)


def solve_lambda(params: StefanCaseParams, xtol: float = 1e-14) -> AnalyticSolution:
    """Root of the Stefan condition by bracketed secant/bisection (Brent)."""
    from scipy.optimize import brentq

    lo, hi = LAMBDA_BRACKET
    r_lo, r_hi = stefan_residual(lo, params), stefan_residual(hi, params)
    if not (r_lo > 0 > r_hi):
        raise ValueError(
            f"no sign change of the Stefan residual on [{lo}, {hi}] "
            f"(r={r_lo:.3e}, {r_hi:.3e}) for {params}"
        )
    lam = brentq(stefan_residual, lo, hi, args=(params,), xtol=xtol, rtol=4 * np.finfo(float).eps)
    return AnalyticSolution(params, float(lam))


def exact_theta(sol: AnalyticSolution, x, t):
    """Temperature of the similarity solution at positions ``x`` and time ``t``."""
    if not t > 0:
        raise ValueError(f"exact solution needs t > 0, got {t}")
    p, lam = sol.params, sol.lam
    x = np.asarray(x, dtype=np.float64)
    sqt = math.sqrt(t)
    liquid = 1.0 - special.erf(x / (2.0 * sqt)) / special.erf(lam)
    s = math.sqrt(p.alpha)
    solid = p.theta0 - p.theta0 * special.erfc(x / (2.0 * s * sqt)) / special.erfc(lam / s)
    out = np.where(x <= 2.0 * lam * sqt, liquid, solid)
    return out[()] if out.ndim == 0 else out


def interface_position(sol: AnalyticSolution, t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("interface position needs t >= 0")
    out = 2.0 * sol.lam * np.sqrt(t)
    return out[()] if out.ndim == 0 else out


def initial_time_for_front(sol: AnalyticSolution, x_target: float) -> float:
    """Time at which the exact front reaches ``x_target``."""
    if not x_target > 0:
        raise ValueError(f"x_target must be positive, got {x_target}")
    return (x_target / (2.0 * sol.lam)) ** 2

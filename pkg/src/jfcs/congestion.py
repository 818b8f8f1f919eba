"""Utility functions and the closed-form per-slot congestion controller."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq


class ConcavityError(ValueError):
    pass


@dataclass(frozen=True)
class UtilityFunction:
    value: Callable
    derivative: Callable
    inverse_derivative: Callable | None = None
    domain: tuple[float, float] = (0.0, np.inf)

    def inv(self, y):
        """Inverse of U' (vectorised); numeric root-finding if not given."""
        if self.inverse_derivative is not None:
            return self.inverse_derivative(y)
        lo, hi = self.domain
        hi = hi if np.isfinite(hi) else 1e12

        def one(yy):
            if yy >= self.derivative(lo):
                return lo
            if yy <= self.derivative(hi):
                return hi
            return brentq(lambda a: self.derivative(a) - yy, lo, hi, xtol=1e-14, rtol=1e-14)

        return np.vectorize(one, otypes=[float])(y)


def log_utility(offset: float = 1e-3) -> UtilityFunction:
    """U(a) = log(offset + a); U'^-1(0) = +inf."""

    def inv(y):
        y = np.asarray(y, float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(y > 0, 1.0 / np.where(y > 0, y, 1.0) - offset, np.inf)

    return UtilityFunction(lambda a: np.log(offset + np.asarray(a, float)),
                           lambda a: 1.0 / (offset + np.asarray(a, float)), inv)


def optimal_rate(qhat, phi, tau, a_max, U: UtilityFunction, unit=1.0):
    """Maximiser of phi*U(a) - (qhat/tau)*a on [0, a_max].

    Queue (bits) and rates (bits/s) enter U in multiples of ``unit``; the
    result is returned in bits/s.
    """
    if phi <= 0 or tau <= 0:
        raise ValueError("phi and tau must be positive")
    qhat = np.asarray(qhat, float)
    if np.any(qhat < 0):
        raise ValueError("queue must be nonnegative")
    a = U.inv(qhat / unit / (phi * tau))
    return np.clip(a, 0.0, a_max / unit) * unit


def curvature_bounds(U: UtilityFunction, domain, grid: int = 1001, h=None):
    """(psi, Psi): min and max of -U'' over a grid via central differences.

    Raises ConcavityError when U is not increasing or -U'' is not clearly
    positive somewhere; values within the rounding noise of the difference
    quotient count as zero curvature.
    """
    lo, hi = domain
    if grid < 2 or not hi > lo:
        raise ValueError("need at least two grid points on a proper interval")
    xs = np.linspace(lo, hi, grid)
    if h is None:
        h = 1e-5 * (hi - lo)
    f = U.value
    fx = f(xs)
    curv = -(f(xs + h) - 2.0 * fx + f(xs - h)) / h ** 2
    noise = 64.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(fx)))) / h ** 2
    if np.any(~np.isfinite(curv)) or np.min(curv) <= noise:
        raise ConcavityError("utility is not strictly concave on the domain")
    if np.any(np.asarray(U.derivative(xs)) <= 0):
        raise ConcavityError("utility is not increasing on the domain")
    return float(np.min(curv)), float(np.max(curv))

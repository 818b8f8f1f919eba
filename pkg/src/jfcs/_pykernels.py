"""Pure-Python kernels. Reference semantics for the compiled ``_ckernels``.

The water-filling routines use plain float loops so that they reproduce the
compiled version bit for bit; the MRT solver is vectorised with numpy.
"""

from __future__ import annotations

import math

import numpy as np


def waterfill_total(mu, a, b, pmin):
    total = 0.0
    for k in range(len(a)):
        p = a[k] / mu - b[k]
        total += pmin[k] if p < pmin[k] else p
    return total


def waterfill_power(mu, a, b, pmin):
    out = np.empty(len(a))
    for k in range(len(a)):
        if mu > 0.0:
            p = a[k] / mu - b[k]
        else:
            p = math.inf if a[k] > 0.0 else -b[k]
        out[k] = pmin[k] if p < pmin[k] else p
    return out


def waterfill_bisect(a, b, pmin, p_max, rel_tol=1e-9, max_iter=4000):
    """Bisection on the RU price mu so that sum_k p_k(mu) meets the budget.

    Returns (mu, powers, iterations). The upper bracket is returned, so the
    powers never exceed the budget. Caller checks sum(pmin) <= p_max.
    """
    n = len(a)
    amax = 0.0
    for k in range(n):
        if a[k] > amax:
            amax = a[k]
    if n == 0 or amax <= 0.0:
        return 0.0, waterfill_power(0.0, a, b, pmin), 0
    hi = amax / (p_max / (10.0 * n))
    while waterfill_total(hi, a, b, pmin) > p_max:
        hi *= 2.0
    lo = 0.0
    delta = rel_tol * hi
    it = 0
    while hi - lo > delta and it < max_iter:
        mid = 0.5 * (lo + hi)
        if waterfill_total(mid, a, b, pmin) <= p_max:
            hi = mid
        else:
            lo = mid
        it += 1
    return hi, waterfill_power(hi, a, b, pmin), it


def project_capped_simplex(y, cap):
    """Euclidean projection onto {p >= 0, sum p <= cap}."""
    y = np.asarray(y, float)
    p = np.maximum(y, 0.0)
    if p.sum() <= cap:
        return p
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, len(u) + 1)
    hits = np.nonzero(u - css / idx > 0)[0]
    rho = hits[-1] if len(hits) else 0  # rounding can hide the first index
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


def project_groups(x, group, caps):
    out = np.empty_like(x)
    for g in range(len(caps)):
        sel = group == g
        if np.any(sel):
            out[sel] = project_capped_simplex(x[sel], caps[g])
    return out


def surrogate_terms(x, nu, G, vbar, zbar):
    """Per-link surrogate value (nats) at ``x`` for expansion point (vbar, zbar)."""
    v = nu * x
    z = 1.0 + G @ x
    c = vbar / (zbar * (zbar + vbar))
    s = (np.log1p(vbar / zbar) - vbar / zbar + 2.0 * np.sqrt(vbar * v) / zbar - c * (z + v))
    return s, v, z, c


def project_groups_ball(y, group, caps):
    """Projection onto {y >= 0, sum_group y^2 <= cap} for every group."""
    out = np.maximum(np.asarray(y, float), 0.0)
    for g in range(len(caps)):
        sel = group == g
        n2 = float(out[sel] @ out[sel])
        if n2 > caps[g]:
            out[sel] *= math.sqrt(caps[g] / n2)
    return out


def penalised_objective(y, nu, G, w, vbar, zbar, rbar, rho):
    """Penalised surrogate and its gradient in root-power coordinates x = y^2.

    With x = y^2 every surrogate term is a*y - b*y^2, so the objective is a
    concave quadratic without the sqrt singularity at zero power.
    """
    x = y * y
    s, v, z, c = surrogate_terms(x, nu, G, vbar, zbar)
    short = np.maximum(rbar - s, 0.0)
    short[~np.isfinite(rbar)] = 0.0
    f = float(w @ s - rho * short.sum())
    omega = w + rho * (short > 0)
    alpha = 2.0 * np.sqrt(vbar * nu) / zbar
    grad = omega * (alpha - 2.0 * c * nu * y) - 2.0 * y * (G.T @ (omega * c))
    return f, grad


def pg_ascent(x0, nu, G, w, vbar, zbar, rbar, group, caps, rho, max_steps=500, tol=1e-6):
    """Projected-gradient ascent with Armijo backtracking on the penalised
    surrogate, run in root-power coordinates. Inactive links carry
    ``rbar = -inf``. Takes and returns powers; returns (x, steps)."""
    y = project_groups_ball(np.sqrt(np.maximum(np.asarray(x0, float), 0.0)), group, caps)
    f, g = penalised_objective(y, nu, G, w, vbar, zbar, rbar, rho)
    step = 1.0
    n = 0
    for n in range(1, max_steps + 1):
        gnorm = float(np.max(np.abs(g))) if len(g) else 0.0
        if gnorm == 0.0:
            break
        alpha = min(step, 1e6) if step > 0 else 1.0
        while True:
            yn = project_groups_ball(y + alpha * g, group, caps)
            fn, gn = penalised_objective(yn, nu, G, w, vbar, zbar, rbar, rho)
            if fn >= f + 1e-4 * float(g @ (yn - y)) or alpha < 1e-16:
                break
            alpha *= 0.5
        moved = float(np.max(np.abs(yn - y)))
        y, f, g = yn, fn, gn
        step = 2.0 * alpha
        if moved / alpha < tol or moved < 1e-15:
            break
    return y * y, n

"""Maximum-ratio transmission scheduler.

Beam directions are fixed to the channels; only the per-link powers are
optimised. The rate ln(1 + v/z) of every link is replaced by a concave
minorant that is tight at the current point, and the resulting convex
program is solved by projected-gradient ascent. Repeating this gives a
monotone sequence of feasible power allocations.

Internally powers are normalised by the RU budget (x = p / P_max) and gains
by the noise power, so every link sees unit noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

LN2 = np.log(2.0)


@dataclass
class MrtGains:
    """nu[k, j] = ||h_kj||^2, cross[k, k', j] = |h_kj^H h_k'j|^2 / nu[k', j]."""

    nu: np.ndarray
    cross: np.ndarray
    n0: float
    mask: np.ndarray

    @classmethod
    def from_channels(cls, channels, mask, n0) -> "MrtGains":
        k, j_tot = mask.shape
        nu = np.zeros((k, j_tot))
        cross = np.zeros((k, k, j_tot))
        for j, h in enumerate(channels):
            gram = h.conj() @ h.T
            nu[:, j] = np.real(np.diag(gram))
            cross[:, :, j] = np.abs(gram) ** 2 / nu[None, :, j]
        return cls(nu, cross, float(n0), np.asarray(mask, bool))

    def links(self):
        """(k, j) index arrays of the served links, ordered by UE then RU."""
        kk, jj = np.nonzero(self.mask)
        return kk, jj

    def link_matrix(self):
        """Per-link gains nu (L,) and interference matrix G (L, L).

        G[l, m] is the power that link m's beam leaks into link l's receiver
        per watt; the diagonal is zero.
        """
        kk, jj = self.links()
        nu = self.nu[kk, jj]
        g = self.cross[kk[:, None], kk[None, :], jj[None, :]]
        np.fill_diagonal(g, 0.0)
        return nu, g


def mrt_sinr(p, gains: MrtGains, k=None, j=None):
    """SINR of every served link for powers ``p`` (K, J); zeros off-path.

    With ``k`` and ``j`` given, returns that link's value only.
    """
    kk, jj = gains.links()
    nu, g = gains.link_matrix()
    x = np.asarray(p, float)[kk, jj]
    out = np.zeros(gains.mask.shape)
    out[kk, jj] = x * nu / (gains.n0 + g @ x)
    if k is not None:
        return float(out[k, j])
    return out


def concave_lower_bound(v, z, vbar, zbar):
    """Global concave minorant of ln(1 + v/z), tight at (vbar, zbar)."""
    v, z = np.asarray(v, float), np.asarray(z, float)
    return (np.log1p(vbar / zbar) - vbar / zbar + 2.0 * np.sqrt(vbar * v) / zbar
            - vbar * (z + v) / (zbar * (zbar + vbar)))


@dataclass
class LinkProblem:
    """Normalised weighted-rate problem over the served links.

    ``rbar`` is the per-link minimum rate in nats per channel use, -inf where
    inactive. ``scale`` maps x back to watts.
    """

    nu: np.ndarray
    g: np.ndarray
    w: np.ndarray
    rbar: np.ndarray
    group: np.ndarray
    caps: np.ndarray
    scale: np.ndarray

    @property
    def active(self):
        return np.isfinite(self.rbar)

    def true_rates(self, x):
        return np.log1p(self.nu * x / (1.0 + self.g @ x))

    def objective(self, x):
        return float(self.w @ self.true_rates(x))

    def surrogate(self, x, xbar):
        vbar, zbar = self.expansion(xbar)
        return concave_lower_bound(self.nu * x, 1.0 + self.g @ x, vbar, zbar)

    def expansion(self, xbar):
        return self.nu * xbar, 1.0 + self.g @ xbar

    def feasible(self, x):
        """Strictly positive slack on every active minimum rate (true rates)."""
        return not self.active.any() or self.violation(self.true_rates(x)) < 0

    def violation(self, s):
        if not self.active.any():
            return 0.0
        return float(np.max(self.rbar[self.active] - s[self.active]))

    def equal_split(self):
        counts = np.bincount(self.group, minlength=len(self.caps))
        return self.caps[self.group] / counts[self.group]


def link_problem(gains: MrtGains, qhat, rbar_bits, p_max, bw, tau) -> tuple:
    """Build the normalised problem; returns (problem, link UE idx, link RU idx)."""
    kk, jj = gains.links()
    nu, g = gains.link_matrix()
    p_max = np.broadcast_to(np.asarray(p_max, float), (gains.mask.shape[1],))
    scale = p_max[jj]
    qhat = np.asarray(qhat, float)
    qmax = qhat.max() if qhat.size else 0.0
    w = qhat[kk] / qmax if qmax > 0 else np.zeros(len(kk))
    rb = np.asarray(rbar_bits, float)[kk, jj]
    rbar = np.where(rb > 0, rb * LN2 / (bw * tau), -np.inf)
    prob = LinkProblem(nu * scale / gains.n0, g * scale[None, :] / gains.n0, w, rbar,
                       jj.astype(np.intp), np.ones(len(p_max)), scale)
    return prob, kk, jj


@dataclass
class InnerResult:
    x: np.ndarray
    surrogate: float
    steps: int
    rho: float
    restored: bool = False


def solve_inner_convex(prob: LinkProblem, x_prev, rho=1.0, max_steps=500, tol=1e-6,
                       feas_tol=1e-9, max_doublings=30) -> InnerResult:
    """Maximise the weighted surrogate expanded at ``x_prev``.

    The minimum rates enter as an exact hinge penalty whose weight doubles
    until the ascent returns a feasible point. If it never does, the point is
    pulled back along the segment towards ``x_prev``. The result is never
    worse than ``x_prev``.
    """
    x_prev = np.asarray(x_prev, float)
    vbar, zbar = prob.expansion(x_prev)
    f_prev = float(prob.w @ prob.surrogate(x_prev, x_prev))
    steps = 0
    x = x_prev
    for _ in range(max_doublings):
        x, n = kernels.pg_ascent(x_prev, prob.nu, prob.g, prob.w, vbar, zbar, prob.rbar,
                                 prob.group, prob.caps, rho, max_steps, tol)
        steps += n
        if prob.violation(prob.surrogate(x, x_prev)) <= feas_tol:
            break
        rho *= 2.0
    restored = False
    if prob.violation(prob.surrogate(x, x_prev)) > feas_tol:
        # the surrogate constraint set is convex and holds at x_prev
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            xm = x_prev + mid * (x - x_prev)
            if prob.violation(prob.surrogate(xm, x_prev)) <= feas_tol:
                lo = mid
            else:
                hi = mid
        x = x_prev + lo * (x - x_prev)
        restored = True
    f = float(prob.w @ prob.surrogate(x, x_prev))
    if f < f_prev:
        x, f = x_prev.copy(), f_prev
    return InnerResult(x, f, steps, rho, restored)


def find_feasible_init(prob: LinkProblem, rounds=20, margin=0.05, max_steps=500):
    """Power point meeting every active minimum rate, or None if none is found.

    Each round re-expands the minorant at the current point and drives the
    surrogate slacks towards ``margin`` nats by penalised ascent with zero
    rate weights, i.e. it raises the smallest slacks first. Declares
    infeasibility at once when a requirement exceeds the interference-free
    capacity of its link, and early when a round no longer improves the
    worst slack.
    """
    x = prob.equal_split()
    act = prob.active
    if not act.any():
        return x
    if np.any(prob.rbar[act] > np.log1p(prob.nu[act])):
        return None
    zero = np.zeros(len(x))
    target = np.where(act, prob.rbar + margin, -np.inf)
    worst = prob.violation(prob.true_rates(x))
    for _ in range(rounds):
        if worst < 0:
            return _lift(prob, x)
        vbar, zbar = prob.expansion(x)
        x, _ = kernels.pg_ascent(x, prob.nu, prob.g, zero, vbar, zbar, target, prob.group,
                                 prob.caps, 1.0, max_steps, 1e-9)
        new = prob.violation(prob.true_rates(x))
        if new > worst - 1e-9 and new >= 0:
            break
        worst = min(worst, new)
    if prob.violation(prob.true_rates(x)) < 0:
        return _lift(prob, x)
    return None


def _lift(prob: LinkProblem, x, frac=1e-3):
    """Give links parked at zero a little power if the constraints allow it.

    A link at exactly zero power has a zero minorant and can never recover.
    """
    dead = x <= 1e-12
    if not dead.any():
        return x
    counts = np.bincount(prob.group, minlength=len(prob.caps))
    room = prob.caps[prob.group] / counts[prob.group]
    for f in (frac, frac * 1e-2, frac * 1e-4):
        y = kernels.project_groups(np.where(dead, f * room, x), prob.group, prob.caps)
        if prob.feasible(y):
            return y
    return x


@dataclass
class MrtResult:
    power: np.ndarray          # (K, J) W
    rate: np.ndarray           # (K, J) bits/s
    objective: list = field(default_factory=list)   # true weighted rate per iterate
    surrogate: list = field(default_factory=list)   # surrogate value per inner solve
    iterations: int = 0
    infeasible: bool = False
    starts: int = 0


def _extrapolate(prob: LinkProblem, x_old, x_new, f_new, max_doublings=30):
    """Push further along x_new - x_old while the true objective improves and
    the minimum rates still hold. The minorant only lets powers grow by a
    factor close to 1 per iteration at high SINR, which this step removes."""
    d = x_new - x_old
    if not np.any(d):
        return x_new, f_new
    best, fbest = x_new, f_new
    t = 2.0
    for _ in range(max_doublings):
        y = kernels.project_groups(x_old + t * d, prob.group, prob.caps)
        fy = prob.objective(y)
        if fy <= fbest or not prob.feasible(y):
            break
        best, fbest = y, fy
        t *= 2.0
    return best, fbest


def _run_ia(prob: LinkProblem, x, max_iter, tol, inner_steps, inner_tol, res: MrtResult):
    f = prob.objective(x)
    res.objective.append(f)
    for it in range(max_iter):
        inner = solve_inner_convex(prob, x, 1.0, inner_steps, inner_tol)
        res.surrogate.append(inner.surrogate)
        x_new, f_new = _extrapolate(prob, x, inner.x, prob.objective(inner.x))
        res.objective.append(f_new)
        res.iterations = it + 1
        x = x_new
        if abs(f_new - f) <= tol * max(abs(f), 1e-300):
            break
        f = f_new
    return x


def _starting_points(prob: LinkProblem, x0, kk, frac=1e-3):
    """Feasible starts: the given point, then one per UE favouring that UE's
    links with the others nearly silent."""
    yield x0
    counts = np.bincount(prob.group, minlength=len(prob.caps))
    share = prob.caps[prob.group] / counts[prob.group]
    for k in np.unique(kk):
        mine = kk == k
        y = np.where(mine, 1.0, frac * share)
        # the favoured links split what the others leave
        for g in np.unique(prob.group[mine]):
            sel = prob.group == g
            rest = y[sel & ~mine].sum()
            y[sel & mine] = (prob.caps[g] - rest) / np.sum(sel & mine)
        if prob.feasible(y):
            yield y


def ia_schedule(gains: MrtGains, qhat, rbar_bits, p_max, bw, tau, max_iter=50, tol=1e-5,
                inner_steps=500, inner_tol=1e-6, feas_rounds=20, multistart=True) -> MrtResult:
    """Iterated inner approximation for the weighted sum rate with minimum rates.

    ``rbar_bits`` (K, J) are per-slot bit requirements (<= 0 inactive). When no
    feasible starting point is found the minimum rates are dropped for this
    slot and the event is flagged. With ``multistart`` the iteration is also
    run from one start per UE and the best final point is kept; ``objective``
    then records the winning run.
    """
    prob, kk, jj = link_problem(gains, qhat, rbar_bits, p_max, bw, tau)
    infeasible = False
    x = find_feasible_init(prob, feas_rounds) if len(kk) else np.zeros(0)
    if x is None:
        log.info("MRT: minimum rates infeasible, dropped for this slot")
        infeasible = True
        prob.rbar = np.full(len(kk), -np.inf)
        x = prob.equal_split()
    best = MrtResult(np.zeros(gains.mask.shape), np.zeros(gains.mask.shape),
                     infeasible=infeasible)
    if len(kk) and np.any(prob.w > 0):
        starts = _starting_points(prob, x, kk) if multistart else [x]
        fbest = -np.inf
        n = 0
        for x0 in starts:
            run = MrtResult(best.power, best.rate, infeasible=infeasible)
            xr = _run_ia(prob, x0, max_iter, tol, inner_steps, inner_tol, run)
            n += 1
            if run.objective[-1] > fbest:
                fbest, best, x = run.objective[-1], run, xr
        best.starts = n
    best.power = np.zeros(gains.mask.shape)
    best.power[kk, jj] = x * prob.scale
    best.rate = bw / LN2 * np.log1p(mrt_sinr(best.power, gains))
    return best


def equal_power_schedule(gains: MrtGains, p_max, bw) -> MrtResult:
    """Fixed allocation: every UE served by an RU gets P_max / n there."""
    mask = gains.mask
    p_max = np.broadcast_to(np.asarray(p_max, float), (mask.shape[1],))
    counts = mask.sum(axis=0)
    power = np.where(mask, p_max[None, :] / np.maximum(counts, 1)[None, :], 0.0)
    rate = bw / LN2 * np.log1p(mrt_sinr(power, gains))
    return MrtResult(power, rate)

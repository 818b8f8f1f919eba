"""Lyapunov bookkeeping, theorem constants and scaling-law checks over phi."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


def lyapunov(q, qhat, tau):
    """Quadratic Lyapunov value (sum q^2/tau^2 + sum qhat^2/tau^2) / 2."""
    q = np.asarray(q, float)
    qhat = np.asarray(qhat, float)
    if np.any(q < 0) or np.any(qhat < 0):
        raise ValueError("queues must be nonnegative")
    return 0.5 * (float(np.sum(q * q)) + float(np.sum(qhat * qhat))) / tau ** 2


def second_moment(inflow, service, admitted, delivered):
    """B = (sum (in - out)^2 + sum (a - r)^2) / 2 for one slot."""
    d1 = np.asarray(inflow, float) - np.asarray(service, float)
    d2 = np.asarray(admitted, float) - np.asarray(delivered, float)
    return 0.5 * (float(np.sum(d1 * d1)) + float(np.sum(d2 * d2)))


def drift_upper_bound(q, qhat, beta, arrival, a, rates, tau, delivered=None):
    """Upper bound on L[t+1] - L[t] from the slot's realised quantities.

    ``q``, ``beta``, ``rates`` are (K, J) with ``arrival`` (K,); ``qhat`` and
    ``a`` are (K,). The virtual queues are served by ``delivered`` (K,),
    which defaults to the per-flow sum of ``rates``. Returns (bound, B).
    """
    q = np.asarray(q, float)
    rates = np.asarray(rates, float)
    inflow = np.asarray(beta, float) * np.asarray(arrival, float)[..., None]
    if delivered is None:
        delivered = rates.sum(axis=-1)
    b = second_moment(inflow, rates, a, delivered)
    lin = (float(np.sum(q / tau * (inflow - rates)))
           + float(np.sum(np.asarray(qhat, float) / tau * (np.asarray(a, float) - delivered))))
    return lin + b, b


def drift_violations(L, dL, dL_ub, rtol=1e-9) -> int:
    """Count slots with dL > dL_ub beyond rounding.

    dL is a difference of two Lyapunov values, so its absolute rounding error
    scales with L rather than with the drift itself.
    """
    L, dL, dL_ub = (np.asarray(x, float) for x in (L, dL, dL_ub))
    tol = rtol * np.maximum(1.0, np.abs(dL_ub)) + 1e-12 * np.maximum(np.abs(L), np.abs(L + dL))
    return int(np.sum(dL > dL_ub + tol))


@dataclass(frozen=True)
class TheoremConstants:
    c1: float
    c2: float
    c3: float
    k: int
    tau: float
    psi: float
    big_psi: float
    a1_max: float
    r_max: float

    def cross_identity_error(self) -> float:
        """Relative gap between c3 and its closed form K Psi^2 (A1 + r^2) / (4 psi^2)."""
        closed = self.k * self.big_psi ** 2 * (self.a1_max + self.r_max ** 2) / (4.0 * self.psi ** 2)
        return abs(self.c3 - closed) / max(abs(closed), 1e-300)

    def queue_bound(self, phi, a_max) -> float:
        """Steady-state bound on E||qhat||_1: tau Psi K A_max phi + sqrt(K) C1 sqrt(phi)."""
        return (self.tau * self.big_psi * self.k * a_max * phi
                + math.sqrt(self.k) * self.c1 * math.sqrt(phi))

    def rate_gap_bound(self, phi) -> float:
        return self.c2 / math.sqrt(phi)

    def utility_gap_bound(self, phi) -> float:
        return self.c3 / phi


def theorem_constants(k, tau, psi, big_psi, a1_max, r_max) -> TheoremConstants:
    """C1 = sqrt(K tau^2 Psi (A1 + r^2) / 2), C2 = C1 / (psi tau),
    C3 = Psi C1^2 / (2 psi^2 tau^2)."""
    if not psi > 0:
        raise ValueError("psi must be positive")
    if big_psi < psi:
        raise ValueError("need Psi >= psi")
    c1 = math.sqrt(k * tau ** 2 * big_psi * (a1_max + r_max ** 2) / 2.0)
    c2 = c1 / (psi * tau)
    c3 = big_psi * c1 ** 2 / (2.0 * psi ** 2 * tau ** 2)
    return TheoremConstants(c1, c2, c3, k, tau, psi, big_psi, a1_max, r_max)


@dataclass
class PhiStats:
    """Steady statistics of one run, in the same rate unit as the constants."""

    phi: float
    qhat_l1: float
    a: np.ndarray
    converged: bool = True


@dataclass
class ScalingReport:
    rows: list = field(default_factory=list)
    exponent: float = float("nan")
    gaps_nonincreasing: bool = True
    bound_holds: bool = True
    excluded: list = field(default_factory=list)

    def text(self) -> str:
        lines = [f"{'phi':>8} {'E|qhat|_1':>14} {'bound':>14} {'holds':>6} {'|a-a_ref|':>12}"]
        for r in self.rows:
            lines.append(f"{r['phi']:8.3g} {r['qhat_l1']:14.6g} {r['bound']:14.6g} "
                         f"{str(r['holds']):>6} {r['gap']:12.6g}")
        lines.append(f"log-log exponent of E|qhat|_1 vs phi: {self.exponent:.4f}")
        lines.append(f"queue bound holds for every run: {self.bound_holds}")
        lines.append(f"rate gap nonincreasing in phi: {self.gaps_nonincreasing}")
        if self.excluded:
            lines.append("excluded (not converged): " + ", ".join(f"{p:g}" for p in self.excluded))
        return "\n".join(lines)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi", "qhat_l1", "bound", "holds", "gap"])
        for r in self.rows:
            w.writerow([repr(float(r["phi"])), repr(float(r["qhat_l1"])), repr(float(r["bound"])),
                        int(r["holds"]), repr(float(r["gap"]))])
        return buf.getvalue()


def fit_exponent(phis, values) -> float:
    """Slope of log(values) against log(phis); 0 for constant data."""
    phis = np.asarray(phis, float)
    values = np.asarray(values, float)
    if len(phis) < 2 or np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(phis), np.log(values), 1)[0])


def verify_scaling(runs, constants: TheoremConstants, a_max) -> ScalingReport:
    """Check the steady queue bound, fit the queue growth exponent and check
    that ||a(phi) - a_ref|| does not grow with phi.

    ``runs`` maps phi to :class:`PhiStats`; ``a_ref`` is the steady rate of
    the largest-phi run. Needs at least three converged runs.
    """
    rep = ScalingReport()
    good = {}
    for phi in sorted(runs):
        st = runs[phi]
        if st.converged and np.isfinite(st.qhat_l1):
            good[phi] = st
        else:
            log.warning("phi=%g: run not converged, excluded", phi)
            rep.excluded.append(phi)
    if len(good) < 3:
        raise ValueError("need at least three converged runs")
    phis = sorted(good)
    a_ref = np.asarray(good[phis[-1]].a, float)
    for phi in phis:
        st = good[phi]
        bound = constants.queue_bound(phi, a_max)
        gap = float(np.linalg.norm(np.asarray(st.a, float) - a_ref))
        rep.rows.append(dict(phi=phi, qhat_l1=st.qhat_l1, bound=bound,
                             holds=bool(st.qhat_l1 <= bound), gap=gap))
    rep.bound_holds = all(r["holds"] for r in rep.rows)
    gaps = [r["gap"] for r in rep.rows]
    rep.gaps_nonincreasing = all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(gaps, gaps[1:]))
    rep.exponent = fit_exponent(phis, [good[p].qhat_l1 for p in phis])
    return rep

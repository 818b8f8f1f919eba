"""Frame-level flow-split learning: utility and regret estimates plus a
Gibbs-entropy smoothed best response."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LearningSchedule:
    e_u: float = 0.51
    e_theta: float = 0.55
    e_beta: float = 0.6

    def rates(self, t: int) -> tuple[float, float, float]:
        return tuple(1.0 / (t + 1.0) ** e for e in (self.e_u, self.e_theta, self.e_beta))


def validate_schedule(sched: LearningSchedule) -> list[str]:
    """Power-law rates 1/(t+1)^e are square-summable but not summable iff
    0.5 < e <= 1; the ratio conditions need strictly increasing exponents."""
    problems = []
    for name, e in (("e_u", sched.e_u), ("e_theta", sched.e_theta), ("e_beta", sched.e_beta)):
        if e <= 0.5:
            problems.append(f"{name}={e}: not square-summable (exponent must exceed 0.5)")
        elif e > 1:
            problems.append(f"{name}={e}: summable (exponent must be at most 1)")
    if not sched.e_u < sched.e_theta:
        problems.append("timescale order: need e_u < e_theta so eta_theta/eta_u -> 0")
    if not sched.e_theta < sched.e_beta:
        problems.append("timescale order: need e_theta < e_beta so eta_beta/eta_theta -> 0")
    return problems


def observe_utility(q, rate, beta, arrival, tau, unit=1.0):
    """Per-path utility of one frame.

    ``q`` and ``rate`` are (slots, K, J) histories, ``beta`` is (K, J),
    ``arrival`` (K,). Returns the (K, J) per-path utilities and their
    per-flow totals. Bits and bits/s are divided by ``unit`` first.
    """
    q = np.asarray(q, float) / unit
    inflow = (np.asarray(beta, float) * np.asarray(arrival, float)[:, None]) / unit
    u = np.sum(q / tau * (np.asarray(rate, float) / unit - inflow), axis=0)
    return u, u.sum(axis=-1)


def update_utility_estimate(uhat, ubar, eta_u, selected=True):
    return uhat + eta_u * np.asarray(selected, float) * (ubar - uhat)


def update_regret_estimate(thetahat, ubar, uhat, eta_theta, selected=True):
    return thetahat + eta_theta * np.asarray(selected, float) * (ubar - uhat - thetahat)


def best_response(thetahat, lam, mask=None):
    """Softmax of lam*[theta]^+ over the last axis (restricted to ``mask``)."""
    x = lam * np.maximum(np.asarray(thetahat, float), 0.0)
    if mask is None:
        mask = np.ones(x.shape, dtype=bool)
    x = np.where(mask, x, -np.inf)
    x = x - np.max(x, axis=-1, keepdims=True)
    e = np.where(mask, np.exp(x), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def update_flow_split(beta, f, eta_beta):
    return beta + eta_beta * (f - beta)


def uniform_split(mask) -> np.ndarray:
    mask = np.asarray(mask, bool)
    return mask / mask.sum(axis=-1, keepdims=True)


@dataclass
class RLState:
    """Per-(flow, RU) estimates kept across frames; beta is zero off-path."""

    uhat: np.ndarray
    thetahat: np.ndarray
    beta: np.ndarray

    @classmethod
    def initial(cls, mask) -> "RLState":
        mask = np.asarray(mask, bool)
        return cls(np.zeros(mask.shape), np.zeros(mask.shape), uniform_split(mask))


def restrict(beta, mask):
    """Carry a split onto a new path set: drop off-path mass, renormalise,
    and fall back to uniform for flows left with no mass."""
    b = np.where(mask, beta, 0.0)
    tot = b.sum(axis=-1, keepdims=True)
    uni = uniform_split(mask)
    return np.where(tot > 0, b / np.where(tot > 0, tot, 1.0), uni)


def rl_step(state: RLState, u_obs, observed, mask, t: int, sched: LearningSchedule,
            lam: float) -> RLState:
    """One frame of the three-step procedure for frame ``t`` > 1.

    ``u_obs`` holds the per-path utilities of frame t-1 on the paths in
    ``observed``. Every observed path counts as selected. The regret of a path
    is its observed utility against the flow's estimated total utility.
    """
    eta_u, eta_th, eta_b = sched.rates(t)
    observed = np.asarray(observed, bool)
    uhat = np.where(observed, update_utility_estimate(state.uhat, u_obs, eta_u), state.uhat)
    total = np.sum(np.where(observed, uhat, 0.0), axis=-1, keepdims=True)
    theta = np.where(observed,
                     update_regret_estimate(state.thetahat, u_obs, total, eta_th),
                     state.thetahat)
    prev = restrict(state.beta, mask)
    f = best_response(theta, lam, mask)
    beta = update_flow_split(prev, f, eta_b)
    return RLState(uhat, theta, beta)

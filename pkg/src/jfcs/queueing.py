"""Physical and virtual queues, arrivals, and the Markov-relaxed delay budget."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check_nonneg(**vals):
    for name, v in vals.items():
        if np.any(np.asarray(v) < 0):
            raise ValueError(f"{name} must be nonnegative")


def update_physical_queue(q, beta, arrival, rate, tau):
    """One slot of the per-(flow, RU) queue: [q + beta*A*tau - r*tau]^+."""
    _check_nonneg(q=q, arrival=arrival, rate=rate)
    if np.any((np.asarray(beta) < 0) | (np.asarray(beta) > 1)):
        raise ValueError("beta must lie in [0, 1]")
    return np.maximum(0.0, q + beta * arrival * tau - rate * tau)


def update_virtual_queue(qhat, admitted, rate, tau):
    _check_nonneg(qhat=qhat, admitted=admitted, rate=rate)
    return np.maximum(0.0, qhat + admitted * tau - rate * tau)


@dataclass
class ArrivalProcess:
    """Per-frame arrival rates, uniform on [lo, hi] bits/s, capped at a_max."""

    lo: float
    hi: float
    a_max: float

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi <= self.a_max:
            raise ValueError("need 0 <= lo <= hi <= a_max")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def draw(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, k)


@dataclass
class QueueState:
    q: np.ndarray       # (K, J) bits
    qhat: np.ndarray    # (K,) bits
    slot: int = 0

    @classmethod
    def empty(cls, k: int, j: int) -> "QueueState":
        return cls(np.zeros((k, j)), np.zeros(k))


@dataclass
class DelayBudget:
    """Running sums behind the minimum-rate requirement of each (flow, RU).

    ``admitted`` accumulates beta * mean_arrival * tau once per elapsed slot
    (current slot included); ``served`` accumulates r * tau of past slots.
    """

    mean_arrival: np.ndarray
    dbar: np.ndarray
    eps: np.ndarray
    admitted: np.ndarray = field(default=None)
    served: np.ndarray = field(default=None)

    @classmethod
    def create(cls, k: int, j: int, mean_arrival, dbar, eps) -> "DelayBudget":
        return cls(np.broadcast_to(np.asarray(mean_arrival, float), (k,)).copy(),
                   np.broadcast_to(np.asarray(dbar, float), (k,)).copy(),
                   np.broadcast_to(np.asarray(eps, float), (k,)).copy(),
                   np.zeros((k, j)), np.zeros((k, j)))

    def open_slot(self, beta, tau):
        self.admitted += beta * self.mean_arrival[:, None] * tau

    def requirement(self):
        """Bits each (flow, RU) must deliver this slot; <= 0 means inactive."""
        slack = ((1.0 - self.eps) * self.mean_arrival * self.dbar)[:, None]
        return self.admitted - slack - self.served

    def close_slot(self, rate, tau):
        self.served += rate * tau


def delay_budget(beta_history, mean_arrival, tau, dbar, eps, served_history):
    """Reference running value for one (flow, RU) from explicit histories.

    ``beta_history`` holds the split in force at every elapsed slot including
    the current one; ``served_history`` the rates of the previous slots.
    """
    admitted = sum(b * mean_arrival * tau for b in beta_history)
    served = sum(r * tau for r in served_history)
    return admitted - (1.0 - eps) * mean_arrival * dbar - served


def stability_metric(trace, warmup_fraction=0.4, window=None):
    """Tail mean of a queue trace (estimator of the steady-state level).

    Averages the last ``window`` entries when given, otherwise everything after
    the first ``warmup_fraction`` of the trace.
    """
    trace = np.asarray(trace, dtype=float)
    n = trace.shape[0]
    if window is None:
        start = int(np.floor(warmup_fraction * n))
        if n - start < 1:
            raise ValueError("trace too short for the warmup window")
    else:
        if window < 1 or window > n:
            raise ValueError("trace shorter than the tail window")
        start = n - window
    return float(np.mean(trace[start:]))


def is_unstable(trace, threshold, warmup_fraction=0.4, window=None) -> bool:
    """Flag a run whose tail mean exceeds ``threshold`` or is non-finite."""
    m = stability_metric(trace, warmup_fraction, window)
    return not np.isfinite(m) or m > threshold

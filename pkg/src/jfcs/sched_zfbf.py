"""Zero-forcing scheduler: per-RU null-space beams and water-filling powers
priced by a bisected Lagrange multiplier."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from . import kernels

log = logging.getLogger(__name__)

LN2 = np.log(2.0)


class InfeasibleBudget(ValueError):
    """Minimum powers of an RU exceed its budget."""

    def __init__(self, pmin, p_max, ues=None):
        self.pmin = np.asarray(pmin, float)
        self.p_max = p_max
        self.ues = list(range(len(self.pmin))) if ues is None else list(ues)
        detail = ", ".join(f"ue {k}: {p:.3g} W" for k, p in zip(self.ues, self.pmin))
        super().__init__(f"sum of minimum powers {self.pmin.sum():.4g} W exceeds "
                         f"budget {p_max:.4g} W ({detail})")


def null_space_basis(h_minus, rank_tol=1e-12):
    """Orthonormal basis of the orthogonal complement of span(h_minus).

    ``h_minus`` is M x n (columns are the other UEs' channels). Uses a
    column-pivoted Householder QR; columns whose |R_ii| fall below
    ``rank_tol * |R_00|`` count as dependent, which widens the basis.
    """
    h_minus = np.asarray(h_minus, dtype=complex)
    m = h_minus.shape[0]
    if h_minus.ndim != 2 or h_minus.shape[1] == 0:
        return np.eye(m, dtype=complex)
    if h_minus.shape[1] >= m:
        raise ValueError("need more antennas than interfering UEs")
    q, r, _ = qr(h_minus, mode="full", pivoting=True)
    d = np.abs(np.diag(r))
    rank = int(np.sum(d > rank_tol * d[0])) if d.size and d[0] > 0 else 0
    return q[:, rank:]


def effective_gains_qr(h, rank_tol=1e-12):
    """nutilde_k = ||V_k^H h_k||^2 and unit ZF directions via explicit bases.

    ``h`` is (n, M): one row per co-scheduled UE.
    """
    n, m = h.shape
    nut = np.empty(n)
    dirs = np.zeros((n, m), dtype=complex)
    for k in range(n):
        v = null_space_basis(np.delete(h, k, axis=0).T, rank_tol)
        proj = v @ (v.conj().T @ h[k])
        nut[k] = float(np.real(np.vdot(proj, proj)))
        if nut[k] > 0:
            dirs[k] = proj / np.sqrt(nut[k])
    return nut, dirs


def effective_gains(h, rank_tol=1e-12):
    """Same as ``effective_gains_qr`` through the Gram inverse when it is well
    conditioned: nutilde_k = 1 / [(H^H H)^-1]_kk."""
    h = np.asarray(h, dtype=complex)
    n, m = h.shape
    if n == 0:
        return np.zeros(0), np.zeros((0, m), dtype=complex)
    if n >= m:
        raise ValueError("need more antennas than co-scheduled UEs")
    gram = h.conj() @ h.T  # G[k, l] = h_k^H h_l
    if np.linalg.cond(gram) > 1e10:
        return effective_gains_qr(h, rank_tol)
    ginv = np.linalg.inv(gram)
    cols = h.T @ ginv  # column k is the projected h_k divided by nutilde_k
    nut = 1.0 / np.real(np.diag(ginv))
    dirs = (cols * np.sqrt(nut)[None, :]).T
    return nut, dirs


def min_power(rbar, bw, tau, nutilde, n0):
    """Least power meeting W' log2(1 + p nutilde / N0) tau >= rbar (0 if rbar <= 0)."""
    rbar = np.asarray(rbar, float)
    with np.errstate(over="ignore"):
        need = np.expm1(LN2 * np.maximum(rbar, 0.0) / (bw * tau))
        out = np.where(rbar > 0, n0 / np.asarray(nutilde, float) * need, 0.0)
    return out if out.ndim else float(out)


def waterfill_power(mu, qhat, bw, tau, nutilde, n0, pmin):
    """max(pmin, qhat W'/(tau mu ln2) - N0/nutilde)."""
    a = np.atleast_1d(np.asarray(qhat, float) * bw / (tau * LN2))
    b = np.atleast_1d(n0 / np.asarray(nutilde, float))
    pmin = np.broadcast_to(np.asarray(pmin, float), a.shape).copy()
    return kernels.waterfill_power(float(mu), a, b.astype(float), pmin)


def bisect_mu(a, b, pmin, p_max, rel_tol=1e-9, ues=None):
    """Price mu* with sum_k max(pmin, a/mu - b) <= p_max, tight when it binds.

    Returns (mu, powers, iterations). mu = 0 means nobody wants power.
    """
    a = np.ascontiguousarray(a, float)
    b = np.ascontiguousarray(b, float)
    pmin = np.ascontiguousarray(pmin, float)
    if pmin.sum() > p_max * (1.0 + 1e-12):
        raise InfeasibleBudget(pmin, p_max, ues)
    if pmin.sum() >= p_max:
        return np.inf, pmin.copy(), 0
    return kernels.waterfill_bisect(a, b, pmin, float(p_max), rel_tol)


@dataclass
class ZfResult:
    power: np.ndarray      # (K, J) W
    rate: np.ndarray       # (K, J) bits/s
    mu: np.ndarray         # (J,)
    beams: list            # per RU: (K, M) complex beamformers, zero rows off-path
    nutilde: np.ndarray    # (K, J)
    infeasible_rus: list = field(default_factory=list)
    dropped: list = field(default_factory=list)


def zf_schedule(channels, mask, qhat, rbar, p_max, bw, tau, n0, rel_tol=1e-9,
                rank_tol=1e-12, degenerate_tol=1e-15, equal_power=False) -> ZfResult:
    """Per-RU ZF beams and water-filled powers.

    ``channels`` is a list of (K, M_j) arrays, ``mask`` the (K, J) serving
    pattern, ``qhat`` (K,) virtual queues in bits, ``rbar`` (K, J) per-slot
    bit requirements (<= 0 inactive), ``bw`` the per-RU band and ``n0`` the
    noise power in W over that band. ``p_max`` is scalar or (J,).
    With ``equal_power`` every served UE gets P_max / n at its RU.
    """
    k_tot, j_tot = mask.shape
    p_max = np.broadcast_to(np.asarray(p_max, float), (j_tot,))
    power = np.zeros((k_tot, j_tot))
    nut_all = np.zeros((k_tot, j_tot))
    mu = np.zeros(j_tot)
    beams, infeasible, dropped = [], [], []
    for j in range(j_tot):
        h = channels[j]
        ues = np.flatnonzero(mask[:, j])
        beam = np.zeros(h.shape, dtype=complex)
        if len(ues) == 0:
            beams.append(beam)
            continue
        if len(ues) >= h.shape[1]:
            raise ValueError(f"RU {j}: {len(ues)} UEs need more than {h.shape[1]} antennas")
        nut, dirs = effective_gains(h[ues], rank_tol)
        norms = np.sum(np.abs(h[ues]) ** 2, axis=1)
        ok = nut > degenerate_tol * norms
        for k in ues[~ok]:
            log.info("RU %d: UE %d has a degenerate ZF gain, skipped this slot", j, k)
            dropped.append((int(k), j))
        ues, nut, dirs = ues[ok], nut[ok], dirs[ok]
        if len(ues) == 0:
            beams.append(beam)
            continue
        if equal_power:
            p = np.full(len(ues), p_max[j] / len(ues))
            mu[j] = np.nan
        else:
            a = qhat[ues] * bw / (tau * LN2)
            b = n0 / nut
            pmin = min_power(rbar[ues, j], bw, tau, nut, n0)
            try:
                mu[j], p, _ = bisect_mu(a, b, pmin, p_max[j], rel_tol, ues)
            except InfeasibleBudget as exc:
                log.info("RU %d: %s; minimum-rate constraints dropped", j, exc)
                infeasible.append(j)
                mu[j], p, _ = bisect_mu(a, b, np.zeros(len(ues)), p_max[j], rel_tol)
        power[ues, j] = p
        nut_all[ues, j] = nut
        beam[ues] = np.sqrt(p)[:, None] * dirs
        beams.append(beam)
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = np.where(nut_all > 0, power * nut_all / n0, 0.0)
    rate = bw * np.log2(1.0 + snr)
    return ZfResult(power, rate, mu, beams, nut_all, infeasible, dropped)

"""Two-timescale simulation loop, benchmark schemes and parameter sweeps."""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .config import SimConfig, stream
from .congestion import curvature_bounds, log_utility, optimal_rate
from .flow_split import LearningSchedule, RLState, observe_utility, rl_step, uniform_split
from .queueing import ArrivalProcess, DelayBudget, stability_metric, update_physical_queue, \
    update_virtual_queue
from .sched_mrt import MrtGains, equal_power_schedule, ia_schedule
from .sched_zfbf import zf_schedule
from .topology import dbm_to_watt, draw_channel, draw_large_scale, nearest_ru, noise_power, \
    place_rus, select_paths

log = logging.getLogger(__name__)

SLOT_FIELDS = ("a", "r", "delivered", "qhat", "sum_q")


class SimulationError(RuntimeError):
    pass


@dataclass
class RunTrace:
    """Per-slot (n_slots, K) and per-frame (T, K, J) records of one run."""

    config: SimConfig
    a: np.ndarray
    r: np.ndarray
    delivered: np.ndarray
    qhat: np.ndarray
    sum_q: np.ndarray
    L: np.ndarray
    dL: np.ndarray
    dL_ub: np.ndarray
    B: np.ndarray
    beta: np.ndarray
    uhat: np.ndarray
    thetahat: np.ndarray
    mask: np.ndarray
    arrival: np.ndarray
    path_rate: np.ndarray
    path_q: np.ndarray
    path_u: np.ndarray
    r_cap: np.ndarray
    infeasible_events: int = 0
    summary: dict = field(default_factory=dict)

    @property
    def n_slots(self) -> int:
        return self.a.shape[0]

    @property
    def n_frames(self) -> int:
        return self.beta.shape[0]

    @property
    def slot_frame(self) -> np.ndarray:
        tf = self.config.slots_per_frame
        return np.arange(self.n_slots) // tf + 1

    @property
    def slot_index(self) -> np.ndarray:
        tf = self.config.slots_per_frame
        return np.arange(self.n_slots) % tf + 1


def _empty_trace(cfg: SimConfig, k, j):
    n = cfg.frames * cfg.slots_per_frame
    z = lambda *s: np.zeros(s)
    return RunTrace(cfg, z(n, k), z(n, k), z(n, k), z(n, k), z(n, k), z(n), z(n), z(n), z(n),
                    z(cfg.frames, k, j), z(cfg.frames, k, j), z(cfg.frames, k, j),
                    np.zeros((cfg.frames, k, j), bool), z(cfg.frames, k),
                    z(cfg.frames, k, j), z(cfg.frames, k, j), z(cfg.frames, k, j), z(n, k))


def _served_paths(cfg: SimConfig, ls):
    if cfg.scheme == "num-nru":
        near = nearest_ru(ls)
        mask = np.zeros((ls.num_ues, ls.num_rus), bool)
        mask[np.arange(ls.num_ues), near] = True
        return mask
    return select_paths(ls, cfg.topology.paths_per_ue)


def run_simulation(cfg: SimConfig, progress=None) -> RunTrace:
    """Run the frame/slot loop for ``cfg.scheme`` and return the full trace.

    Per frame: draw UE positions and large-scale fading, choose the path set,
    update the flow split from the previous frame's feedback. Per slot: draw
    small-scale fading, set the admitted rate from the virtual queue, schedule,
    update queues and the drift record.
    """
    cfg.validate()
    topo = cfg.topology
    k_n, j_n = topo.num_ues, topo.num_rus
    tau, tf = cfg.tau, cfg.slots_per_frame
    unit = cfg.rate_unit
    zf = cfg.scheduler == "zfbf"
    bw = topo.bandwidth / j_n if zf else topo.bandwidth
    n0 = float(dbm_to_watt(noise_power(bw, topo.noise_figure)))
    p_max = topo.p_max
    util = log_utility(1e-3)
    arrivals = ArrivalProcess(cfg.arrival_lo, cfg.arrival_hi, cfg.a_max)
    sched = LearningSchedule(*cfg.exponents)
    learn = cfg.scheme in ("jfcs", "num-fra")
    equal_power = cfg.scheme == "num-fra"

    rng_place = stream(cfg.seed, "ue-placement")
    rng_shadow = stream(cfg.seed, "shadowing")
    rng_fading = stream(cfg.seed, "fading")
    rng_arrival = stream(cfg.seed, "arrivals")
    ru_pos = place_rus(topo, stream(cfg.seed, "ru-placement"))

    tr = _empty_trace(cfg, k_n, j_n)
    q = np.zeros((k_n, j_n))
    qhat = np.zeros(k_n)
    budget = DelayBudget.create(k_n, j_n, arrivals.mean, cfg.dbar, cfg.eps)
    state = None
    prev = None  # (mask, per-path utility) of the previous frame
    n = 0
    for t in range(1, cfg.frames + 1):
        ls = draw_large_scale(topo, ru_pos, rng_place, rng_shadow)
        mask = _served_paths(cfg, ls)
        if learn:
            if state is None:
                state = RLState.initial(mask)
            else:
                state = rl_step(state, prev[1], prev[0], mask, t, sched, cfg.lam)
            beta = state.beta
        else:
            beta = uniform_split(mask)
        arrival = arrivals.draw(rng_arrival, k_n)
        inflow = beta * arrival[:, None]
        q_hist = np.zeros((tf, k_n, j_n))
        r_hist = np.zeros((tf, k_n, j_n))
        for s in range(tf):
            h = draw_channel(ls, rng_fading)
            a = optimal_rate(qhat, cfg.phi, tau, cfg.a_max, util, unit)
            budget.open_slot(beta, tau)
            rbar = np.where(mask, budget.requirement(), -1.0)
            if zf:
                res = zf_schedule(h, mask, qhat, rbar, p_max, bw, tau, n0, cfg.bisect_rel_tol,
                                  cfg.rank_tol, equal_power=equal_power)
                rate = res.rate
                tr.infeasible_events += len(res.infeasible_rus)
            else:
                gains = MrtGains.from_channels(h, mask, n0)
                if equal_power:
                    res = equal_power_schedule(gains, p_max, bw)
                else:
                    res = ia_schedule(gains, qhat, rbar, p_max, bw, tau, cfg.ia_max_iter,
                                      cfg.ia_tol, cfg.inner_max_steps, cfg.inner_tol,
                                      cfg.feasibility_rounds)
                    tr.infeasible_events += int(res.infeasible)
                rate = res.rate
            if not np.all(np.isfinite(rate)):
                raise SimulationError(f"non-finite rate at frame {t} slot {s + 1}")
            # what actually leaves each queue this slot
            sent = np.minimum(rate, q / tau + inflow)
            delivered = sent.sum(axis=1)
            q_new = update_physical_queue(q, beta, arrival[:, None], rate, tau)
            qhat_new = update_virtual_queue(qhat, a, delivered, tau)
            L = analysis.lyapunov(q, qhat, tau)
            ub, b = analysis.drift_upper_bound(q, qhat, beta, arrival, a, rate, tau, delivered)
            L_new = analysis.lyapunov(q_new, qhat_new, tau)
            budget.close_slot(rate, tau)
            cap = bw * np.log2(1.0 + p_max * np.array(
                [[np.sum(np.abs(h[j][k]) ** 2) for j in range(j_n)] for k in range(k_n)]) / n0)
            tr.a[n], tr.r[n], tr.delivered[n] = a, rate.sum(axis=1), delivered
            tr.qhat[n], tr.sum_q[n] = qhat, q.sum(axis=1)
            tr.L[n], tr.dL[n], tr.dL_ub[n], tr.B[n] = L, L_new - L, ub, b
            tr.r_cap[n] = np.sum(np.where(mask, cap, 0.0), axis=1)
            q_hist[s], r_hist[s] = q, rate
            q, qhat = q_new, qhat_new
            n += 1
        u, _ = observe_utility(q_hist, r_hist, beta, arrival, tau, unit)
        prev = (mask, u)
        tr.beta[t - 1], tr.mask[t - 1], tr.arrival[t - 1] = beta, mask, arrival
        tr.path_rate[t - 1], tr.path_q[t - 1], tr.path_u[t - 1] = r_hist.mean(axis=0), q, u
        if state is not None:
            tr.uhat[t - 1], tr.thetahat[t - 1] = state.uhat, state.thetahat
        if progress is not None:
            progress(t)
    tr.summary = summarize(tr)
    return tr


def run_benchmark(scheme: str, cfg: SimConfig, progress=None) -> RunTrace:
    """Run one of the reference schemes (num-fra, num-efsd, num-nru)."""
    if scheme not in ("num-fra", "num-efsd", "num-nru"):
        raise ValueError(f"not a benchmark scheme: {scheme!r}")
    return run_simulation(cfg.replace(scheme=scheme), progress)


def convergence_slots(a_norm, steady, band=0.1) -> int:
    """Slots until the running time average of ||a|| enters and stays within
    ``band`` of ``steady``."""
    x = np.asarray(a_norm, float)
    if x.size == 0:
        return 0
    avg = np.cumsum(x) / np.arange(1, x.size + 1)
    idx = np.flatnonzero(np.abs(avg - steady) > band * abs(steady))
    return 0 if idx.size == 0 else int(idx[-1]) + 1


def summarize(tr: RunTrace) -> dict:
    cfg = tr.config
    if tr.n_slots == 0:
        return {}
    wf = cfg.warmup_fraction
    start = int(np.floor(wf * tr.n_slots))
    a_ss = tr.a[start:].mean(axis=0)
    qhat_l1 = tr.qhat.sum(axis=1)
    steady_norm = float(np.linalg.norm(a_ss))
    qhat_ss = tr.qhat[start:].mean(axis=0)
    return {
        "steady_a_norm": steady_norm,
        "steady_a": a_ss.tolist(),
        "steady_delivered": tr.delivered[start:].mean(axis=0).tolist(),
        "steady_qhat_l1": stability_metric(qhat_l1, wf),
        "steady_sum_q": stability_metric(tr.sum_q.sum(axis=1), wf),
        "worst_delay": float(np.max(qhat_ss) / cfg.mean_arrival) if cfg.mean_arrival > 0 else 0.0,
        "convergence_slots": convergence_slots(np.linalg.norm(tr.a, axis=1), steady_norm),
        "r_max": float(tr.r_cap.max()),
        "max_B": float(tr.B.max()),
        "drift_violations": analysis.drift_violations(tr.L, tr.dL, tr.dL_ub),
        "infeasible_events": int(tr.infeasible_events),
        "finite": bool(np.all(np.isfinite(qhat_l1))),
    }


def theorem_inputs(cfg: SimConfig, r_max: float) -> analysis.TheoremConstants:
    """Constants in rate units: curvature of the utility on [0, A_max],
    A1 = A_hi^2 and the capacity bound r_max (bits/s)."""
    unit = cfg.rate_unit
    psi, big_psi = curvature_bounds(log_utility(1e-3), (0.0, cfg.a_max / unit))
    return analysis.theorem_constants(cfg.topology.num_ues, cfg.tau, psi, big_psi,
                                      (cfg.arrival_hi / unit) ** 2, r_max / unit)


SWEEP_PARAMS = {"phi": "phi", "M": "antennas", "lambda": "lam"}


def _sweep_one(args):
    cfg, key, value = args
    try:
        tr = run_simulation(cfg.replace(**{key: value}))
        return value, tr.summary, None
    except Exception as exc:  # isolate per-run failures
        log.warning("sweep value %r failed: %s", value, exc)
        return value, None, repr(exc)


@dataclass
class SweepResult:
    parameter: str
    values: list
    summaries: dict
    errors: dict
    report: analysis.ScalingReport | None = None


def sweep(cfg: SimConfig, parameter: str, values, workers: int = 1) -> SweepResult:
    """Run ``cfg`` for every value of ``parameter`` (phi, M or lambda).

    Summaries are keyed and ordered by value. For phi sweeps with at least
    three successful runs the scaling checks are attached.
    """
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {sorted(SWEEP_PARAMS)}")
    key = SWEEP_PARAMS[parameter]
    values = sorted(values)
    jobs = [(cfg, key, int(v) if key == "antennas" else float(v)) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_sweep_one, jobs))
    else:
        out = [_sweep_one(j) for j in jobs]
    summaries = {v: s for v, s, e in out if s is not None}
    errors = {v: e for v, s, e in out if e is not None}
    res = SweepResult(parameter, values, summaries, errors)
    if parameter == "phi" and len(summaries) >= 3:
        unit = cfg.rate_unit
        r_max = max(s["r_max"] for s in summaries.values())
        consts = theorem_inputs(cfg, r_max)
        runs = {phi: analysis.PhiStats(phi, s["steady_qhat_l1"] / unit,
                                       np.asarray(s["steady_a"]) / unit, s["finite"])
                for phi, s in summaries.items()}
        res.report = analysis.verify_scaling(runs, consts, cfg.a_max / unit)
    return res


def config_dict(cfg: SimConfig) -> dict:
    d = dataclasses.asdict(cfg)
    return d

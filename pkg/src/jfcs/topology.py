"""Topology, large-scale fading and per-slot Rician channel draws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TopologyConfig

XI0_DB = -140.7
D0_KM = 0.010
D1_KM = 0.050


def path_loss(d, shadow=0.0):
    """Three-slope large-scale gain in dB for distance ``d`` in meters.

    Breakpoints at 10 m and 50 m; the log terms read distance in km. The slope
    switches c0/c1 are zero exactly at their breakpoint.
    """
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive")
    d_km = d / 1000.0
    c0 = (d_km < D0_KM).astype(float)
    c1 = (d_km < D1_KM).astype(float)
    out = (XI0_DB + shadow - 35.0 * np.log10(d_km)
           + 20.0 * c0 * np.log10(d_km / D0_KM)
           + 15.0 * c1 * np.log10(d_km / D1_KM))
    return out if out.ndim else float(out)


def los_probability(d):
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive")
    e = np.exp(-d / 36.0)
    out = np.minimum(18.0 / d, 1.0) * (1.0 - e) + e
    return out if out.ndim else float(out)


def rician_factor(p_los, kappa_max=1e3):
    p = np.asarray(p_los, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("LoS probability must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        k = np.where(p < 1.0, p / np.where(p < 1.0, 1.0 - p, 1.0), np.inf)
    out = np.minimum(k, kappa_max)
    return out if out.ndim else float(out)


def array_response(phi, m: int) -> np.ndarray:
    """Half-wavelength ULA steering vector; element 0 is exactly 1."""
    if m < 1:
        raise ValueError("array needs at least one element")
    return np.exp(1j * np.pi * np.arange(m) * np.sin(phi))


def noise_power(bandwidth: float, nf_db: float) -> float:
    """Thermal noise in dBm."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return -170.0 + 10.0 * np.log10(bandwidth) + nf_db


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def place_rus(cfg: TopologyConfig, rng: np.random.Generator) -> np.ndarray:
    """Spread J RUs evenly over the disc (sunflower lattice, random rotation)."""
    j = cfg.num_rus
    idx = np.arange(j)
    radius = cfg.cell_radius * np.sqrt((idx + 0.5) / j)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    ang = idx * golden + rng.uniform(0.0, 2.0 * np.pi)
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])


def place_ues(cfg: TopologyConfig, rng: np.random.Generator) -> np.ndarray:
    k = cfg.num_ues
    radius = cfg.cell_radius * np.sqrt(rng.uniform(0.0, 1.0, k))
    ang = rng.uniform(0.0, 2.0 * np.pi, k)
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])


@dataclass
class LargeScaleState:
    """Per-frame large-scale parameters; arrays are indexed [ru, ue]."""

    distance: np.ndarray
    xi: np.ndarray
    kappa: np.ndarray
    aod: np.ndarray
    los: list  # per RU: (K, M_j) unit-modulus LoS vectors
    ru_pos: np.ndarray
    ue_pos: np.ndarray

    @property
    def num_rus(self) -> int:
        return self.xi.shape[0]

    @property
    def num_ues(self) -> int:
        return self.xi.shape[1]


def large_scale(cfg: TopologyConfig, ru_pos: np.ndarray, ue_pos: np.ndarray,
                shadow_db: np.ndarray) -> LargeScaleState:
    diff = ue_pos[None, :, :] - ru_pos[:, None, :]
    horiz = np.hypot(diff[..., 0], diff[..., 1])
    dist = np.sqrt(horiz ** 2 + (cfg.ru_height - cfg.ue_height) ** 2)
    xi = 10.0 ** (path_loss(dist, shadow_db) / 10.0)
    kappa = rician_factor(los_probability(dist), cfg.kappa_max)
    theta = np.arctan2(diff[..., 1], diff[..., 0])
    aod = np.mod(theta + np.pi / 2, np.pi) - np.pi / 2
    los = [np.exp(1j * np.pi * np.arange(m)[None, :] * np.sin(aod[j])[:, None])
           for j, m in enumerate(cfg.antennas_per_ru())]
    return LargeScaleState(dist, xi, kappa, aod, los, ru_pos, ue_pos)


def draw_large_scale(cfg: TopologyConfig, ru_pos: np.ndarray, rng_place: np.random.Generator,
                     rng_shadow: np.random.Generator) -> LargeScaleState:
    ue_pos = place_ues(cfg, rng_place)
    shadow = rng_shadow.normal(0.0, cfg.shadow_sigma, (cfg.num_rus, cfg.num_ues))
    return large_scale(cfg, ru_pos, ue_pos, shadow)


def _los_weights(kappa):
    kappa = np.asarray(kappa, dtype=float)
    inf = np.isinf(kappa)
    k = np.where(inf, 0.0, kappa)
    w_los = np.where(inf, 1.0, np.sqrt(k / (k + 1.0)))
    w_nlos = np.where(inf, 0.0, np.sqrt(1.0 / (k + 1.0)))
    return w_los, w_nlos


def draw_channel(ls: LargeScaleState, rng: np.random.Generator) -> list:
    """One slot of small-scale fading: per RU a (K, M_j) complex array."""
    out = []
    for j, hbar in enumerate(ls.los):
        k, m = hbar.shape
        nlos = (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))) / np.sqrt(2.0)
        w_los, w_nlos = _los_weights(ls.kappa[j])
        h = np.sqrt(ls.xi[j])[:, None] * (w_los[:, None] * hbar + w_nlos[:, None] * nlos)
        out.append(h)
    return out


def select_paths(ls: LargeScaleState, n_paths: int) -> np.ndarray:
    """Boolean (K, J) mask of the ``n_paths`` RUs with the largest gain per UE."""
    order = np.argsort(-ls.xi.T, axis=1, kind="stable")
    mask = np.zeros((ls.num_ues, ls.num_rus), dtype=bool)
    np.put_along_axis(mask, order[:, :n_paths], True, axis=1)
    return mask


def nearest_ru(ls: LargeScaleState) -> np.ndarray:
    return np.argmin(ls.distance, axis=0)

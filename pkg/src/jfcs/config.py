"""Simulation configuration, presets and config-file loading."""

from __future__ import annotations

import configparser
import dataclasses
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    pass


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass
class TopologyConfig:
    num_dus: int = 2
    rus_per_du: tuple[int, ...] = (4, 4)
    num_ues: int = 12
    antennas: tuple[int, ...] | int = 16
    cell_radius: float = 1000.0
    ru_height: float = 10.0
    ue_height: float = 1.5
    bandwidth: float = 20e6
    noise_figure: float = 9.0
    p_max_dbm: float = 43.0
    shadow_sigma: float = 8.0
    paths_per_ue: int = 4
    kappa_max: float = 1e3

    @property
    def num_rus(self) -> int:
        return int(sum(self.rus_per_du))

    @property
    def p_max(self) -> float:
        return dbm_to_watt(self.p_max_dbm)

    def antennas_per_ru(self) -> list[int]:
        if isinstance(self.antennas, int):
            return [self.antennas] * self.num_rus
        return [int(m) for m in self.antennas]

    def ru_labels(self) -> list[tuple[int, int]]:
        """(i, j) label of every RU in flat order, 1-based like the DU/RU naming."""
        return [(i + 1, j + 1) for i, n in enumerate(self.rus_per_du) for j in range(n)]

    def validate(self, zfbf: bool = False) -> None:
        if len(self.rus_per_du) != self.num_dus:
            raise ConfigError("rus_per_du must list one count per DU")
        if self.num_dus < 1 or min(self.rus_per_du) < 1 or self.num_ues < 1:
            raise ConfigError("DU, RU and UE counts must be >= 1")
        ants = self.antennas_per_ru()
        if len(ants) != self.num_rus or min(ants) < 1:
            raise ConfigError("need one antenna count >= 1 per RU")
        if self.cell_radius <= 0 or self.p_max_dbm is None or self.bandwidth <= 0:
            raise ConfigError("radius and bandwidth must be positive")
        if not 1 <= self.paths_per_ue <= self.num_rus:
            raise ConfigError("paths_per_ue must be in [1, J]")
        if zfbf and min(ants) <= 1:
            raise ConfigError("ZFBF needs more than one antenna per RU")


@dataclass
class SimConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    frames: int = 10000
    slots_per_frame: int = 10
    tau: float = 1e-3
    phi: float = 25.0
    lam: float = 0.3
    exponents: tuple[float, float, float] = (0.51, 0.55, 0.6)
    arrival_lo: float = 1e9
    arrival_hi: float = 3e9
    a_max: float = 3e9
    dbar: float = 10e-3
    eps: float = 0.95
    scheduler: str = "zfbf"
    scheme: str = "jfcs"
    seed: int = 0
    out: str = "runs"
    # utility argument, per-path RL utilities and theorem constants are
    # expressed in this rate unit (bits/s); 1e9 makes log(0.001 + r) read r in
    # Gbps. It also sets how large qhat grows for a given phi and how sharp the
    # flow-split best response is for a given lam.
    rate_unit: float = 1e9
    warmup_fraction: float = 0.4
    ia_max_iter: int = 50
    ia_tol: float = 1e-5
    inner_max_steps: int = 500
    inner_tol: float = 1e-6
    feasibility_rounds: int = 20
    bisect_rel_tol: float = 1e-9
    rank_tol: float = 1e-12

    @property
    def frame_duration(self) -> float:
        return self.slots_per_frame * self.tau

    @property
    def mean_arrival(self) -> float:
        return 0.5 * (self.arrival_lo + self.arrival_hi)

    def validate(self) -> None:
        if self.frames < 1 or self.slots_per_frame < 1:
            raise ConfigError("frames and slots_per_frame must be >= 1")
        if self.tau <= 0 or self.phi <= 0 or self.lam <= 0:
            raise ConfigError("tau, phi and lam must be positive")
        if not 0 <= self.arrival_lo <= self.arrival_hi <= self.a_max:
            raise ConfigError("need 0 <= arrival_lo <= arrival_hi <= a_max")
        if not 0 < self.eps <= 1 or self.dbar <= 0:
            raise ConfigError("eps must be in (0, 1] and dbar > 0")
        if self.scheduler not in ("mrt", "zfbf"):
            raise ConfigError(f"unknown scheduler {self.scheduler!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must be in [0, 1)")
        self.topology.validate(zfbf=self.scheduler == "zfbf")

    def replace(self, **changes) -> "SimConfig":
        topo_keys = {f.name for f in dataclasses.fields(TopologyConfig)}
        topo = {k: changes.pop(k) for k in list(changes) if k in topo_keys}
        cfg = dataclasses.replace(self, **changes)
        if topo:
            cfg.topology = dataclasses.replace(self.topology, **topo)
        return cfg


SCHEMES = ("jfcs", "num-fra", "num-efsd", "num-nru")


def table1() -> SimConfig:
    return SimConfig()


def desk() -> SimConfig:
    # arrivals scaled to the per-UE capacity of this small layout so that
    # flow splitting changes the delivered throughput
    return SimConfig(
        topology=TopologyConfig(num_dus=2, rus_per_du=(2, 2), num_ues=4, antennas=8),
        frames=500,
        arrival_lo=30e6,
        arrival_hi=50e6,
        a_max=60e6,
        rate_unit=1e8,
    )


PRESETS = {"table1": table1, "desk": desk}


def _coerce(value: str, kind):
    kind = str(kind)
    if "tuple" in kind:
        parts = [p for p in value.replace(",", " ").split() if p]
        conv = float if "float" in kind else int
        return tuple(conv(p) for p in parts)
    if "int" in kind and "float" not in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value


def parse_overrides(pairs: dict[str, str]) -> dict:
    types = {f.name: f.type for f in dataclasses.fields(SimConfig)}
    types.update({f.name: f.type for f in dataclasses.fields(TopologyConfig)})
    types.pop("topology")
    out = {}
    for key, raw in pairs.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if key == "antennas":
                vals = _coerce(raw, "tuple[int]")
                out[key] = vals[0] if len(vals) == 1 else vals
            else:
                out[key] = _coerce(raw, types[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


def load_config(path: str | Path | None = None, preset: str | None = None,
                **overrides) -> SimConfig:
    """Build a config with precedence overrides > file > preset/defaults.

    The file is flat ``key = value`` text; ``#`` starts a comment.
    """
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    cfg = PRESETS[preset or "table1"]()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            parser.read_string("[jfcs]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        file_vals = dict(parser["jfcs"])
        if "preset" in file_vals:
            name = file_vals.pop("preset")
            if preset is None:
                if name not in PRESETS:
                    raise ConfigError(f"unknown preset {name!r}")
                cfg = PRESETS[name]()
        cfg = cfg.replace(**parse_overrides(file_vals))
    cfg = cfg.replace(**{k: v for k, v in overrides.items() if v is not None})
    cfg.validate()
    return cfg


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent named RNG stream derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))

"""Scenario configuration and the prosumer data it resolves to."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .allocation import DEFAULT_BIG_M
from .battery import BatterySpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    n_prosumers: int = 10
    days: int = 7
    dt: float = 0.25
    price: float = 0.25
    eta_mean: float = 0.9
    eta_std: float = 0.05
    pv_shift_span: float = 6.0
    # share of households whose PV is shifted
    pv_shift_fraction: float = 0.5
    seed: int = 0
    big_m: float = DEFAULT_BIG_M
    alpha_default: float = 0.9
    battery: BatterySpec = field(default_factory=BatterySpec)
    data_source: str = "synthetic"
    random_subset: bool = False
    start: str = "2019-07-01T00:00:00"

    def __post_init__(self):
        if isinstance(self.battery, dict):
            object.__setattr__(self, "battery", BatterySpec(**self.battery))
        if self.n_prosumers < 1:
            raise ConfigError("n_prosumers must be >= 1")
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        per_day = 24.0 / self.dt
        if abs(per_day - round(per_day)) > 1e-9:
            raise ConfigError("dt must divide 24 hours")
        if not self.price > 0:
            raise ConfigError("price must be > 0")
        if self.eta_std < 0:
            raise ConfigError("eta_std must be >= 0")
        if not 0 <= self.pv_shift_span <= 24:
            raise ConfigError("pv_shift_span must lie in [0, 24]")
        if not 0 <= self.pv_shift_fraction <= 1:
            raise ConfigError("pv_shift_fraction must lie in [0, 1]")
        if not 0 <= self.alpha_default < 1:
            raise ConfigError("alpha_default must lie in [0, 1)")
        try:
            self.start_time
        except ValueError as exc:
            raise ConfigError(f"bad start timestamp: {exc}") from exc

    @property
    def steps_per_day(self) -> int:
        return int(round(24.0 / self.dt))

    @property
    def horizon(self) -> int:
        return self.days * self.steps_per_day

    @property
    def start_time(self) -> datetime:
        return datetime.fromisoformat(self.start)

    def timestamp(self, t: int) -> datetime:
        return self.start_time + timedelta(hours=self.dt * t)

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "battery" in data:
            try:
                data["battery"] = BatterySpec(**data["battery"])
            except TypeError as exc:
                raise ConfigError(f"bad battery block: {exc}") from exc
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


@dataclass(frozen=True)
class ProsumerProfile:
    """Per-interval demand and PV (kWh) plus the household battery."""

    demand: np.ndarray
    pv: np.ndarray
    battery: BatterySpec = field(default_factory=BatterySpec)

    def __post_init__(self):
        d = np.asarray(self.demand, dtype=float)
        p = np.asarray(self.pv, dtype=float)
        if d.ndim != 1 or d.shape != p.shape:
            raise ValueError("demand and pv must be equal-length 1-D series")
        if (d < 0).any() or (p < 0).any() or not (np.isfinite(d).all() and np.isfinite(p).all()):
            raise ValueError("demand and pv must be finite and >= 0")
        d.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "demand", d)
        object.__setattr__(self, "pv", p)

    def __len__(self):
        return len(self.demand)


@dataclass(frozen=True)
class Scenario:
    """A resolved scenario: config plus concrete households."""

    config: ScenarioConfig
    profiles: Tuple[ProsumerProfile, ...]
    # optional N x N prosumer connectivity; None means fully connected
    connectivity: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        T = self.config.horizon
        for i, p in enumerate(self.profiles):
            if len(p) != T:
                raise ValueError(f"profile {i} has {len(p)} steps, expected {T}")
        if self.connectivity is not None:
            c = np.asarray(self.connectivity, dtype=bool)
            n = len(self.profiles)
            if c.shape != (n, n):
                raise ValueError("connectivity must be N x N")
            object.__setattr__(self, "connectivity", c)

    @property
    def n(self) -> int:
        return len(self.profiles)

    @property
    def etas(self) -> Sequence[float]:
        return [p.battery.round_trip_eta for p in self.profiles]

"""Household profiles: CSV ingestion, synthetic generation, PV shifting and
efficiency sampling."""
from __future__ import annotations

import csv
import math
from dataclasses import replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .config import ProsumerProfile, Scenario, ScenarioConfig

CSV_COLUMNS = ("household_id", "timestamp", "demand_kwh", "pv_kwh")

# Independent random streams derived from the scenario seed.
_STREAM_PROFILES = 1
_STREAM_ETA = 2
_STREAM_SHIFT = 3
_STREAM_SUBSET = 4

ETA_CLIP = (0.05, 1.0)


class DataError(ValueError):
    pass


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


def load_profiles(path, config: ScenarioConfig) -> List[ProsumerProfile]:
    """Read a long-format quarter-hourly CSV (see ``CSV_COLUMNS``).

    Households are kept in order of first appearance; the first
    ``n_prosumers`` are used unless ``config.random_subset`` asks for a
    seeded sample.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from exc
    series = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise DataError(f"{path}: header must be {','.join(CSV_COLUMNS)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            hid, ts, d, pv = (c.strip() for c in row)
            try:
                stamp = datetime.fromisoformat(ts)
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad timestamp {ts!r}") from None
            values = []
            for col, raw in (("demand_kwh", d), ("pv_kwh", pv)):
                try:
                    v = float(raw)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: column {col} is not a number: {raw!r}") from None
                if not math.isfinite(v) or v < 0:
                    raise DataError(f"{path}:{lineno}: column {col} must be >= 0, got {raw}")
                values.append(v)
            series.setdefault(hid, []).append((stamp, values[0], values[1]))

    T = config.horizon
    step = timedelta(hours=config.dt)
    profiles = {}
    for hid, rows in series.items():
        rows.sort(key=lambda r: r[0])
        if len(rows) != T:
            raise DataError(f"{path}: household {hid} has {len(rows)} rows, expected {T}")
        for a, b in zip(rows, rows[1:]):
            if b[0] - a[0] != step:
                raise DataError(f"{path}: household {hid} is not on a {config.dt} h grid near {b[0]}")
        profiles[hid] = ProsumerProfile(
            np.array([r[1] for r in rows]), np.array([r[2] for r in rows]), config.battery
        )
    ids = list(profiles)
    if len(ids) < config.n_prosumers:
        raise DataError(
            f"{path}: need {config.n_prosumers} households, file has {len(ids)}"
        )
    if config.random_subset:
        picks = _rng(config.seed, _STREAM_SUBSET).choice(len(ids), config.n_prosumers, replace=False)
        ids = [ids[k] for k in sorted(picks)]
    return [profiles[h] for h in ids[: config.n_prosumers]]


def write_profiles_csv(path, profiles: Sequence[ProsumerProfile], config: ScenarioConfig) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i, p in enumerate(profiles):
            for t in range(len(p)):
                w.writerow([f"h{i:03d}", config.timestamp(t).isoformat(),
                            repr(float(p.demand[t])), repr(float(p.pv[t]))])


def synthesize_profiles(config: ScenarioConfig) -> List[ProsumerProfile]:
    """Seeded stand-in households with morning/evening demand peaks and
    daylight PV, sized so the cooperative has buyers and sellers at once.
    """
    rng = _rng(config.seed, _STREAM_PROFILES)
    n, days, per_day, dt = config.n_prosumers, config.days, config.steps_per_day, config.dt
    hours = (np.arange(per_day) + 0.5) * dt
    out = []
    for _ in range(n):
        scale = rng.uniform(0.7, 1.4)
        morning = rng.uniform(6.5, 8.5)
        evening = rng.uniform(18.0, 20.5)
        base_kw = (
            0.25
            + 0.9 * np.exp(-(((hours - morning) / 1.1) ** 2))
            + 1.6 * np.exp(-(((hours - evening) / 1.8) ** 2))
        )
        day_factor = rng.uniform(0.85, 1.15, size=(days, 1))
        noise = rng.lognormal(0.0, 0.25, size=(days, per_day))
        demand = scale * base_kw[None, :] * day_factor * noise * dt

        peak_kw = rng.uniform(2.5, 5.0)
        daylight = (hours > 6.0) & (hours < 18.0)
        bell = np.where(daylight, np.sin(np.pi * (hours - 6.0) / 12.0).clip(0) ** 1.5, 0.0)
        cloud = rng.uniform(0.5, 1.0, size=(days, 1))
        flicker = rng.uniform(0.9, 1.0, size=(days, per_day))
        pv = peak_kw * bell[None, :] * cloud * flicker * dt

        out.append(ProsumerProfile(demand.ravel(), pv.ravel(), config.battery))
    return out


def shift_pv(profile: ProsumerProfile, shift: float, dt: float = 0.25) -> ProsumerProfile:
    """Rotate PV later by ``shift`` hours, wrapping within each day."""
    per_day = int(round(24.0 / dt))
    k = int(round(shift / dt)) % per_day
    if k == 0:
        return profile
    pv = profile.pv.reshape(-1, per_day)
    return replace(profile, pv=np.roll(pv, k, axis=1).ravel())


def sample_shifts(config: ScenarioConfig) -> np.ndarray:
    """PV shift (hours) per household; zero for the unshifted share."""
    rng = _rng(config.seed, _STREAM_SHIFT)
    n = config.n_prosumers
    chosen = rng.random(n) < config.pv_shift_fraction
    span = rng.uniform(0.0, config.pv_shift_span, size=n)
    return np.where(chosen, np.round(span / config.dt) * config.dt, 0.0)


def sample_efficiencies(config: ScenarioConfig) -> np.ndarray:
    """Round-trip efficiencies from Normal(eta_mean, eta_std^2), clipped.

    One standard-normal draw per household regardless of parameters, so
    scenarios differing only in ``eta_std`` share the same draws.
    """
    z = _rng(config.seed, _STREAM_ETA).standard_normal(config.n_prosumers)
    return np.clip(config.eta_mean + config.eta_std * z, *ETA_CLIP)


def build_scenario(config: ScenarioConfig) -> Scenario:
    if config.data_source == "synthetic":
        profiles = synthesize_profiles(config)
    else:
        profiles = load_profiles(config.data_source, config)
    etas = sample_efficiencies(config)
    shifts = sample_shifts(config)
    resolved = []
    for p, eta, s in zip(profiles, etas, shifts):
        p = shift_pv(p, float(s), config.dt)
        resolved.append(replace(p, battery=config.battery.with_eta(float(eta))))
    return Scenario(config, resolved)

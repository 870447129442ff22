"""Residential battery model and the greedy local control policy."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class BatterySpec:
    """Battery parameters; energies in kWh, rates in kW.

    The round-trip efficiency is split evenly: ``sqrt(eta)`` on the way in
    and ``sqrt(eta)`` on the way out.
    """

    capacity: float = 6.8
    charge_limit: float = 1.3
    discharge_limit: float = 3.0
    soc_min_frac: float = 0.1
    soc_max_frac: float = 0.9
    round_trip_eta: float = 0.9
    degradation_frac: float = 0.001
    initial_soc_frac: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.soc_min_frac < self.soc_max_frac <= 1.0):
            raise ValueError("need 0 <= soc_min_frac < soc_max_frac <= 1")
        if not (0.0 < self.round_trip_eta <= 1.0):
            raise ValueError(f"round-trip efficiency {self.round_trip_eta} outside (0, 1]")
        if self.capacity <= 0 or self.charge_limit < 0 or self.discharge_limit < 0:
            raise ValueError("capacity must be > 0 and rate limits >= 0")
        if not (0.0 <= self.degradation_frac < 1.0):
            raise ValueError("degradation_frac must lie in [0, 1)")
        if not (self.soc_min_frac <= self.initial_soc_frac <= self.soc_max_frac):
            raise ValueError("initial SOC outside the SOC window")

    @property
    def leg_eta(self) -> float:
        return math.sqrt(self.round_trip_eta)

    def with_eta(self, eta: float) -> "BatterySpec":
        return replace(self, round_trip_eta=float(eta))

    def initial_state(self) -> "BatteryState":
        return BatteryState(self.initial_soc_frac * self.capacity, self.capacity, 0.0)


@dataclass(frozen=True)
class BatteryState:
    soc: float
    effective_capacity: float
    cumulative_throughput: float = 0.0

    def soc_bounds(self, spec: BatterySpec):
        return (spec.soc_min_frac * self.effective_capacity,
                spec.soc_max_frac * self.effective_capacity)


def battery_policy_greedy(state: BatteryState, residual: float, spec: BatterySpec, dt: float):
    """Charge from surplus, discharge into own deficit.

    ``residual`` is the meter-side energy left after PV and exchange:
    negative is surplus, positive is deficit. Returns ``(pb, new_state)``
    where ``pb > 0`` is energy drawn to charge and ``pb < 0`` is energy
    delivered by discharging.
    """
    leg = spec.leg_eta
    lo, hi = state.soc_bounds(spec)
    if residual < 0:
        # Charging also wears capacity, which lowers the ceiling; leave room.
        headroom = max(hi - state.soc, 0.0) / (1.0 + spec.soc_max_frac * spec.degradation_frac)
        pb = min(-residual, spec.charge_limit * dt, headroom / leg)
        stored = leg * pb
    elif residual > 0:
        pb = -min(residual, spec.discharge_limit * dt, max(state.soc - lo, 0.0) * leg)
        stored = pb / leg
    else:
        return 0.0, state
    if pb == 0.0:
        return 0.0, state
    moved = abs(stored)
    new_state = BatteryState(
        soc=state.soc + stored,
        effective_capacity=state.effective_capacity - spec.degradation_frac * moved,
        cumulative_throughput=state.cumulative_throughput + moved,
    )
    return pb, new_state


def soc_restoration_offset(initial: BatteryState, final: BatteryState, spec: BatterySpec) -> float:
    """Meter-side energy that would bring the final SOC back to the initial one.

    Negative when surplus stored energy would be discharged, positive when
    energy would have to be drawn to refill.
    """
    delta = final.soc - initial.soc
    leg = spec.leg_eta
    if delta > 0:
        return -leg * delta
    if delta < 0:
        return -delta / leg
    return 0.0

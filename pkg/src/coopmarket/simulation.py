"""Operation-cycle simulation under the three mechanisms.

0  no flexibility: every net position goes to the grid.
1  individual control: each battery serves its own household only.
2  exchange and control: net positions are cleared locally first, and
   batteries act on what the exchange leaves over.

Energies are kWh per interval. ``ex`` is signed (+ received, - delivered);
``pb`` is signed (+ drawn to charge, - delivered by discharging).
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .allocation import (
    AllocationMatrix,
    ConnectivityMatrix,
    allocation_to_dict,
    build_cost_matrix,
    solve_allocation,
)
from .battery import BatteryState, battery_policy_greedy, soc_restoration_offset
from .config import ProsumerProfile, Scenario
from .market import make_offer, net_position, positive_part, split_offers

MECHANISMS = (0, 1, 2)
_EPOCH = datetime(2000, 1, 1)


class StepRecord(NamedTuple):
    d: float
    pv: float
    ex: float
    pb: float
    D: float
    grid: float
    spill: float


def _record(d, pv, ex, pb):
    D = d - pv - ex + pb
    return StepRecord(d, pv, ex, pb, D, positive_part(D), positive_part(-D))


@dataclass(frozen=True)
class SimulationTrace:
    """Per-prosumer, per-step outcome of one operation cycle.

    Arrays are indexed ``[row, t]``; ``prosumers[row]`` is the scenario
    index of the household on that row. ``soc`` has T + 1 columns, the
    first being the initial state.
    """

    mechanism: int
    prosumers: tuple
    demand: np.ndarray
    pv: np.ndarray
    exchange: np.ndarray
    battery: np.ndarray
    net_demand: np.ndarray
    grid_import: np.ndarray
    spill: np.ndarray
    soc: np.ndarray
    theta: np.ndarray
    etas: np.ndarray

    @property
    def horizon(self) -> int:
        return self.demand.shape[1]

    def row(self, prosumer: int) -> int:
        return self.prosumers.index(prosumer)

    def records(self, prosumer: int) -> List[StepRecord]:
        r = self.row(prosumer)
        return [
            StepRecord(*(float(a[r, t]) for a in (self.demand, self.pv, self.exchange, self.battery,
                                                  self.net_demand, self.grid_import, self.spill)))
            for t in range(self.horizon)
        ]

    def for_prosumer(self, prosumer: int) -> dict:
        r = self.row(prosumer)
        return {name: getattr(self, name)[r] for name in
                ("demand", "pv", "exchange", "battery", "net_demand", "grid_import", "spill", "soc")}


def step_no_flexibility(profile: ProsumerProfile, t: int) -> StepRecord:
    return _record(float(profile.demand[t]), float(profile.pv[t]), 0.0, 0.0)


def step_individual(profile: ProsumerProfile, state: BatteryState, t: int, dt: float = 0.25):
    d, pv = float(profile.demand[t]), float(profile.pv[t])
    pb, state = battery_policy_greedy(state, net_position(d, pv), profile.battery, dt)
    return _record(d, pv, 0.0, pb), state


def step_exchange(
    profiles: Sequence[ProsumerProfile],
    states: Sequence[BatteryState],
    t: int,
    dt: float = 0.25,
    *,
    timestamp=None,
    connectivity: Optional[np.ndarray] = None,
    big_m: Optional[float] = None,
    lp_dump: Optional[list] = None,
):
    """One interval of exchange and control for the given households.

    Returns ``(records, new_states, allocation)``; ``allocation`` is None
    when one side of the market is empty and nothing is cleared.
    ``connectivity`` is an N x N boolean matrix over the given households.
    """
    n = len(profiles)
    if timestamp is None:
        timestamp = _EPOCH + timedelta(hours=dt * t)
    d = [float(p.demand[t]) for p in profiles]
    pv = [float(p.pv[t]) for p in profiles]
    nets = [net_position(a, b) for a, b in zip(d, pv)]

    offers, owners = [], []
    for i, (net, p) in enumerate(zip(nets, profiles)):
        if net != 0.0:
            offers.append(make_offer(net, p.battery.round_trip_eta, timestamp, dt))
            owners.append(i)
    bids, asks = split_offers(offers)
    buyers = [i for i, o in zip(owners, offers) if o.is_bid]
    sellers = [i for i, o in zip(owners, offers) if not o.is_bid]

    ex = [0.0] * n
    alloc = None
    if buyers and sellers:
        demands = [o.quantity for o in bids]
        supplies = [o.quantity for o in asks]
        etas = [o.efficiency for o in asks]
        cm = None
        if connectivity is not None:
            full = np.ones((len(buyers) + 1, len(sellers) + 1), dtype=bool)
            full[:-1, :-1] = connectivity[np.ix_(buyers, sellers)]
            cm = ConnectivityMatrix(full)
        kwargs = {} if big_m is None else {"big_m": big_m}
        costs = build_cost_matrix(etas, len(buyers), cm, **kwargs)
        alloc = solve_allocation(demands, supplies, costs, cm)
        if lp_dump is not None:
            entry = allocation_to_dict(demands, supplies, costs, alloc)
            entry.update(t=t, buyers=buyers, sellers=sellers)
            lp_dump.append(entry)
        received = alloc.received()
        delivered = alloc.delivered()
        for k, i in enumerate(buyers):
            ex[i] = float(received[k])
        for k, s in enumerate(sellers):
            ex[s] = -float(delivered[k])

    records, new_states = [], []
    for i, p in enumerate(profiles):
        # Whatever the exchange did not place stays with the household:
        # a buyer's uncovered deficit, a seller's unsold surplus.
        residual = nets[i] - ex[i]
        pb, st = battery_policy_greedy(states[i], residual, p.battery, dt)
        records.append(_record(d[i], pv[i], ex[i], pb))
        new_states.append(st)
    return records, new_states, alloc


def run_simulation(
    scenario: Scenario,
    mechanism: int,
    include: Optional[Sequence[int]] = None,
    lp_dump: Optional[list] = None,
) -> SimulationTrace:
    """Simulate the operation cycle for ``include`` (default: everyone)."""
    if mechanism not in MECHANISMS:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    ids = tuple(range(scenario.n)) if include is None else tuple(sorted(set(include)))
    if not ids:
        raise ValueError("empty prosumer subset")
    if ids[0] < 0 or ids[-1] >= scenario.n:
        raise ValueError("prosumer index out of range")
    cfg = scenario.config
    profiles = [scenario.profiles[i] for i in ids]
    conn = None
    if scenario.connectivity is not None:
        conn = scenario.connectivity[np.ix_(ids, ids)]
    n, T, dt = len(ids), cfg.horizon, cfg.dt

    cols = np.zeros((7, n, T))
    soc = np.zeros((n, T + 1))
    initial = [p.battery.initial_state() for p in profiles]
    states = list(initial)
    soc[:, 0] = [s.soc for s in states]

    for t in range(T):
        if mechanism == 0:
            recs = [step_no_flexibility(p, t) for p in profiles]
        elif mechanism == 1:
            recs = []
            for k, p in enumerate(profiles):
                rec, states[k] = step_individual(p, states[k], t, dt)
                recs.append(rec)
        else:
            recs, states, _ = step_exchange(
                profiles, states, t, dt, timestamp=cfg.timestamp(t),
                connectivity=conn, big_m=cfg.big_m, lp_dump=lp_dump,
            )
        cols[:, :, t] = np.array(recs).T
        soc[:, t + 1] = [s.soc for s in states]

    theta = np.array([
        soc_restoration_offset(a, b, p.battery) for a, b, p in zip(initial, states, profiles)
    ])
    for a in (*cols, soc, theta):
        a.flags.writeable = False
    return SimulationTrace(
        mechanism, ids, *cols, soc, theta,
        np.array([p.battery.round_trip_eta for p in profiles]),
    )


def run_counterfactual_without(scenario: Scenario, mechanism: int, excluded: int,
                               include: Optional[Sequence[int]] = None) -> SimulationTrace:
    ids = range(scenario.n) if include is None else include
    if len(ids) < 2:
        raise ValueError("counterfactual needs at least two prosumers")
    rest = [i for i in ids if i != excluded]
    if len(rest) == len(ids):
        raise ValueError(f"prosumer {excluded} is not part of the run")
    return run_simulation(scenario, mechanism, rest)

import numpy as np
import pytest

from coopmarket.battery import BatterySpec
from coopmarket.config import ProsumerProfile, Scenario, ScenarioConfig

ACCEPTANCE_LINES = []


def make_scenario(demands, pvs, etas=None, days=1, **config):
    """Scenario from explicit per-interval series (one day = 96 steps)."""
    cfg = ScenarioConfig(n_prosumers=len(demands), days=days, **config)
    T = cfg.horizon
    etas = etas or [cfg.eta_mean] * len(demands)
    profiles = []
    for d, pv, eta in zip(demands, pvs, etas):
        d = np.broadcast_to(np.asarray(d, dtype=float), (T,))
        pv = np.broadcast_to(np.asarray(pv, dtype=float), (T,))
        profiles.append(ProsumerProfile(d, pv, cfg.battery.with_eta(eta)))
    return Scenario(cfg, profiles)


@pytest.fixture
def spec():
    return BatterySpec(round_trip_eta=0.81)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

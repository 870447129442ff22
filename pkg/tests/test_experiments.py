import numpy as np
import pytest

from coopmarket.config import ScenarioConfig
from coopmarket.data import shift_pv
from coopmarket.experiments import run_experiment_loss_reduction, run_experiment_welfare
from coopmarket.settlement import settle, system_loss
from coopmarket.simulation import run_simulation

from conftest import make_scenario


def bell_day():
    h = (np.arange(96) + 0.5) * 0.25
    pv = np.where((h > 6) & (h < 18), np.sin(np.pi * (h - 6) / 12).clip(0), 0.0) * 0.8
    demand = 0.1 + 0.3 * np.exp(-(((h - 19) / 2) ** 2))
    return demand, pv


def test_complementary_pv_reduces_loss():
    demand, pv = bell_day()
    sc = make_scenario([demand, demand], [pv, pv], etas=[0.9, 0.9])
    shifted = shift_pv(sc.profiles[1], 6.0)
    sc = type(sc)(sc.config, (sc.profiles[0], shifted))
    l1 = system_loss(run_simulation(sc, 1))
    l2 = system_loss(run_simulation(sc, 2))
    assert l1 - l2 >= 0
    assert np.abs(run_simulation(sc, 2).exchange).sum() > 0


def test_single_prosumer_no_reduction():
    rep = run_experiment_loss_reduction(ScenarioConfig(days=1), 2, sizes=(1,), eta_stds=(0.05,))
    assert [r["loss_reduction"] for r in rep.rows] == [0.0, 0.0]


def test_loss_experiment_deterministic():
    cfg = ScenarioConfig(days=1, seed=3)
    a = run_experiment_loss_reduction(cfg, 3, sizes=(4,), eta_stds=(0.0, 0.1))
    b = run_experiment_loss_reduction(cfg, 3, sizes=(4,), eta_stds=(0.0, 0.1))
    assert a.to_dict() == b.to_dict()
    assert len(a.rows) == 6 and len(a.summary) == 2
    assert [r["seed"] for r in a.rows[:3]] == [3, 4, 5]


def test_symmetric_pair_equal_improvements():
    demand, pv = bell_day()
    sc = make_scenario([demand, demand], [pv, pv])
    imp = settle(sc).improvements()
    assert np.array_equal(imp[0], imp[1])


def test_welfare_points_above_diagonal():
    rep = run_experiment_welfare(ScenarioConfig(n_prosumers=6, days=2, seed=3))
    row = rep.rows[0]
    assert row["feasible"]
    for p in rep.improvements:
        assert p["gain_2"] >= p["gain_1"] - 1e-9


def test_welfare_needs_two():
    with pytest.raises(ValueError):
        run_experiment_welfare(ScenarioConfig(n_prosumers=1))

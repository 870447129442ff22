import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopmarket.config import ConfigError, ScenarioConfig
from coopmarket.data import (
    DataError, build_scenario, load_profiles, sample_efficiencies, shift_pv,
    synthesize_profiles, write_profiles_csv,
)
from coopmarket.simulation import run_simulation


@pytest.fixture
def csv_file(tmp_path):
    cfg = ScenarioConfig(n_prosumers=10, seed=9)
    path = tmp_path / "profiles.csv"
    write_profiles_csv(path, synthesize_profiles(cfg), cfg)
    return path


def test_load_profiles(csv_file):
    cfg = ScenarioConfig(n_prosumers=10, data_source=str(csv_file))
    profiles = load_profiles(csv_file, cfg)
    assert len(profiles) == 10 and all(len(p) == 672 for p in profiles)
    original = synthesize_profiles(ScenarioConfig(n_prosumers=10, seed=9))
    assert np.array_equal(profiles[3].demand, original[3].demand)


def test_load_profiles_negative_cell(csv_file):
    lines = csv_file.read_text().splitlines()
    fields = lines[5].split(",")
    fields[3] = "-0.5"
    lines[5] = ",".join(fields)
    csv_file.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=r":6: column pv_kwh"):
        load_profiles(csv_file, ScenarioConfig(n_prosumers=10))


def test_load_profiles_too_few_households(csv_file):
    with pytest.raises(DataError, match="need 30 households"):
        load_profiles(csv_file, ScenarioConfig(n_prosumers=30))


def test_load_profiles_ragged(csv_file):
    lines = csv_file.read_text().splitlines()
    del lines[100]
    csv_file.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="671 rows"):
        load_profiles(csv_file, ScenarioConfig(n_prosumers=10))


def test_load_profiles_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("id,time,load,solar\n")
    with pytest.raises(DataError, match="header"):
        load_profiles(p, ScenarioConfig())


def test_load_profiles_random_subset(csv_file):
    cfg = ScenarioConfig(n_prosumers=4, random_subset=True, seed=3)
    a = load_profiles(csv_file, cfg)
    b = load_profiles(csv_file, cfg)
    assert all(np.array_equal(x.demand, y.demand) for x, y in zip(a, b))


def test_scenario_from_csv(csv_file):
    cfg = ScenarioConfig(n_prosumers=10, data_source=str(csv_file), seed=9)
    assert build_scenario(cfg).n == 10


def test_synthesize_deterministic():
    cfg = ScenarioConfig(n_prosumers=3, seed=1)
    a, b = synthesize_profiles(cfg), synthesize_profiles(cfg)
    assert all(x.demand.tobytes() == y.demand.tobytes() and x.pv.tobytes() == y.pv.tobytes()
               for x, y in zip(a, b))


@pytest.mark.parametrize("seed", [0, 1, 17])
def test_synthesize_shapes(seed):
    cfg = ScenarioConfig(n_prosumers=5, seed=seed)
    per_day = cfg.steps_per_day
    hours = (np.arange(per_day) + 0.5) * cfg.dt
    night = (hours <= 6) | (hours >= 18)
    for p in synthesize_profiles(cfg):
        assert len(p) == cfg.days * 24 / cfg.dt
        assert (p.demand >= 0).all() and (p.pv >= 0).all()
        assert not p.pv.reshape(-1, per_day)[:, night].any()


def test_population_has_both_sides():
    sc = build_scenario(ScenarioConfig(n_prosumers=10, seed=0))
    net = np.array([p.demand - p.pv for p in sc.profiles])
    both = ((net > 0).any(axis=0) & (net < 0).any(axis=0)).mean()
    assert both > 0.3


def test_single_household_degenerates():
    sc = build_scenario(ScenarioConfig(n_prosumers=1, days=1, seed=5))
    a, b = run_simulation(sc, 2), run_simulation(sc, 1)
    assert np.array_equal(a.net_demand, b.net_demand)


def test_shift_identity():
    p = synthesize_profiles(ScenarioConfig(n_prosumers=1, days=2))[0]
    assert shift_pv(p, 0.0) is p


def test_shift_six_hours():
    p = synthesize_profiles(ScenarioConfig(n_prosumers=1, days=2))[0]
    q = shift_pv(p, 6.0)
    assert np.array_equal(q.pv.reshape(2, 96), np.roll(p.pv.reshape(2, 96), 24, axis=1))
    assert np.array_equal(q.demand, p.demand)


def test_shift_wraps_within_day():
    p = synthesize_profiles(ScenarioConfig(n_prosumers=1, days=2))[0]
    assert np.array_equal(shift_pv(shift_pv(p, 10.0), 14.0).pv, p.pv)


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=0, max_value=6))
def test_shift_preserves_daily_energy(shift):
    p = synthesize_profiles(ScenarioConfig(n_prosumers=1, days=3, seed=2))[0]
    q = shift_pv(p, shift)
    assert np.array_equal(np.sort(q.pv.reshape(3, 96), axis=1), np.sort(p.pv.reshape(3, 96), axis=1))
    assert np.allclose(q.pv.reshape(3, 96).sum(axis=1), p.pv.reshape(3, 96).sum(axis=1), rtol=0, atol=1e-12)


def test_efficiencies_degenerate():
    assert (sample_efficiencies(ScenarioConfig(eta_std=0.0, eta_mean=0.85)) == 0.85).all()


def test_efficiencies_clip():
    assert (sample_efficiencies(ScenarioConfig(eta_mean=1.5, eta_std=0.05)) == 1.0).all()


def test_efficiencies_reproducible():
    cfg = ScenarioConfig(eta_mean=0.9, eta_std=0.05, seed=4)
    a = sample_efficiencies(cfg)
    assert np.array_equal(a, sample_efficiencies(cfg))
    assert ((a > 0) & (a <= 1)).all()


def test_efficiency_draws_shared_across_spreads():
    lo = sample_efficiencies(ScenarioConfig(eta_std=0.02, seed=4)) - 0.9
    hi = sample_efficiencies(ScenarioConfig(eta_std=0.04, seed=4)) - 0.9
    unclipped = np.abs(hi) < 0.09
    assert np.allclose(hi[unclipped], 2 * lo[unclipped])


def test_scenario_bytes_identical():
    cfg = ScenarioConfig(n_prosumers=4, seed=12)
    a, b = build_scenario(cfg), build_scenario(cfg)
    for x, y in zip(a.profiles, b.profiles):
        assert x.pv.tobytes() == y.pv.tobytes() and x.battery == y.battery


def test_config_json_round_trip(tmp_path):
    cfg = ScenarioConfig(n_prosumers=3, eta_std=0.1)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ScenarioConfig.from_json(path) == cfg


@pytest.mark.parametrize("bad", [{"n_prosumers": 0}, {"dt": 0.7}, {"alpha_default": 1.0},
                                 {"eta_std": -1}, {"colour": "red"}, {"battery": {"size": 3}}])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(bad)


def test_config_missing_file_named(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        ScenarioConfig.from_json(tmp_path / "nope.json")

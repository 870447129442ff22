import csv
import json

import pytest

from coopmarket.cli import main
from coopmarket.config import ScenarioConfig
from coopmarket.data import CSV_COLUMNS, load_profiles


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"n_prosumers": 3, "days": 1}))
    return path


def test_exp_welfare(tmp_path, config, capsys):
    out = tmp_path / "out"
    assert main(["exp-welfare", "--config", str(config), "--seed", "7", "--out-dir", str(out)]) == 0
    rows = list(csv.DictReader((out / "exp_welfare.csv").open()))
    assert rows[0]["seed"] == "7" and rows[0]["n_prosumers"] == "3"
    assert len(list(csv.DictReader((out / "exp_welfare_improvements.csv").open()))) == 3
    embedded = json.loads((out / "exp_welfare_config.json").read_text())["config"]
    assert embedded["seed"] == 7


def test_missing_config(tmp_path, capsys):
    missing = tmp_path / "missing.json"
    assert main(["exp-welfare", "--config", str(missing)]) != 0
    err = capsys.readouterr().err
    assert str(missing) in err and len(err.strip().splitlines()) == 1


def test_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        main(["settle", "--bogus"])
    assert exc.value.code != 0


def test_gen_data(tmp_path):
    out = tmp_path / "data"
    assert main(["gen-data", "--n", "10", "--days", "7", "--out-dir", str(out)]) == 0
    with (out / "profiles.csv").open() as fh:
        assert tuple(next(csv.reader(fh))) == CSV_COLUMNS
    profiles = load_profiles(out / "profiles.csv", ScenarioConfig(n_prosumers=10))
    assert len(profiles) == 10 and len(profiles[0]) == 672


def test_simulate_trace_and_dump(tmp_path, config):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(config), "--mechanism", "2", "--out-dir", str(out), "--dump-lp"]) == 0
    with (out / "trace_m2.csv").open() as fh:
        reader = csv.reader(fh)
        assert next(reader) == ["prosumer", "t", "d", "pv", "ex", "pb", "D", "grid", "spill", "soc"]
        assert sum(1 for _ in reader) == 3 * 96
    header = json.loads((out / "trace_m2.json").read_text())
    assert header["trace"]["mechanism"] == 2 and header["config"]["n_prosumers"] == 3
    dumps = (out / "lp_instances.jsonl").read_text().splitlines()
    assert dumps and "solution" in json.loads(dumps[0])


def test_settle_json(tmp_path, config):
    out = tmp_path / "s"
    assert main(["settle", "--config", str(config), "--format", "json", "--out-dir", str(out)]) == 0
    rep = json.loads((out / "settlement.json").read_text())
    assert {"alpha", "feasible", "welfare", "log_f_20", "log_f_10", "agents"} <= set(rep["settlement"])


def test_settle_csv_footer(tmp_path, config):
    out = tmp_path / "s"
    assert main(["settle", "--config", str(config), "--out-dir", str(out)]) == 0
    text = (out / "settlement.csv").read_text()
    for key in ("alpha", "feasible", "sw_0", "sw_1", "sw_2", "log_f_20", "log_f_10"):
        assert f"# {key}," in text


def test_rerun_byte_identical(tmp_path, config):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["exp-loss", "--config", str(config), "--trials", "2", "--sizes", "3", "--eta-stds", "0", "0.1"]
    assert main(args + ["--out-dir", str(a)]) == 0
    assert main(args + ["--out-dir", str(b)]) == 0
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()

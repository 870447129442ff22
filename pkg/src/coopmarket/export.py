"""CSV/JSON writers for traces, settlements and experiment reports.

Floats are written with ``repr`` so files round-trip exactly and are
byte-stable across runs.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .config import ScenarioConfig
from .experiments import ROW_FIELDS, ExperimentReport
from .settlement import SettlementReport
from .simulation import SimulationTrace

TRACE_COLUMNS = ("prosumer", "t", "d", "pv", "ex", "pb", "D", "grid", "spill", "soc")
AGENT_COLUMNS = ("prosumer", "L", "marginal", "w", "R", "u0", "u1", "u2")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


def write_rows(path, columns, rows, footer=None) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])
        for key, value in (footer or {}).items():
            w.writerow([f"# {key}", _cell(value)])
    return path


def write_scenario(path, config: ScenarioConfig, **extra) -> Path:
    return write_json(path, {"config": config.to_dict(), **extra})


def trace_rows(trace: SimulationTrace):
    arrays = (trace.demand, trace.pv, trace.exchange, trace.battery,
              trace.net_demand, trace.grid_import, trace.spill)
    for r, i in enumerate(trace.prosumers):
        for t in range(trace.horizon):
            row = {"prosumer": i, "t": t, "soc": float(trace.soc[r, t + 1])}
            for name, a in zip(TRACE_COLUMNS[2:9], arrays):
                row[name] = float(a[r, t])
            yield row


def write_trace(out_dir, trace: SimulationTrace, config: ScenarioConfig, fmt: str = "csv"):
    out_dir = Path(out_dir)
    stem = f"trace_m{trace.mechanism}"
    header = {
        "mechanism": trace.mechanism,
        "prosumers": list(trace.prosumers),
        "etas": trace.etas.tolist(),
        "theta": trace.theta.tolist(),
        "initial_soc": trace.soc[:, 0].tolist(),
    }
    paths = [write_scenario(out_dir / f"{stem}.json", config, trace=header)]
    if fmt == "json":
        header["records"] = list(trace_rows(trace))
        paths[0] = write_scenario(out_dir / f"{stem}.json", config, trace=header)
    else:
        paths.append(write_rows(out_dir / f"{stem}.csv", TRACE_COLUMNS, trace_rows(trace)))
    return paths


def settlement_footer(report: SettlementReport) -> dict:
    return {
        "alpha": report.alpha,
        "feasible": report.feasible,
        "sw_0": report.welfare[0],
        "sw_1": report.welfare[1],
        "sw_2": report.welfare[2],
        "log_f_20": report.log_f_20,
        "log_f_10": report.log_f_10,
    }


def write_settlement(out_dir, report: SettlementReport, config: ScenarioConfig, fmt: str = "csv"):
    out_dir = Path(out_dir)
    paths = [write_scenario(out_dir / "scenario.json", config)]
    if fmt == "json":
        paths.append(write_json(out_dir / "settlement.json",
                                {"config": config.to_dict(), "settlement": report.to_dict()}))
    else:
        paths.append(write_rows(out_dir / "settlement.csv", AGENT_COLUMNS, report.agent_rows(),
                                settlement_footer(report)))
    return paths


def write_experiment(out_dir, report: ExperimentReport, fmt: str = "csv"):
    out_dir = Path(out_dir)
    stem = f"exp_{report.kind}"
    if fmt == "json":
        return [write_json(out_dir / f"{stem}.json", report.to_dict())]
    paths = [
        write_json(out_dir / f"{stem}_config.json", {"config": report.config}),
        write_rows(out_dir / f"{stem}.csv", ROW_FIELDS, report.rows),
    ]
    if report.summary:
        cols = tuple(report.summary[0])
        paths.append(write_rows(out_dir / f"{stem}_summary.csv", cols, report.summary))
    if report.improvements:
        paths.append(write_rows(out_dir / f"{stem}_improvements.csv",
                                ("prosumer", "gain_1", "gain_2"), report.improvements))
    return paths

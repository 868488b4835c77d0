import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from capflow import cli
from capflow import reports
from capflow.errors import NumericError


def capflow(*args, env=None, cwd=None):
    full_env = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "capflow.cli", *args], capture_output=True, text=True, env=full_env, cwd=cwd)


@pytest.fixture(scope="module")
def flow_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("flow") / "trace.csv"
    proc = capflow("flow", "--surface", "half-clifford", "--a", "0,1,0,0", "--tmax", "1", "--steps", "50", "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    return out


def test_flow_trace_file(flow_csv):
    lines = flow_csv.read_text().splitlines()
    assert lines[0] == "t,R_t,area,wet,boundary,E,monotone_quantity,slope_flag"
    assert len(lines) == 52
    rows = reports.parse_trace(flow_csv)
    assert [r["slope_flag"] for r in rows] == [0] * 51
    assert rows[-1]["t"] == 1.0
    # the horizontal flow keeps the hemisphere, so R_t stays pi/2
    assert all(abs(r["R_t"] - math.pi / 2) < 1e-12 for r in rows)
    m = [r["monotone_quantity"] for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(m, m[1:]))


def test_index_command(tmp_path):
    out = tmp_path / "index.json"
    assert cli.main(["index", "--surface", "half_clifford_torus", "--flavor", "morse", "--out", str(out)]) == 0
    rep = reports.parse_report(out)
    assert rep["ind"] == 4 and rep["a"] + rep["b"] == rep["ind_robin"]


def test_verify_suite_exits_zero(capsys):
    assert cli.main(["verify", "--suite", "conformal"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] is True


@pytest.mark.parametrize(
    "argv",
    [
        ["energy", "--surface", "moebius_strip"],
        ["energy", "--bogus"],
        ["energy", "--tol", "not_a_tolerance=1"],
        ["flow", "--surface", "half_equator"],
        ["flow", "--a", "0,1,0,0", "--steps", "1"],
        ["energy", "--param", "radius=abc"],
        [],
    ],
)
def test_usage_errors_exit_two(argv, capsys):
    assert cli.main(argv) == 2


def test_unwritable_output_exits_two(tmp_path):
    assert cli.main(["limit", "--out", str(tmp_path / "missing" / "x.json")]) == 2


def test_config_file_with_flag_override(tmp_path):
    config = {
        "surface": {"name": "half_equator", "params": {"radius": 1.2, "gamma": 1.0}},
        "output": {"path": str(tmp_path / "from_config.json")},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config))
    cfg = cli.load_config(["energy", "--config", str(path), "--param", "gamma=0.5"])
    assert cfg.surface == "half_equator"
    assert cfg.surface_params == {"radius": 1.2, "gamma": 0.5}
    assert cfg.out.endswith("from_config.json")
    assert cli.run(cfg) == 0
    rep = reports.parse_report(cfg.out)
    assert abs(rep["energy"]["area"] - rep["energy"]["E_R_gamma"]) > 0


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"surfac": "half_equator"}))
    assert cli.main(["energy", "--config", str(path)]) == 2


def test_outputs_are_byte_identical_across_runs_and_workers(tmp_path):
    args = ["flow", "--surface", "half_equator", "--param", "gamma=1.0", "--a", "0,0.6,0.8,0", "--steps", "4"]
    texts = []
    for k, workers in enumerate(("1", "1", "4")):
        out = tmp_path / f"t{k}.csv"
        proc = capflow(*args, "--out", str(out), env={"CAPFLOW_WORKERS": workers})
        assert proc.returncode == 0, proc.stderr
        texts.append(out.read_bytes())
    assert texts[0] == texts[1] == texts[2]
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert cli.main(["dual", "--trials", "3", "--out", str(a)]) == 0
    assert cli.main(["dual", "--trials", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_fatal_flag_turns_failed_checks_into_exit_one(monkeypatch, tmp_path):
    monkeypatch.setitem(cli.RUNNERS, "limit", lambda cfg: ({"value": 1.0}, False))
    assert cli.main(["limit", "--out", str(tmp_path / "x.json")]) == 0
    assert cli.main(["limit", "--fatal", "--out", str(tmp_path / "x.json")]) == 1


def test_numeric_failure_exits_three(monkeypatch, tmp_path):
    def boom(cfg):
        raise NumericError("did not converge", "spectral_forms")

    monkeypatch.setitem(cli.RUNNERS, "limit", boom)
    assert cli.main(["limit", "--out", str(tmp_path / "x.json")]) == 3


def test_report_round_trip(tmp_path):
    data = {"b": [1, 2.0, float("nan")], "a": {"x": np.float64(0.1), "y": np.arange(3), "z": True, "w": None}, "inf": -float("inf")}
    path = tmp_path / "r.json"
    reports.emit_report(data, path)
    back = reports.parse_report(path)
    assert list(back) == sorted(back)
    assert back["a"] == {"w": None, "x": 0.1, "y": [0, 1, 2], "z": True}
    assert back["b"][:2] == [1, 2.0] and isinstance(back["b"][1], float)
    assert math.isnan(back["b"][2]) and back["inf"] == -math.inf


@given(st.floats(allow_nan=False))
def test_float_text_parses_back_bit_identically(x):
    text = reports.format_float(x)
    assert "." in text or "e" in text or "Infinity" in text
    back = json.loads(text)
    assert isinstance(back, float)
    assert back == x and math.copysign(1.0, back) == math.copysign(1.0, x)

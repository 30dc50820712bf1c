import json
import subprocess
import sys

import numpy as np
import pytest

from specbox.cli import main
from specbox.config import ConfigError, parse_config
from specbox.heat import HeatTraceSeries
from specbox.report import SCHEMA_VERSION, dumps, series_csv


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc, indent=2))
    return str(p)


COS_1D = {"problem": {"sides": [1.0]}, "potential": {"terms": [{"m": [1], "c": 0.8}, {"m": [2], "c": -0.5}]}}
PRODUCT_2D = {"problem": {"sides": [1.0, 2 ** 0.25]},
              "potential": {"terms": [{"m": [1, 1], "c": 1.0}, {"m": [2, 0], "c": 0.3}]},
              "params": {"K": 16}}


def run(tmp_path, task, doc, *extra):
    out = tmp_path / f"out_{task}"
    code = main([task, "--config", write(tmp_path, f"{task}.json", doc), "--out", str(out), *extra])
    return code, out


def test_spectrum_writes_report_and_csv(tmp_path):
    code, out = run(tmp_path, "spectrum", COS_1D)
    assert code == 0
    doc = json.loads((out / "spectrum.json").read_text())
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["status"] == "pass" and doc["task"] == "spectrum"
    assert doc["config"]["potential"]["terms"][0]["m"] == [1]
    csv = (out / "spectrum_eigenvalues.csv").read_text().splitlines()
    assert csv[0] == "index,eigenvalue" and len(csv) == doc["result"]["trusted"] + 1


def test_reports_are_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    cfg = write(tmp_path, "c.json", PRODUCT_2D)
    assert main(["verify", "--config", cfg, "--out", str(a), "--seed", "3"]) == 0
    assert main(["verify", "--config", cfg, "--out", str(b), "--seed", "3", "--threads", "1"]) == 0
    assert (a / "verify.json").read_bytes() == (b / "verify.json").read_bytes()


def test_config_echo_round_trip():
    cfg = parse_config(json.dumps(PRODUCT_2D), task="fit")
    again = parse_config(dumps(cfg.echo()))
    assert again == cfg


def test_invalid_config_is_line_anchored(tmp_path, capsys):
    text = '{\n  "task": "spectrum",\n  "problem": {\n    "bc": ["DD"]\n  }\n}\n'
    assert main(["spectrum", "--config", write(tmp_path, "bad.json", text)]) == 1
    err = capsys.readouterr().err
    assert "bad.json:3: problem.sides" in err
    with pytest.raises(ConfigError, match=r"<config>:2: invalid JSON"):
        parse_config('{\n  "task": ,\n}')
    with pytest.raises(ConfigError, match="expected 2"):
        parse_config(json.dumps({"problem": {"sides": [1, 1]}, "potential": {"terms": [{"m": [1], "c": 1}]}}),
                     task="spectrum")
    with pytest.raises(ConfigError, match="second_potential"):
        parse_config(json.dumps(PRODUCT_2D), task="compare")


def test_usage_errors(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "missing.json")]) == 1
    doc = dict(COS_1D, task="fit")
    assert main(["spectrum", "--config", write(tmp_path, "t.json", doc)]) == 1
    assert run(tmp_path, "spectrum", COS_1D, "--threads", "0")[0] == 1
    big = {"problem": {"sides": [1.0, 1.0]}, "params": {"K": 200}}
    assert run(tmp_path, "spectrum", big)[0] == 1
    three = {"problem": {"sides": [1.0, 1.1, 1.2]}, "params": {"K": 6}}
    assert run(tmp_path, "verify", three)[0] == 1


def test_verification_failure_exit_code(tmp_path):
    doc = dict(COS_1D, params={"tolerance": 1e-300})
    code, out = run(tmp_path, "verify", doc)
    assert code == 2
    rep = json.loads((out / "verify.json").read_text())
    assert rep["status"] == "fail" and not rep["result"]["passed"]


def test_verify_runs_all_2d_checks(tmp_path):
    code, out = run(tmp_path, "verify", PRODUCT_2D)
    assert code == 0
    names = [r["name"] for r in json.loads((out / "verify.json").read_text())["result"]["reports"]]
    assert names == ["torus_image_2d", "trace_quadrupling_2d", "factorization[1, 0]", "factorization[0, 1]"]


def test_verify_1d(tmp_path):
    code, out = run(tmp_path, "verify", COS_1D)
    assert code == 0
    assert len(json.loads((out / "verify.json").read_text())["result"]["reports"]) == 6


def test_fit_csv_columns(tmp_path):
    code, out = run(tmp_path, "fit", COS_1D)
    assert code == 0
    head = (out / "fit_fit.csv").read_text().splitlines()[0]
    assert head == "exponent,fitted,predicted,deviation"
    assert (out / "fit_series.csv").read_text().startswith("t,value,tail_bound\n")
    rows = json.loads((out / "fit.json").read_text())["result"]["rows"]
    assert all(r["passed"] for r in rows)


def test_heat_trace_and_empty_series(tmp_path):
    doc = dict(COS_1D, params={"t_grid": [0.01, 0.02, 0.05]})
    code, out = run(tmp_path, "heat-trace", doc)
    assert code == 0
    assert len((out / "heat-trace_series.csv").read_text().splitlines()) == 4
    empty = HeatTraceSeries(np.zeros(0), np.zeros(0), np.zeros(0))
    assert series_csv(empty) == "t,value,tail_bound\n"


def test_decompose_and_invariants(tmp_path):
    code, out = run(tmp_path, "decompose", PRODUCT_2D)
    assert code == 0
    res = json.loads((out / "decompose.json").read_text())["result"]
    assert res["irrationality"]["relation"] is None
    assert {tuple(d["direction"]) for d in res["directional"]} == {(1, 1), (1, -1), (1, 0)}
    doc = dict(PRODUCT_2D, params={"heat": False})
    code, out = run(tmp_path, "invariants", doc)
    assert code == 0
    res = json.loads((out / "invariants.json").read_text())["result"]
    assert res["separability"]["verdict"].startswith("separated")


def test_compare_reports_verdict(tmp_path):
    doc = dict(PRODUCT_2D, params={"heat": False},
               second_potential={"terms": [{"m": [1, 1], "c": 1.0}, {"m": [2, 0], "c": 0.31}]})
    code, out = run(tmp_path, "compare", doc)
    assert code == 0
    res = json.loads((out / "compare.json").read_text())["result"]
    assert res["verdict"].startswith("separated by invariant")


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "specbox.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--config" in proc.stdout

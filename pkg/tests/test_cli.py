import csv
import json
import subprocess
import sys

import jsonschema
import pytest

from metastab.cli import EXIT_GATE, EXIT_OK, EXIT_RESOURCE, EXIT_SCHEMA, code_version, dumps, load_schema, main


def write(path, obj):
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


def run(tmp_path, config, *flags, name="out"):
    cfg = write(tmp_path / f"{name}.json", config)
    out = tmp_path / name
    return main(["run", cfg, "--out", str(out), *flags]), out


def test_ep_fi_run_writes_outputs(tmp_path):
    code, out = run(tmp_path, {"experiment": "ep-fi", "states": 2})
    assert code == EXIT_OK
    record = json.loads((out / "result.json").read_text())
    assert record["passed"] and record["code_version"] == code_version()
    assert record["config"]["model"] == {"preset": "zz_x", "n": 2}
    assert all(g["passed"] for g in record["gates"].values())
    rows = list(csv.DictReader((out / "series" / "ep_fi.csv").open()))
    assert len(rows) == 2 * 6
    assert "wall_seconds" in json.loads((out / "timing.json").read_text())


def test_db_certify_gate(tmp_path):
    code, out = run(tmp_path, {"experiment": "db-certify", "betas": [1.0]})
    assert code == EXIT_OK
    gates = json.loads((out / "result.json").read_text())["gates"]
    assert all(g["value"] <= 1e-8 for g in gates.values())


@pytest.mark.parametrize("config", [
    {"experiment": "ep-fi", "bogus": 1},
    {"experiment": "not-an-experiment"},
    {"experiment": "ep-fi", "beta": "hot"},
    {"experiment": "ep-fi", "model": {"preset": "nope", "n": 2}},
    {"experiment": "gibbs-recovery", "regions": [[7]]},
    {"experiment": "ep-fi", "beta": 2.0, "sigma": 0.9},
    "{not json",
])
def test_schema_errors_exit_2_without_output(tmp_path, config):
    code, out = run(tmp_path, config)
    assert code == EXIT_SCHEMA
    assert not out.exists()


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == EXIT_SCHEMA
    assert not (tmp_path / "o").exists()


def test_bad_arguments_exit_2():
    assert main(["frobnicate"]) == EXIT_SCHEMA
    assert main(["suite", "everything"]) == EXIT_SCHEMA


def test_resource_limit_exit_3(tmp_path, monkeypatch):
    monkeypatch.setenv("METASTAB_MAX_QUBITS", "2")
    code, out = run(tmp_path, {"experiment": "db-certify"})
    assert code == EXIT_RESOURCE
    assert not out.exists()


def test_gate_failure_exit_1(tmp_path):
    # times in decreasing order cannot show an improving recovery error
    code, out = run(tmp_path, {"experiment": "gibbs-recovery", "model": {"preset": "ising_chain", "n": 3},
                               "regions": [[0, 1, 2]], "times": [100.0, 1.0]})
    assert code == EXIT_GATE
    assert json.loads((out / "result.json").read_text())["passed"] is False


def test_strict_counts_trend_gates(tmp_path):
    hot = {"experiment": "classical-hard-disks", "classical": {"beta": 0.3, "m_values": [2, 4], "L": 4}}
    code, _ = run(tmp_path, hot, name="lenient")
    assert code == EXIT_OK
    code, out = run(tmp_path, hot, "--strict", name="strict")
    assert code == EXIT_GATE
    record = json.loads((out / "result.json").read_text())
    assert record["strict"] is True
    assert any(g["kind"] == "trend" and not g["passed"] for g in record["gates"].values())


def test_reruns_are_byte_identical(tmp_path):
    config = {"experiment": "classical-ep-fi", "states": 3}
    cfg = write(tmp_path / "c.json", config)
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == EXIT_OK
    first = (out / "result.json").read_bytes(), (out / "series" / "classical_ep_fi.csv").read_bytes()
    assert main(["run", cfg, "--out", str(out), "--threads", "1"]) == EXIT_OK
    second = (out / "result.json").read_bytes(), (out / "series" / "classical_ep_fi.csv").read_bytes()
    assert first == second


def test_seed_flag_changes_states(tmp_path):
    config = {"experiment": "classical-ep-fi", "states": 2}
    _, a = run(tmp_path, config, name="a")
    _, b = run(tmp_path, config, "--seed", "5", name="b")
    assert json.loads((b / "result.json").read_text())["config"]["seed"] == 5
    assert (a / "series" / "classical_ep_fi.csv").read_text() != (b / "series" / "classical_ep_fi.csv").read_text()


def test_echoed_config_revalidates_and_reproduces(tmp_path):
    _, out = run(tmp_path, {"experiment": "strong-markov"})
    record = json.loads((out / "result.json").read_text())
    jsonschema.validate(record["config"], load_schema())
    echo = dict(record["config"], output=str(out))
    code, _ = run(tmp_path, echo, name="out")
    assert code == EXIT_OK
    assert json.loads((out / "result.json").read_text()) == record


def test_dumps_is_deterministic_and_round_trips():
    x = 0.1 + 0.2
    text = dumps({"b": x, "a": [1, 2.5e-300], "c": float("inf")})
    assert text.index('"a"') < text.index('"b"')
    back = json.loads(text)
    assert back["b"] == x and back["c"] == "inf"


def test_figures_suite(tmp_path, capsys):
    out = tmp_path / "suite"
    assert main(["suite", "paper-figures", "--out", str(out)]) == EXIT_OK
    printed = capsys.readouterr().out
    assert "[PASS] criterion 7" in printed and "[PASS] criterion 9" in printed
    rows = list(csv.DictReader((out / "series" / "traceability.csv").open()))
    assert {r["criterion"] for r in rows} == {"7", "9"}
    assert all(r["status"] == "pass" for r in rows)
    recovery = list(csv.DictReader((out / "series" / "recovery_vs_t.csv").open()))
    assert [float(r["t"]) for r in recovery][:3] == [1.0, 10.0, 100.0]
    assert (out / "series" / "stationarity_vs_m.csv").exists()
    record = json.loads((out / "result.json").read_text())
    assert record["kind"] == "suite"
    assert [(str(r["criterion"]), r["test"]) for r in record["traceability"]] == [(r["criterion"], r["test"]) for r in rows]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "metastab", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "run" in proc.stdout and "suite" in proc.stdout

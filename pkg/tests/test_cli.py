import json
import subprocess
import sys

import pytest

from chernmetric.cli import SWEEP_COLUMNS, main
from chernmetric.config import DEFAULTS, resolve
from chernmetric.output import config_hash, read_csv


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_identity_check_qwz(capsys):
    code, out, err = run(["identity-check", "--model", "qwz2d", "--m", "1", "--samples", "100"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["summary"]["determinant_identity"]["max_rel_discrepancy"] < 1e-8
    assert len(doc["records"]) == 100
    assert "determinant_identity: pass" in err


def test_identity_check_negative_control(capsys):
    code, out, _ = run(["identity-check", "--model", "qhz4d", "--m", "-3", "--samples", "20",
                        "--perturb", "0.01"], capsys)
    assert code == 4
    summary = json.loads(out)["summary"]
    assert not summary["determinant_identity"]["passed"]
    assert not summary["hypersphere_geometry"]["passed"]


def test_chern_csv(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(["chern", "--model", "qhz4d", "--m", "-1", "--grid", "8", "--method", "all",
                      "--threads", "1", "--out", str(out)], capsys)
    assert code == 0
    text = out.read_text()
    assert "# config_hash:" in text and "# scheme:" in text and "# tolerances:" in text
    rows = read_csv(out)
    assert list(rows[0]) == SWEEP_COLUMNS
    assert {r["method"] for r in rows} == {"metric_area_split", "plaquette_4d"}
    assert {r["nearest_integer"] for r in rows} == {"3"}


def test_sweep_reports_gap_closure(tmp_path, capsys):
    out = tmp_path / "s.csv"
    # odd L with cell-midpoint offsets contains k = 0, where m = -2 closes the gap
    code, _, err = run(["sweep", "--model", "qwz2d", "--grid", "9", "--m-values", "-1", "-2",
                        "--out", str(out)], capsys)
    assert code == 3
    assert "gap closes" in err
    rows = read_csv(out)
    assert [r["nearest_integer"] for r in rows if r["m"] == "-1.0"] == ["1", "1"]
    assert all(r["value"] == "" for r in rows if r["m"] == "-2.0")


def test_chern_gap_closure_exit_code(tmp_path, capsys):
    out = tmp_path / "x.csv"
    code, _, _ = run(["chern", "--model", "qwz2d", "--m", "-2", "--grid", "9", "--out", str(out)], capsys)
    assert code == 3
    assert not out.exists()


def test_reruns_are_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert run(["sweep", "--model", "qwz2d", "--grid", "20", "--m-values", "-1", "1", "--threads", "1",
                    "--out", str(p)], capsys)[0] == 0
    a, b = (read_csv(p) for p in paths)
    for row in a + b:
        row.pop("wall_time_ms")
    assert a == b
    strip = lambda p: [line for line in p.read_text().splitlines() if line.startswith("#")]
    assert strip(paths[0]) == strip(paths[1])


@pytest.mark.parametrize("command", ["metric", "geometry", "spectroscopy"])
def test_json_commands_are_deterministic(command, capsys):
    argv = [command, "--samples", "5", "--seed", "3"]
    first = run(argv, capsys)
    second = run(argv, capsys)
    assert first[0] == second[0] == 0
    assert first[1] == second[1]
    assert json.loads(first[1])["header"]["command"] == command


def test_metric_command(capsys):
    code, out, _ = run(["metric", "--model", "qhz4d", "--m", "1", "--samples", "20"], capsys)
    summary = json.loads(out)["summary"]
    assert summary["max_abs_diff"] < 1e-10
    assert summary["max_abs_curvature_trace"] < 1e-12


def test_geometry_command(capsys):
    code, out, _ = run(["geometry", "--samples", "4"], capsys)
    doc = json.loads(out)
    assert doc["summary"]["passed"]
    assert all(abs(r["scalar"] - 24) < 1e-3 for r in doc["records"])


def test_spectroscopy_command(capsys):
    code, out, _ = run(["spectroscopy", "--axes", "1", "2", "--seed", "1"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["reconstruction"]["max_rel_err"] < 1e-2
    assert len(doc["omega"]) == len(doc["gamma_of_omega"])


def test_unknown_model_is_config_error(tmp_path, capsys):
    out = tmp_path / "never.csv"
    code, stdout, err = run(["chern", "--model", "haldane", "--out", str(out)], capsys)
    assert code == 2 and "config error" in err
    assert stdout == "" and not out.exists()
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize("bad", [
    {"grid": 16, "colour": "blue"},
    {"model": {"name": "qhz4d", "params": {"mass": 1}}},
    {"drive": {"axes": [0]}},
    {"scheme": {"kind": "spline"}},
])
def test_config_schema_rejects(tmp_path, capsys, bad):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert run(["metric", "--config", str(path)], capsys)[0] == 2


def test_unreadable_config(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert run(["metric", "--config", str(path)], capsys)[0] == 2
    assert run(["metric", "--config", str(tmp_path / "missing.json")], capsys)[0] == 2


def test_flags_override_config(tmp_path, capsys):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"model": {"name": "qwz2d", "params": {"m": 3.0}}, "grid": 12, "seed": 9}))
    code, out, _ = run(["metric", "--config", str(path), "--m", "-1", "--samples", "2"], capsys)
    header = json.loads(out)["header"]
    assert header["model"] == {"name": "qwz2d", "params": {"m": -1.0}}
    assert header["grid"] == 12


def test_fourier_model_from_config(tmp_path, capsys):
    table = {"fourier": {"n_half_dim": 1, "d": [
        [{"coef": 1, "factors": ["sin(k1)"]}],
        [{"coef": 1, "factors": ["sin(k2)"]}],
        [{"coef": -1}, {"coef": 1, "factors": ["cos(k1)"]}, {"coef": 1, "factors": ["cos(k2)"]}]]}}
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"model": table, "grid": 16}))
    csv_path = tmp_path / "f.csv"
    code, _, _ = run(["chern", "--config", str(path), "--method", "all", "--out", str(csv_path)], capsys)
    assert code == 0
    assert [r["nearest_integer"] for r in read_csv(csv_path)] == ["1", "1"]
    assert run(["chern", "--config", str(path), "--m", "1"], capsys)[0] == 2
    table["fourier"]["d"][0][0]["factors"] = ["sin(k7)"]
    path.write_text(json.dumps({"model": table}))
    assert run(["chern", "--config", str(path)], capsys)[0] == 2


def test_config_hash_ignores_output_path():
    a = resolve(None, {"out": "x.csv", "threads": 1})
    b = resolve(None, {"out": "y.csv", "threads": 8})
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(resolve(None, {"grid": 20}))
    assert DEFAULTS["grid"] == 16


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "chernmetric.cli", "identity-check", "--model", "qwz2d",
                           "--samples", "5"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["summary"]["passed"]

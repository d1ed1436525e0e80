import dataclasses
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from bethe_dos import cli
from bethe_dos.oracle import MCEstimate
from bethe_dos.stieltjes import AnalyticWindow, UniformLaw, s_continued_all
from bethe_dos.treewalk import CoefficientTable, CountPolynomial


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- coeffs -------------------------------------------------------------------------

def test_coeffs_four(capsys):
    code, out, _ = run(capsys, "coeffs", "--order", "4")
    assert code == 0
    data = json.loads(out)
    assert data["n_max"] == 4 and [r["n"] for r in data["rows"]] == [0, 1, 2, 3, 4]
    four = data["rows"][4]["classes"]
    assert sorted(tuple(sorted(map(int, c["profile"]), reverse=True)) for c in four) == [(2, 1), (3, 1), (3, 2)]
    table = CoefficientTable.from_json_rows(data["rows"])
    assert table.rows == CoefficientTable.build(4).rows


def test_coeffs_zero_and_odd():
    assert cli.cmd_coeffs(0)["rows"] == [{"n": 0, "classes": [{"profile": {"1": 1}, "count_poly": [1]}]}]
    assert cli.cmd_coeffs(5)["rows"][5] == {"n": 5, "classes": []}


def test_coeffs_cap(capsys):
    code, _, err = run(capsys, "coeffs", "--order", "40")
    assert code == 2 and "cap" in err.lower()


# --- dos ---------------------------------------------------------------------------

def test_dos_example_row(capsys):
    code, out, err = run(capsys, "dos", "--q", "2", "--lambda", "100", "--order", "3",
                         "--law", "uniform", "--a", "1.0", "--I", "-0.5,0.5", "--delta0", "0.3",
                         "--delta", "0.15", "--xi-range", "0,0", "--grid", "1")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "xi,E,value,remainder_bound,rigorous,a0,a2"
    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert float(row["value"]) == pytest.approx(0.0049985, abs=1e-15)
    assert row["rigorous"] == "true"
    assert "lambda0=" in err and "truncation bound" in err and "quadrature" in err


def test_dos_below_lambda0(capsys):
    code, out, _ = run(capsys, "dos", "--lambda", "20", "--grid", "5")
    assert code == 0
    rows = cli.dos_from_csv(out)
    assert len(rows) == 5 and not any(r.rigorous for r in rows)


def test_dos_header_matches_contract():
    assert cli.dos_header(3) == ["xi", "E", "value", "remainder_bound", "rigorous", "a0", "a2"]
    assert cli.dos_header(6)[-1] == "a6"


def test_dos_grid_touching_boundary(capsys):
    code, _, err = run(capsys, "dos", "--xi-range", "-0.5,0.2", "--grid", "3")
    assert code == 2 and "inside" in err


def test_dos_csv_round_trip():
    cfg = cli.RunConfig(command="dos", lam=150.0, order=4, grid_points=7)
    rows, text = cli.cmd_dos(cfg)
    again = cli.dos_from_csv(text)
    for a, b in zip(rows, again):
        assert dataclasses.replace(a, numerical_error=0.0) == b
    assert cli.dos_to_csv(again, 4) == text


def test_dos_json_round_trip():
    cfg = cli.RunConfig(command="dos", lam=150.0, order=4, grid_points=7, format="json")
    rows, text = cli.cmd_dos(cfg)
    assert cli.dos_from_json(text) == rows


def test_full_precision_formatting():
    x = 0.1 + 0.2
    assert float(cli.fmt(x)) == x
    assert len(cli.fmt(x).split("e")[0].replace(".", "")) == 17


def test_dos_byte_identical(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert run(capsys, "dos", "--grid", "11", "--out", str(p))[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


# --- transforms --------------------------------------------------------------------

@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_transforms_round_trip(capsys, fmt):
    code, out, _ = run(capsys, "transforms", "--order", "3", "--grid", "4", "--format", fmt)
    assert code == 0
    xs, vals = cli.transforms_from_text(out)
    want = s_continued_all(UniformLaw(1.0), 4, xs + 0j, AnalyticWindow((-0.5, 0.5), 0.3, 0.15))
    assert np.array_equal(vals, want)


# --- mc-compare --------------------------------------------------------------------

def test_mc_compare_rejects_real_zeta(capsys):
    code, _, err = run(capsys, "mc-compare", "--zeta", "0.1,0.0")
    assert code == 2 and "Im zeta" in err
    code, _, _ = run(capsys, "mc-compare", "--zeta", "0.1,-0.2")
    assert code == 2


def test_mc_compare_acceptance_point(capsys):
    code, out, _ = run(capsys, "mc-compare", "--q", "2", "--lambda", "20", "--order", "7",
                       "--zeta", "0.2,0.4", "--depth", "20", "--samples", "100000", "--seed", "42")
    report = json.loads(out)
    assert code == 0 and report["pass"]
    assert report["difference"] <= 3 * report["stderr"]
    assert report["expansion"]["rigorous"]
    assert MCEstimate.from_json(report["mc"]).samples_used == 100_000


def test_mc_compare_flagged(capsys):
    _, out, _ = run(capsys, "mc-compare", "--lambda", "20", "--order", "7", "--zeta", "0.1,0.4",
                    "--depth", "6", "--samples", "2000", "--stderr-ceiling", "1e-12")
    report = json.loads(out)
    assert report["flagged"] and report["mc"]["flagged"]


# --- verify ------------------------------------------------------------------------

def test_verify_fresh(capsys):
    code, out, _ = run(capsys, "verify")
    assert code == 0
    assert "FAIL" not in out
    assert "Catalan" in out
    assert "15/15 checks passed" in out


def test_verify_detects_perturbed_polynomial():
    table = CoefficientTable.build(12)
    prof, poly = table.rows[4][0]
    table.rows[4][0] = (prof, CountPolynomial((poly.coefficients[0] + 1,) + poly.coefficients[1:]))
    buf = io.StringIO()
    assert cli.cmd_verify(table, buf) == 1
    assert "FAIL" in buf.getvalue()


# --- configuration -------------------------------------------------------------------

def test_config_file_and_override(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"q": 3, "lam": 250.0, "order": 5, "xi_range": [-0.2, 0.2],
                                "window": {"I": [-0.4, 0.4], "delta0": 0.3, "delta": 0.15}}))
    cfg = cli.config_from_args(["dos", "--config", str(path), "--lambda", "300", "--I", "-0.45,0.45"])
    assert cfg.q == 3 and cfg.order == 5 and cfg.lam == 300.0
    assert cfg.xi_range == (-0.2, 0.2)
    assert cfg.window == {"I": [-0.45, 0.45], "delta0": 0.3, "delta": 0.15}


def test_config_rejects_unknown_key(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"lamda": 3}))
    code, _, err = run(capsys, "dos", "--config", str(path))
    assert code == 2 and "lamda" in err


def test_invalid_parameters(capsys):
    assert run(capsys, "dos", "--lambda", "-1")[0] == 2
    assert run(capsys, "dos", "--order", "-1")[0] == 2


def test_generic_law_from_flags(capsys):
    code, out, _ = run(capsys, "dos", "--law", "generic", "--density", "semicircle", "--lambda", "1000",
                       "--grid", "3")
    assert code == 0
    rows = cli.dos_from_csv(out)
    for r in rows:
        assert r.coefficients[0] == pytest.approx(2 / np.pi * np.sqrt(1 - r.xi**2), abs=1e-9)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bethe_dos", "coeffs", "--order", "2"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["rows"][2]["classes"] == [{"profile": {"2": 1, "1": 1}, "count_poly": [1, 1]}]

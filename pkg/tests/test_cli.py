from __future__ import annotations

import csv
import hashlib
import io
import json

import numpy as np
import pytest

from jordanloops.analysis import VERSION
from jordanloops.basis import GluedQuotient, build_basis, parse_state
from jordanloops.cli import OUTPUT_DIR_ENV, main
from jordanloops.koosaleur import hamiltonian_unscaled
from jordanloops.params import LatticeParams

APPENDIX_STATES = ["(12)(34)", "(23)(14)", "(2)(3)(41)", "(3)(4)(12)", "(1)(4)(23)", "(1)(2)(34)", "(1)(2)(3)(4)"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_basis_in_appendix_order(capsys):
    code, out, _ = run(capsys, "basis", "--N", "4", "--module", "glued-quotient:2", "--appendix-order")
    assert code == 0
    lines = out.split()
    assert [parse_state(s, 4) for s in lines] == [parse_state(s, 4) for s in APPENDIX_STATES]


def test_basis_json(capsys):
    code, out, _ = run(capsys, "basis", "--N", "6", "--module", "standard:1:0", "--json")
    assert code == 0
    assert len(json.loads(out)["states"]) == 15


def test_check_d10(capsys):
    code, out, _ = run(capsys, "chars", "--x", "2", "--check-D10")
    assert code == 0
    assert "D_1,0 = -1" in out.splitlines()


def test_chars_json_series(capsys):
    code, out, _ = run(capsys, "chars", "--c", "0.5", "--cutoff", "2", "--json")
    assert code == 0
    terms = {t["term"]: t for t in json.loads(out)["terms"]}
    assert terms["Fbar_0"]["monomials"][0][:2] == [0.0, 0.0]


def test_btt_small_chain(capsys):
    code, out, _ = run(capsys, "btt", "--N", "4")
    assert code == 0
    b = float(next(line for line in out.splitlines() if line.startswith("b = ")).split("=")[1])
    assert b == pytest.approx(-1.96028, abs=1e-4)
    assert "|b1 - b2|" in out


def test_btt_eight_sites(capsys):
    code, out, _ = run(capsys, "btt", "--N", "8")
    assert code == 0
    b = float(next(line for line in out.splitlines() if line.startswith("b = ")).split("=")[1])
    assert b == pytest.approx(-3.94952, abs=1e-4)


def test_op_json_matches_library(capsys):
    code, out, _ = run(
        capsys, "op", "--N", "4", "--appendix-order", "--m", "0.7", "--e-inf", "0.3", "--convention", "plain", "--format", "json"
    )
    assert code == 0
    payload = json.loads(out)
    mat = np.array([[complex(*z) for z in row] for row in payload["data"]])
    basis = build_basis(GluedQuotient(2), 4, "appendix")
    expected = hamiltonian_unscaled(basis, LatticeParams.symbolic(0.7, 0.3)).data
    assert np.allclose(mat, expected, atol=1e-11)


def test_op_csv_is_one_based(capsys):
    code, out, _ = run(capsys, "op", "--N", "2", "--module", "glued-quotient:1", "--c", "-0.5", "--operator", "e1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows and min(int(r["row"]) for r in rows) >= 1


def test_spectrum_labels_and_tags(capsys):
    code, out, _ = run(capsys, "spectrum", "--N", "8", "--module", "standard:1:0", "--c", "-1.5", "--tags", "alpha,beta")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    tagged = {r["tag"]: r for r in rows if r["tag"]}
    assert set(tagged) == {"alpha", "beta"}
    assert all(r["p"] != "" for r in rows)


def test_gram_output(capsys):
    code, out, _ = run(capsys, "gram", "--N", "2", "--module", "standard:0:0.6", "--m", "1.3", "--kind", "loop")
    assert code == 0
    assert out.startswith("row,col,re,im")


def test_scan_and_extrapolate(tmp_path, capsys):
    plan = tmp_path / "plan.txt"
    plan.write_text("measure = b\npair = alpha,beta\nN = 6,8,10\nc = -1.0\n")
    out = tmp_path / "scan.csv"
    code, _, _ = run(capsys, "scan", str(plan), "--out", str(out))
    assert code == 0
    manifest = json.loads((tmp_path / "scan.csv.json").read_text())
    assert manifest["version"] == VERSION
    assert manifest["csv_sha256"] == hashlib.sha256(out.read_bytes()).hexdigest()
    code, text, _ = run(capsys, "extrapolate", "--csv", str(out), "--which", "b1", "--degree", "1")
    assert code == 0
    row = next(csv.DictReader(io.StringIO(text)))
    assert row["pair"] == "alpha,beta" and row["points"] == "3" and row["theory"]


def test_extrapolate_values(capsys):
    code, out, _ = run(capsys, "extrapolate", "--values", "2:1.5,3:1.3333333333333,4:1.25", "--degree", "1")
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert float(row["limit"]) == pytest.approx(1.0, abs=1e-9)


def test_negative_c_lists(capsys):
    code, out, _ = run(capsys, "jscan", "--N", "6", "--c", "-1,-0.5")
    assert code == 0
    assert len(list(csv.DictReader(io.StringIO(out)))) == 2


def test_output_manifest_and_directory(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "results"))
    code, out, _ = run(capsys, "basis", "--N", "4", "--out", "states.txt")
    assert code == 0
    path = tmp_path / "results" / "states.txt"
    manifest = json.loads((tmp_path / "results" / "states.txt.json").read_text())
    assert manifest["command"] == "basis"
    assert manifest["sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()


def test_outputs_are_byte_stable(tmp_path, capsys):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (first, second):
        assert run(capsys, "jscan", "--N", "6", "--c", "-1.2", "--out", str(path))[0] == 0
    assert first.read_bytes() == second.read_bytes()
    assert json.loads((tmp_path / "a.csv.json").read_text())["sha256"] == json.loads(
        (tmp_path / "b.csv.json").read_text()
    )["sha256"]


@pytest.mark.parametrize(
    "argv",
    [["bogus"], ["basis"], ["basis", "--N", "4", "--frobnicate"], ["op", "--N", "4"], ["op", "--N", "4", "--c", "0", "--m", "1"]],
)
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 64


@pytest.mark.parametrize(
    "argv",
    [
        ["op", "--N", "4", "--c", "1.5"],
        ["basis", "--N", "5"],
        ["jscan", "--N", "6", "--pair", "alpha,gamma", "--c", "-1"],
        ["extrapolate", "--values", "3:1"],
        ["scan", "/nonexistent/plan.txt"],
    ],
)
def test_domain_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err.startswith("error:")


def test_numerical_failure_exit_code(capsys):
    # H_1 on the four-site glued quotient is defective; its eigenpairs fail the residual check
    code, _, err = run(capsys, "spectrum", "--N", "4", "--c", "-0.5", "--operator", "Hn", "--n", "1")
    assert code == 2
    assert "numerical failure" in err


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and VERSION in out

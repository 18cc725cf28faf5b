from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from qamod.cli import dumps, main, normalize

SCENES = Path(__file__).resolve().parent.parent / "scenes"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_json(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_normalize_12_digits():
    assert normalize(1 / 3) == 0.333333333333
    assert normalize({"a": [math.inf, math.nan, True, 2]}) == {"a": ["inf", "nan", True, 2]}
    assert dumps({"x": 2.0}) == '{\n  "x": 2.0\n}\n'


def test_xyz_smoke(capsys):
    code, out, _ = run(capsys, "xyz", "--scene", SCENES / "one_island.json", "--resolution", 64)
    assert code == 0
    rep = json.loads(out)
    assert rep["N"] == 1 and rep["X"] == rep["Y"] == rep["Z"]
    assert rep["ratio_qa"] == 1


def test_xyz_csv(capsys):
    code, out, _ = run(capsys, "xyz", "--scene", SCENES / "two_islands_collars.json", "--resolution", 32, "--csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "island,Y_j,Z_j,eta_j"
    assert lines[3].startswith("summary,")


def test_xyz_byte_identical_across_threads(capsys):
    args = ["xyz", "--scene", SCENES / "two_islands_collars.json", "--resolution", 32]
    _, a, _ = run(capsys, *args, "--threads", 1)
    _, b, _ = run(capsys, *args, "--threads", 4)
    _, c, _ = run(capsys, *args, "--threads", 1)
    assert a == b == c


def test_width_rectangle(capsys):
    code, out, _ = run(
        capsys, "width", "--scene", SCENES / "rectangle.json", "--source", "top", "--sink", "bottom",
        "--resolution", 32, "--diagnostics",
    )
    assert code == 0
    rep = json.loads(out)
    assert rep["width"] == pytest.approx(65 / 32, rel=1e-9)
    assert rep["diagnostics"]["iterations"] >= 1


def test_laws_fuzz(capsys):
    code, out, _ = run(capsys, "laws", "--fuzz", 1000, "--seed", 7)
    assert code == 0
    rep = json.loads(out)
    assert rep["samples"] == 1000 and rep["max_ratio"] <= 4 / 3 and rep["verdict"]


def test_laws_check_files(capsys):
    code, out, _ = run(capsys, "laws", "--check", SCENES / "chain_a.csv", SCENES / "chain_b.csv")
    assert code == 0
    assert json.loads(out)["ratio"] == pytest.approx(121 / 108, rel=1e-11)


def test_laws_invalid_chain_is_input_error(capsys, tmp_path):
    (tmp_path / "a.csv").write_text("1\n0.6\n")
    (tmp_path / "b.csv").write_text("1\n1\n")
    code, _, err = run(capsys, "laws", "--check", tmp_path / "a.csv", tmp_path / "b.csv")
    assert code == 2
    assert "index 2" in err


def test_malformed_scene_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"domain": {"kind": "disk", "cx": 0, "cy": 0}, "islands": []}')
    code, out, err = run(capsys, "xyz", "--scene", p, "--resolution", 16)
    assert code == 2 and out == ""
    assert "domain" in err and "SHAPE" in err  # field message plus schema excerpt


def test_json_syntax_error_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{\n  nope\n}")
    code, _, err = run(capsys, "xyz", "--scene", p, "--resolution", 16)
    assert code == 2 and "line 2" in err


def test_missing_file_exit_2(capsys, tmp_path):
    code, _, err = run(capsys, "xyz", "--scene", tmp_path / "nope.json", "--resolution", 16)
    assert code == 2 and "cannot read" in err


def test_bad_flags_exit_2(capsys):
    assert run(capsys, "xyz", "--scene", "x.json", "--resolution", -1)[0] == 2
    assert run(capsys, "xyz", "--scene", "x.json", "--resolution", 8, "--tol", 0.1)[0] == 2
    assert run(capsys, "bogus")[0] == 2


def test_verdict_failure_exit_1(capsys, monkeypatch):
    # The checked inequalities are theorems, so a failing report is injected.
    from qamod import moduli

    def fake(*args, **kwargs):
        return moduli.ModuliReport(
            "bad", 2, 1, X=1.0, Y=3.0, Y_j=(1.5, 1.5), Z=2.0, Z_j=(1.0, 1.0), resolution=8.0, tol=1e-10, iterations=()
        )

    monkeypatch.setattr(moduli, "qa_report", fake)
    code, out, err = run(capsys, "xyz", "--scene", SCENES / "one_island.json", "--resolution", 8)
    assert code == 1
    assert json.loads(out)["verdicts"]["Y_le_Z"] is False
    assert "Y <= Z violated: Y = 3, Z = 2" in err


def test_branched_exact_transform_still_equal(capsys, tmp_path):
    # Pulling the harmonic measure back through f multiplies its energy by D,
    # branch points or not.
    spec = {"map": {"kind": "power", "D": 2}, "B": {"kind": "disk", "cx": 0.5, "cy": 0, "r": 0.1}}
    p = write_json(tmp_path, "cov.json", spec)
    code, out, _ = run(capsys, "covering", "--spec", p, "--check", "exact", "--allow-branched", "--resolution", 64)
    assert code == 0
    rep = json.loads(out)["reports"][0]
    assert rep["branched"] and rep["verdict"]


def test_covering_branched_guard_exit_2(capsys, tmp_path):
    spec = {"map": {"kind": "power", "D": 2}, "B": {"kind": "disk", "cx": 0.5, "cy": 0, "r": 0.1}}
    p = write_json(tmp_path, "cov.json", spec)
    code, _, err = run(capsys, "covering", "--spec", p, "--check", "exact", "--resolution", 64)
    assert code == 2 and "branched" in err


def test_covering_lemma_cli(capsys):
    code, out, _ = run(
        capsys, "covering", "--spec", SCENES / "cover_z2_radial.json", "--check", "lemma",
        "--resolution", 64, "--polar-resolution", 32,
    )
    assert code == 0
    rep = json.loads(out)["reports"][0]
    assert rep["d"] == 2 and rep["bound"] == pytest.approx(8, rel=0.03) and rep["verdict"]


def test_groetzsch_cli(capsys):
    code, out, _ = run(capsys, "groetzsch", "--nest", SCENES / "nest_concentric.json", "--resolution", 64)
    assert code == 0 and json.loads(out)["verdict"]


def test_collar_cli(capsys):
    code, out, _ = run(capsys, "collar", "--scene", SCENES / "two_islands_collars.json", "--resolution", 32)
    assert code == 0 and json.loads(out)["verdict"]


def test_halfplane_predicted_cli(capsys):
    code, out, _ = run(capsys, "halfplane", "--a", 1, 0.5, 0.25, "--predicted-only")
    assert code == 0
    rep = json.loads(out)
    assert rep["predicted"] == {"X": 32.0, "Y": 56.0, "Z": 128.0, "ratio": 0.765625}


def test_halfplane_sweep_file_csv(capsys, tmp_path):
    p = write_json(tmp_path, "fams.json", [{"a": [1], "W": 16, "label": "one"}, {"a": [1, 0.5], "W": 16, "label": "two"}])
    code, out, _ = run(capsys, "halfplane", "--sweep", p, "--resolution", 4, "--csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "label,n,W,resolution,X,Y,Z,ratio,ratio_pred,in_regime"
    assert lines[1].startswith("one,1,16,4,")


def test_halfplane_bad_family_exit_2(capsys, tmp_path):
    p = write_json(tmp_path, "fams.json", [{"a": [0.5, 1]}])
    code, _, err = run(capsys, "halfplane", "--sweep", p)
    assert code == 2 and "decreasing" in err


def test_converge_cli(capsys):
    code, out, _ = run(capsys, "converge", "--scene", SCENES / "one_island.json", "--resolutions", 16, 32, 64)
    assert code == 0
    rep = json.loads(out)
    assert rep["resolutions"] == [16.0, 32.0, 64.0] and "extrapolated" in rep


def test_output_file(capsys, tmp_path):
    out_path = tmp_path / "r.json"
    code, out, _ = run(capsys, "laws", "--fuzz", 10, "-o", out_path)
    assert code == 0 and out == ""
    assert json.loads(out_path.read_text())["samples"] == 10

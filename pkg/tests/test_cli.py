import json
import math
import subprocess
import sys

import numpy as np
import pytest

from opfunc.cli import emit_plotdata, main
from opfunc.fncore import Interval
from opfunc.parsing import parse_function
from schemacheck import validate



def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def _report(capsys, *argv):
    code, out = _run(capsys, *argv)
    rep = json.loads(out)
    validate(rep)
    return code, rep


def test_certify_soc_exit_zero(capsys):
    code, rep = _report(capsys, "certify", "--func", "tan(t)/t", "--interval", "(-1.5707,1.5707)",
                        "--class", "soc")
    assert code == 0 and rep["status"] == "certified"
    assert rep["seed"] == 0 and rep["command"] == "certify"


def test_certify_refuted_exit_one_and_replay(capsys, tmp_path):
    out = tmp_path / "rep.json"
    code, rep = _report(capsys, "certify", "--func", "t^2", "--interval", "(-1,1)", "--class", "om",
                        "--out", str(out))
    assert code == 1 and rep["status"] == "refuted"
    code, rep = _report(capsys, "replay", str(out))
    assert code == 1 and rep["difference"] <= 1e-10


def test_certify_inconclusive_exit_two(capsys):
    code, rep = _report(capsys, "certify", "--func", "log(t)", "--interval", "(-1,1)", "--class", "om")
    assert code == 2


def test_falsify_witness_and_replay(capsys, tmp_path):
    out = tmp_path / "w.json"
    code, rep = _report(capsys, "falsify", "--func", "1/t - 1", "--interval", "(0,1)", "--class", "soc",
                        "--trials", "1000", "--seed", "7", "--out", str(out))
    assert code == 1 and rep["status"] == "witness"
    assert rep["scene"]["n"] == 1
    validate(json.loads(out.read_text()))
    code, rep2 = _report(capsys, "falsify", "--replay", str(out))
    assert code == 1
    assert rep2["difference"] <= 1e-10
    assert rep2["replayed_margin"] == pytest.approx(rep["margin"], abs=1e-10)


def test_falsify_no_counterexample(capsys):
    code, rep = _report(capsys, "falsify", "--func", "1/t", "--interval", "(0,inf)", "--class", "soc",
                        "--trials", "100", "--dims", "4")
    assert code == 0 and rep["status"] == "no_counterexample"


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("OPFUNC_SEED", "42")
    _, rep = _report(capsys, "falsify", "--func", "1/t", "--interval", "(0,inf)", "--trials", "10")
    assert rep["seed"] == 42
    _, rep = _report(capsys, "falsify", "--func", "1/t", "--interval", "(0,inf)", "--trials", "10",
                     "--seed", "3")
    assert rep["seed"] == 3


def test_construct_forward(capsys, tmp_path):
    out = tmp_path / "trace.json"
    code, rep = _report(capsys, "construct", "forward", "--func", "tan(t)", "--points", "0,0",
                        "--interval", "(-1.5707,1.5707)", "--out", str(out))
    assert code == 0
    assert rep["final"] == "(tan(t)-t)/(t*tan(t))"
    validate(json.loads(out.read_text()), "trace")


def test_construct_backward_with_constants(capsys):
    code, rep = _report(capsys, "construct", "backward", "--func", "t", "--interval", "(-1,1)",
                        "--points", "0,0", "--consts=-1,0")
    assert code == 0
    assert [s["label"] for s in rep["steps"]] == ["OM", "OC", "SOC", "OM"]


def test_repr_commands(capsys, tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"alpha": 0, "interval": "(0, 1)", "nu_minus": [{"x": 0, "w": 1}],
                             "nu_plus": [{"x": 2, "w": 1}]}))
    code, rep = _report(capsys, "repr", "build", str(p))
    assert code == 0 and rep["class"] == "soc"
    code, rep = _report(capsys, "repr", "split", str(p))
    assert code == 0
    assert rep["g_plus"]["status"] == rep["g_minus"]["status"] == "certified"


def test_parse_error_exit_two(capsys):
    code, rep = _report(capsys, "certify", "--func", "t^^2", "--interval", "(0,1)", "--class", "om")
    assert code == 2 and rep["status"] == "error" and "ParseError" in rep["error"]


def test_bad_config_exit_two(capsys):
    code, out = _run(capsys, "falsify", "--func", "1/t", "--interval", "(0,inf)", "--trials", "0")
    assert code == 2 and json.loads(out)["status"] == "error"


# ------------------------------------------------------------------ plot data


def _rows(csv):
    lines = [ln for ln in csv.splitlines()[1:] if not ln.startswith("#")]
    return np.array([[float(v) for v in ln.split(",")] for ln in lines])


def test_plotdata_examples():
    assert len(_rows(emit_plotdata(parse_function("t"), Interval(0, 1), 3))) == 3
    csv = emit_plotdata(parse_function("tan(t)/t"), Interval(-1.5, 1.5), 100)
    rows = _rows(csv)
    assert len(rows) == 100 and np.all(np.isfinite(rows))
    assert csv.rstrip().endswith("# skipped 0 points")
    rows = _rows(emit_plotdata(parse_function("1/t"), Interval(0, 1), 10))
    assert np.all(np.diff(rows[:, 1]) < 0)
    with pytest.raises(ValueError):
        emit_plotdata(parse_function("t"), Interval(0, 1), 1)


def test_plotdata_counts_skipped_points():
    csv = emit_plotdata(parse_function("log(t)"), Interval(-1, 1), 10)
    assert len(_rows(csv)) == 5
    assert "# skipped 5 points" in csv


def test_plotdata_command(capsys):
    code, out = _run(capsys, "plotdata", "--func", "tan(t)", "--interval", "(-pi/2, pi/2)", "--n", "8",
                     "--t0", "0")
    rows = _rows(out)
    assert code == 0 and len(rows) == 8
    np.testing.assert_allclose(rows[:, 1], np.tan(rows[:, 0]) / rows[:, 0], rtol=1e-12)


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "opfunc.cli", "certify", "--func", "1/t",
                          "--interval", "(0,inf)", "--class", "soc"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["status"] == "certified"
    assert math.isfinite(json.loads(res.stdout)["evidence"]["min_eigenvalues"][0])

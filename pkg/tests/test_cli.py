import json
import subprocess
import sys

import jsonschema
import pytest

from pshbump.cli import dumps, load_schema, main
from pshbump.polyring import parse_poly


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def valid(report):
    jsonschema.validate(report, load_schema())
    return report


def test_lines_two_lines(capsys):
    code, out = run(capsys, "lines", "--poly", "abs2(z1^2 - z2^2)")
    assert code == 0
    rep = valid(json.loads(out))
    centers = sorted(tuple(e["center"]) for e in rep["exceptional"]["lines"])
    assert centers == [(-1.0, 0.0), (1.0, 0.0)]
    assert rep["verdict"] == "ok" and rep["exit_code"] == 0


def test_lines_csv(capsys):
    code, out = run(capsys, "lines", "--poly", "abs2(z1*z2)", "--format", "csv")
    rows = out.strip().splitlines()
    assert code == 0 and rows[0] == "re,im,radius,at_infinity"
    assert [r.split(",")[3] for r in rows[1:]] == ["0", "1"]


def test_certify_negative(capsys):
    code, out = run(capsys, "certify", "--poly", "-abs2(z1)", "--grid", "8")
    rep = valid(json.loads(out))
    assert code == 2 and rep["verdict"] == "violated"
    assert rep["certificates"]["psh"]["witness_value"] < 0


def test_certify_csv_rows(capsys):
    code, out = run(capsys, "certify", "--poly", "abs2(z1)^2 + abs2(z2)^2", "--grid", "4", "--format", "csv")
    assert code == 0
    assert len(out.strip().splitlines()) == 1 + 4 ** 3


def test_analyze_ex2(capsys):
    code, out = run(capsys, "analyze", "--example", "ex2", "--weights", "16,16")
    rep = valid(json.loads(out))
    assert code == 0
    assert rep["degeneracy"]["property_b"] is True
    assert rep["factorization"]["F"] == "z1*z2"
    assert rep["delta0"]["value"] == 1.0
    assert rep["certificates"][rep["delta0"]["certificate"]]["verdict"] == "certified"


def test_bump_command_matches_analyze(capsys):
    _, a = run(capsys, "analyze", "--example", "kn", "--grid", "32")
    _, b = run(capsys, "bump", "--example", "kn", "--grid", "32")
    ra, rb = json.loads(a), json.loads(b)
    assert rb["command"] == "bump"
    ra.pop("command"), rb.pop("command")
    assert ra == rb


def test_classify_and_factor(capsys):
    code, out = run(capsys, "classify", "--poly", "abs2(z1)^2 + abs2(z1)*abs2(z2)")
    rep = valid(json.loads(out))
    assert code == 0 and rep["degeneracy"]["property_a"]["status"] == "holds"
    code, out = run(capsys, "factor", "--example", "ex2")
    rep = valid(json.loads(out))
    assert code == 0
    assert parse_poly(rep["factorization"]["U"]) == parse_poly("abs2(z1)^4 + (15/7)*abs2(z1)*Re(z1^6)")
    assert rep["factorization"]["d"] == 1 and rep["factorization"]["D"] == 1
    code, out = run(capsys, "factor", "--example", "ex1")
    assert code == 2 and "precondition" in json.loads(out)["reason"]


def test_examples_reverify(capsys):
    code, out = run(capsys, "examples", "--grid", "16")
    rep = valid(json.loads(out))
    assert code == 0
    assert sorted(f["name"] for f in rep["fixtures"]) == ["ex1", "ex2", "kn", "weighted"]
    assert all(f["psh"]["verdict"] == "certified" for f in rep["fixtures"])


@pytest.mark.parametrize("argv", [
    ["lines", "--poly", "z1 + q"],
    ["lines"],
    ["nonsense", "--poly", "abs2(z1)"],
    ["lines", "--poly", "z1*conj(z2)"],
    ["lines", "--poly", "abs2(z1)", "--weights", "2,x"],
    ["analyze", "--poly", "abs2(z1) + abs2(z1*z2)"],
])
def test_usage_errors(capsys, argv):
    code, out = run(capsys, *argv)
    rep = valid(json.loads(out))
    assert code == 1 and rep["verdict"] == "error" and rep["error"]["message"]


def test_parse_error_json(capsys):
    _, out = run(capsys, "lines", "--poly", "z1 + q")
    err = json.loads(out)["error"]
    assert err["type"] == "ParseError" and "5" in err["message"]


def test_out_path(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out = run(capsys, "lines", "--poly", "abs2(z1*z2)", "--out", str(path))
    assert code == 0 and out == ""
    valid(json.loads(path.read_text()))


def test_round_trip_fixed_point(capsys):
    _, out = run(capsys, "lines", "--poly", "abs2(z1^2 - 2*z2^2)")
    assert dumps(json.loads(out)) == out


def test_deterministic_classify(capsys):
    _, a = run(capsys, "classify", "--example", "ex1", "--grid", "16")
    _, b = run(capsys, "classify", "--example", "ex1", "--grid", "16")
    assert a == b


def test_budget_env_caps_refinement(monkeypatch, capsys):
    monkeypatch.setenv("PSHBUMP_BUDGET", "8")
    code, out = run(capsys, "certify", "--poly", "abs2(z1)^2 + abs2(z2)^2", "--grid", "8")
    assert json.loads(out)["certificates"]["psh"]["grid"] == [9, 8, 8]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pshbump", "certify", "--poly", "-abs2(z1)", "--grid", "8"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 2
    assert json.loads(proc.stdout)["verdict"] == "violated"

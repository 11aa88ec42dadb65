import json
import math
import subprocess
import sys

import numpy as np
import pytest

from saddlepoint.cli import run

BERNOULLI = {"kind": "entropy", "reference": {"support": ["0", "1"], "weights": [0.5, 0.5]},
             "family": {"tag": "RelativeEntropy"}, "features": [[1, 0], [1, 1]],
             "constraint": {"type": "equality", "values": [1, 0.75]}}
OT = {"kind": "ot", "mu": [0.7, 0.3], "nu": [0.4, 0.6], "cost": [[0, 1], [1, 0]]}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def with_(base, **kw):
    d = json.loads(json.dumps(base))
    d.update(kw)
    return d


@pytest.fixture(autouse=True)
def no_env_tol(monkeypatch):
    monkeypatch.delenv("SADDLEPOINT_TOL", raising=False)


def test_solve_entropy_with_oracle_and_certify(tmp_path):
    prob = write(tmp_path / "bernoulli.json", BERNOULLI)
    out = tmp_path / "sol.json"
    assert run(["solve-entropy", prob, "--oracle", "--out", str(out)]) == 0
    sol = json.loads(out.read_text())
    assert sol["value"] == pytest.approx(0.130812, abs=1e-6)
    assert abs(sol["certificate"]["gap"]) <= 1e-8
    assert sol["meta"]["oracle"]["agrees"] is True
    assert run(["certify", prob, str(out)]) == 0


def test_solve_entropy_infeasible_exit_2(tmp_path, capsys):
    bad = with_(BERNOULLI, constraint={"type": "equality", "values": [1, 1.5]})
    out = tmp_path / "sol.json"
    assert run(["solve-entropy", write(tmp_path / "inf.json", bad), "--out", str(out)]) == 2
    assert "qualification=Outside" in capsys.readouterr().err
    assert json.loads(out.read_text())["certificate"]["qualification"] == "Outside"


def test_solve_entropy_iteration_limit_exit_2(tmp_path):
    prob = write(tmp_path / "p.json", BERNOULLI)
    assert run(["solve-entropy", prob, "--max-iter", "1", "--out", str(tmp_path / "s.json")]) == 2


def test_certify_oracle_plan(tmp_path, capsys):
    prob = write(tmp_path / "ot.json", OT)
    plan = write(tmp_path / "plan.json", {"plan": [[0.4, 0.3], [0.0, 0.3]], "f": [0, -1], "g": [0, 1]})
    assert run(["certify", prob, plan]) == 0
    assert json.loads(capsys.readouterr().out)["certified"] is True


def test_certify_rejects_suboptimal_plan(tmp_path):
    prob = write(tmp_path / "ot.json", OT)
    plan = write(tmp_path / "plan.json",
                 {"plan": np.outer(OT["mu"], OT["nu"]).tolist(), "f": [0, -1], "g": [0, 1]})
    assert run(["certify", prob, plan]) == 3


def test_certify_rejects_tampered_entropy_solution(tmp_path):
    prob = write(tmp_path / "p.json", BERNOULLI)
    out = tmp_path / "s.json"
    run(["solve-entropy", prob, "--out", str(out)])
    sol = json.loads(out.read_text())
    sol["Q"] = [0.26, 0.74]
    assert run(["certify", prob, write(tmp_path / "t.json", sol)]) == 3


def test_solve_ot_round_trip_and_csv(tmp_path):
    prob = write(tmp_path / "ot.json", OT)
    out = tmp_path / "plan.json"
    assert run(["solve-ot", prob, "--oracle", "--out", str(out), "--format", "csv"]) == 0
    sol = json.loads(out.read_text())
    assert sol["value"] == pytest.approx(0.3)
    assert sol["meta"]["oracle"]["agrees"] is True
    assert sol["f"] == [0.0, -1.0] and sol["g"] == [0.0, 1.0]
    rows = (tmp_path / "plan.csv").read_text().splitlines()
    assert [list(map(float, r.split(","))) == pytest.approx(v, abs=1e-12)
            for r, v in zip(rows, [[0.4, 0.3], [0.0, 0.3]])] == [True, True]
    assert run(["certify", prob, str(out)]) == 0


def test_entropy_csv_to_stdout(tmp_path, capsys):
    assert run(["solve-entropy", write(tmp_path / "p.json", BERNOULLI), "--format", "csv"]) == 0
    text = capsys.readouterr().out
    assert "id,reference,Q" in text


def test_box_problem_with_null_bounds(tmp_path):
    box = with_(BERNOULLI, constraint={"type": "box",
                                       "values": {"lower": [1, 0.7], "upper": [1, None]}})
    prob = write(tmp_path / "box.json", box)
    out = tmp_path / "s.json"
    assert run(["solve-entropy", prob, "--out", str(out)]) == 0
    sol = json.loads(out.read_text())
    assert sol["x"][1] == pytest.approx(0.7, abs=1e-9)
    assert run(["certify", prob, str(out)]) == 0


def test_custom_family_table(tmp_path):
    s = np.linspace(-4, 4, 161)
    fam = {"tag": "Custom", "params": {"s": s.tolist(), "gamma": np.expm1(s).tolist(),
                                       "dgamma": np.exp(s).tolist()}}
    prob = write(tmp_path / "c.json", with_(BERNOULLI, family=fam))
    out = tmp_path / "s.json"
    assert run(["solve-entropy", prob, "--out", str(out), "--tol", "1e-6"]) == 0
    assert json.loads(out.read_text())["value"] == pytest.approx(0.130812, abs=1e-5)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(extra=1),
    lambda d: d["reference"].update(color="red"),
    lambda d: d["family"].update(tag="Shannon"),
    lambda d: d["constraint"].update(type="cone"),
    lambda d: d.update(features=[[1, 0]]),
    lambda d: d.update(kind="lp"),
    lambda d: d["family"].update(params={"scale": "big"}),
])
def test_structural_errors_exit_1(tmp_path, mutate):
    d = json.loads(json.dumps(BERNOULLI))
    mutate(d)
    assert run(["solve-entropy", write(tmp_path / "p.json", d)]) == 1


def test_unreadable_and_malformed_inputs(tmp_path):
    assert run(["solve-entropy", str(tmp_path / "missing.json")]) == 1
    (tmp_path / "bad.json").write_text("{not json")
    assert run(["solve-ot", str(tmp_path / "bad.json")]) == 1
    (tmp_path / "nan.json").write_text('{"kind": "ot", "mu": [NaN], "nu": [1], "cost": [[0]]}')
    assert run(["solve-ot", str(tmp_path / "nan.json")]) == 1
    assert run(["solve-ot", write(tmp_path / "m.json", with_(OT, mu=[0.7, 0.4]))]) == 1
    assert run(["solve-ot", write(tmp_path / "e.json", BERNOULLI)]) == 1
    assert run(["bogus"]) == 1


def test_gauge_subcommand(tmp_path, capsys):
    spec = write(tmp_path / "g.json", {"kind": "gauge", "family": "Quadratic", "A": [[1]],
                                       "w": [2], "which": "gamma"})
    assert run(["gauge", spec, "--op", "gauge", "--point", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(3.0, abs=1e-10)
    assert run(["gauge", spec, "--op", "support", "--point", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(2.0, rel=1e-6)
    assert run(["gauge", spec, "--op", "sandwich", "--point", "2"]) == 0
    sw = json.loads(capsys.readouterr().out)
    assert (sw["lower"], sw["support"], sw["upper"]) == pytest.approx((0.5, 2.0, 2.0), abs=1e-8)
    assert sw["holds"] is True
    assert run(["gauge", spec, "--op", "gauge", "--point", "1,x"]) == 1
    assert run(["gauge", spec, "--op", "gauge", "--point", "1,2"]) == 1


def test_gen_is_deterministic(tmp_path):
    for kind in ("entropy", "ot"):
        a, b, c = (tmp_path / f"{kind}{i}.json" for i in range(3))
        assert run(["gen", kind, "--seed", "7", "--size", "4", "--out", str(a)]) == 0
        run(["gen", kind, "--seed", "7", "--size", "4", "--out", str(b)])
        run(["gen", kind, "--seed", "8", "--size", "4", "--out", str(c)])
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()
        sub = "solve-entropy" if kind == "entropy" else "solve-ot"
        out = tmp_path / f"{kind}.sol.json"
        assert run([sub, str(a), "--oracle", "--out", str(out)]) == 0
        assert run(["certify", str(a), str(out)]) == 0
    assert run(["gen", "ot", "--seed", "1", "--size", "0"]) == 1


@pytest.mark.parametrize("family", ["RelativeEntropy", "Quadratic", "Burg", "Fermi"])
def test_generated_families_round_trip(tmp_path, family):
    prob = tmp_path / "p.json"
    run(["gen", "entropy", "--seed", "3", "--size", "6", "--family", family, "--out", str(prob)])
    out = tmp_path / "s.json"
    assert run(["solve-entropy", str(prob), "--out", str(out)]) == 0
    assert run(["certify", str(prob), str(out)]) == 0


def test_solution_files_are_byte_identical(tmp_path):
    prob = tmp_path / "p.json"
    run(["gen", "entropy", "--seed", "11", "--size", "9", "--out", str(prob)])
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["solve-entropy", str(prob), "--out", str(a)])
    run(["solve-entropy", str(prob), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_tolerance_precedence(tmp_path, monkeypatch):
    prob = write(tmp_path / "p.json", BERNOULLI)
    out = tmp_path / "s.json"

    def cert_tol(*extra):
        run(["solve-entropy", prob, "--out", str(out), *extra])
        return json.loads(out.read_text())["meta"]["tolerances"]["cert"]

    assert cert_tol() == 1e-8
    monkeypatch.setenv("SADDLEPOINT_TOL", "1e-7")
    assert cert_tol() == 1e-7
    assert cert_tol("--tol", "1e-6") == 1e-6
    monkeypatch.setenv("SADDLEPOINT_TOL", "loose")
    assert run(["solve-entropy", prob]) == 1


def test_console_entry_point(tmp_path):
    prob = write(tmp_path / "ot.json", OT)
    res = subprocess.run([sys.executable, "-m", "saddlepoint", "solve-ot", prob],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["value"] == pytest.approx(0.3)


def test_non_finite_values_are_strict_json(tmp_path):
    from saddlepoint.cli import dumps
    text = dumps({"a": math.inf, "b": [-math.inf, math.nan], "c": np.float64(0.1)})
    assert json.loads(text) == {"a": "inf", "b": ["-inf", "nan"], "c": 0.1}

import json

import pytest

from qeq import catalog, serialization
from qeq.cli import main
from qeq.core import Builtin, ConstantMap, ConvexRegion, Numerics, ProblemInstance


def run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main([*argv, "--out", str(out)])
    doc = json.loads(out.read_text()) if out.exists() else None
    return code, doc


def test_catalog(tmp_path):
    code, doc = run(tmp_path, "catalog")
    names = [row["name"] for row in doc["instances"]]
    assert code == 0 and names and "tz-counterexample" in names
    for name in ("e2-even", "e3-moving", "e4-qvi", "e5-gnep"):
        assert name in names


def test_catalog_show_loads(tmp_path):
    code, doc = run(tmp_path, "catalog", "--show", "e3-moving")
    assert code == 0
    assert serialization.canonical(serialization.from_dict(doc)) == serialization.canonical(catalog.load("e3-moving"))


class TestSolve:
    def test_moving_box(self, tmp_path):
        code, doc = run(tmp_path, "solve", "e3-moving")
        assert code == 0
        assert doc["payload"]["solutions"] == [[1.0]]
        assert doc["command"] == "solve" and len(doc["input_hash"]) == 64

    def test_from_file(self, tmp_path):
        path = tmp_path / "inst.json"
        path.write_text(serialization.canonical(catalog.load("e2-even")))
        code, doc = run(tmp_path, "solve", str(path))
        assert code == 0 and doc["payload"]["solutions"] == [[0.0]]

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{oops")
        code, doc = run(tmp_path, "solve", str(path))
        assert code == 1 and doc is None

    def test_schema_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema_version": 1, "kind": "QEP"}))
        assert run(tmp_path, "solve", str(path))[0] == 1

    def test_refuted_hypothesis(self, tmp_path):
        code, doc = run(tmp_path, "solve", "ctrl-one", "--variant", "case1")
        assert code == 3
        assert doc["payload"]["hypothesis"]["verdicts"]["properly_quasi_monotone"]["passed"] is False

    def test_no_solutions(self, tmp_path):
        # K ≡ [5, 6] never meets C = [−1, 1], so there is no fixed point to solve on
        C = ConvexRegion.interval(-1, 1)
        inst = ProblemInstance(1, C, ConstantMap(ConvexRegion.interval(5, 6), 1), Builtin("zero", 1),
                               "QEP", Numerics(rho=2.0), "no-fixed-point")
        path = tmp_path / "empty.json"
        path.write_text(serialization.canonical(inst))
        code, doc = run(tmp_path, "solve", str(path), "--variant", "oracle")
        assert code == 2 and doc["payload"]["solutions"] == []

    def test_game(self, tmp_path):
        code, doc = run(tmp_path, "solve", "e5-gnep")
        assert code == 0 and doc["payload"]["solutions"] == [[0.0, 0.0]]
        assert doc["payload"]["extras"]["equilibrium_checks"][0]["ok"]

    def test_unknown_instance(self, tmp_path):
        assert run(tmp_path, "solve", "no-such-thing")[0] == 1

    def test_unknown_variant(self, tmp_path):
        assert run(tmp_path, "solve", "e3-moving", "--variant", "case7")[0] == 1


class TestVerify:
    def test_pseudo_monotone(self, tmp_path):
        code, doc = run(tmp_path, "verify", "e2-even", "--property", "pseudo_monotone")
        assert code == 0 and doc["payload"]["passed"]

    def test_pqm_refuted(self, tmp_path):
        code, doc = run(tmp_path, "verify", "ctrl-one", "--property", "properly_quasi_monotone")
        assert code == 3 and doc["payload"]["witness"] is not None

    def test_unknown_property(self, tmp_path):
        assert run(tmp_path, "verify", "e2-even", "--property", "sparkly")[0] == 1

    def test_lsc(self, tmp_path):
        assert run(tmp_path, "verify", "ctrl-jump", "--property", "lsc")[0] == 3


class TestCoercivity:
    def test_box_sweep_and_ball(self, tmp_path):
        code, doc = run(tmp_path, "coercivity", "tz-counterexample", "--rho", "2", "--tz")
        p = doc["payload"]
        assert code == 0 and p["ucc"]["cond1"]["passed"]
        assert not p["tz"]["passed"] and all(not c["passed"] for c in p["tz"]["details"]["candidates"])

    def test_small_radius(self, tmp_path):
        code, doc = run(tmp_path, "coercivity", "tz-counterexample", "--rho", "0.5")
        assert code == 3 and not doc["payload"]["ucc"]["cond1"]["passed"]

    def test_search(self, tmp_path):
        code, doc = run(tmp_path, "coercivity", "e3-moving", "--search")
        assert code == 0 and doc["payload"]["search"]["rho"] == 2.0


class TestOracle:
    def test_moving_box(self, tmp_path):
        code, doc = run(tmp_path, "oracle", "e3-moving")
        assert code == 0 and doc["payload"]["solutions"] == [[1.0]]

    def test_zero(self, tmp_path):
        code, doc = run(tmp_path, "oracle", "ctrl-zero")
        assert code == 0 and len(doc["payload"]["solutions"]) == 201

    def test_guard(self, tmp_path):
        assert run(tmp_path, "oracle", "e2-extended", "--window-radius", "1e6")[0] == 1


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("QEQ_SEED", "17")
    _, doc = run(tmp_path, "verify", "e2-even", "--property", "quasi_monotone")
    assert doc["arguments"]["seed"] == 17
    monkeypatch.setenv("QEQ_SEED", "x")
    assert run(tmp_path, "verify", "e2-even", "--property", "quasi_monotone")[0] == 1


def test_stdout(capsys):
    assert main(["oracle", "e2-even"]) == 0
    assert json.loads(capsys.readouterr().out)["payload"]["solutions"] == [[0.0]]


def test_missing_command():
    with pytest.raises(SystemExit):
        main([])

from __future__ import annotations

import json

import pytest

from dynarisk.cli import CommandRequest, main, run_command
from dynarisk.errors import UsageError
from dynarisk.fixtures import bundled_path


def path(name):
    return str(bundled_path(name))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_demo_counterexample(capsys):
    code, out, _ = run(capsys, "demo", "counterexample")
    rep = json.loads(out)
    assert code == 1
    assert rep["phi_0"] == {"O": "3/4"}
    assert rep["phi_1"] == {"w12": "5/2", "w34": "0"}
    assert rep["phi_0_of_pasted"] == {"O": "1"}
    assert rep["verdict"] == "REFUTED"
    assert rep["witnesses"][0]["lhs"] == "3/4" and rep["witnesses"][0]["rhs"] == "1"


@pytest.mark.parametrize("name", ["worst-stopping", "entropic", "weighted"])
def test_other_demos_exit_zero(capsys, name):
    code, out, _ = run(capsys, "demo", name)
    assert code == 0
    rep = json.loads(out)
    if name == "worst-stopping":
        assert rep["value"] == {"O": "7/4"} and rep["brute_force_min"] == "7/4"
    if name == "weighted":
        assert rep["homomorphism_holds"] is True and rep["verdict"] == "CERTIFIED"


def test_eval_mean(capsys):
    code, out, _ = run(capsys, "eval", "--functional", path("paper53_mean.json"), "--process", path("paper53_process.json"), "--time", "0")
    assert code == 0
    assert json.loads(out)["value"] == {"O": "7/4"}


def test_eval_entropic_prints_float(capsys):
    code, out, _ = run(capsys, "eval", "--functional", path("paper53_entropic.json"), "--process", path("paper53_process.json"))
    value = json.loads(out)["value"]["O"]
    assert code == 0 and isinstance(value, str) and float(value) < 1.75


def test_missing_file_exit_two(capsys, tmp_path):
    code, _, err = run(capsys, "check", "--process", str(tmp_path / "missing.json"))
    assert code == 2 and "not found" in err


def test_bad_json_exit_two(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, _ = run(capsys, "eval", "--functional", str(bad), "--process", path("paper53_process.json"))
    assert code == 2


def test_bad_tolerance():
    with pytest.raises(UsageError):
        run_command(CommandRequest("demo", tol=0, options={"name": "weighted"}))


def test_check_modes(capsys):
    code, out, _ = run(capsys, "check", "--process", path("paper53_inf_time.json"), "--battery", path("paper53_process.json"), "--mode", "sweep")
    assert code == 1 and json.loads(out)["verdict"] == "REFUTED"
    code, out, _ = run(capsys, "check", "--process", path("paper53_mean.json"), "--n", "20")
    assert code == 0 and json.loads(out)["label"] == "CERTIFIED-on-battery"


def test_certify(capsys):
    code, out, _ = run(capsys, "certify", "--process", path("paper53_weighted.json"))
    assert code == 0 and json.loads(out)["scope"] == "theorem"
    code, out, _ = run(capsys, "certify", "--process", path("paper53_inf_time.json"), "--n", "10")
    assert code == 1


def test_penalty_and_snell(capsys, tmp_path):
    scen = tmp_path / "a.json"
    scen.write_text(json.dumps({"tree": "PAPER53", "mode": "FINAL", "f": {"w1": "4", "w2": "0", "w3": "0", "w4": "0"}}))
    code, out, _ = run(capsys, "penalty", "--functional", path("paper53_mean.json"), "--scenario", str(scen))
    assert code == 0 and json.loads(out)["value"] == {"O": "-inf"}
    code, out, _ = run(capsys, "snell", "--functional", path("paper53_worst_stopping.json"), "--process", path("paper53_process.json"), "--time", "1")
    rep = json.loads(out)
    assert code == 0 and rep["value"] == {"w12": "3", "w34": "1/2"}
    code, _, _ = run(capsys, "snell", "--functional", path("paper53_mean.json"), "--process", path("paper53_process.json"))
    assert code == 2


def test_json_byte_identical(capsys):
    argv = ["check", "--process", path("paper53_mean.json"), "--n", "15", "--seed", "7"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_env_seed_overrides(capsys, monkeypatch):
    argv = ["check", "--process", path("paper53_mean.json"), "--n", "5", "--seed", "1"]
    monkeypatch.setenv("DYNARISK_SEED", "42")
    _, out, _ = run(capsys, *argv)
    assert json.loads(out)["seed"] == 42
    monkeypatch.setenv("DYNARISK_SEED", "x")
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_table_format(capsys):
    code, out, _ = run(capsys, "demo", "counterexample", "--format", "table")
    assert code == 1 and "REFUTED" in out and "3/4" in out

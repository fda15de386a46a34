import json
import os
from pathlib import Path

import pytest

from sra.cli import main

from conftest import CORPUS


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_check_ok_exit_zero(capsys):
    assert run_cli("check", CORPUS / "robot.sra") == 0
    assert "ok" in capsys.readouterr().out


def test_check_mutant_exit_two(capsys):
    assert run_cli("check", CORPUS / "mutants" / "input_assigned.sra") == 2
    assert "input-assigned" in capsys.readouterr().out


def test_check_json(capsys):
    assert run_cli("--json", "check", CORPUS / "robot.sra") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is True


def test_simulate_scenario(tmp_path, capsys):
    out = tmp_path / "trace.jsonl"
    code = run_cli("simulate", CORPUS / "robot.sra",
                   "--config", CORPUS / "robot.sracfg",
                   "--cycles", "1",
                   "--inputs", CORPUS / "robot_scenario.json",
                   "--monitor", CORPUS / "robot_prop.srainv",
                   "--out", out)
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert json.loads(lines[-1])["phase"] == "End"


def test_simulate_violation_exit_one(tmp_path):
    inputs = tmp_path / "both.json"
    inputs.write_text(json.dumps(
        {"0": {"sL.obstacle": True, "sR1.obstacle": True,
               "sR2.obstacle": False}}))
    code = run_cli("simulate", CORPUS / "robot_mutant.sra",
                   "--config", CORPUS / "robot.sracfg",
                   "--cycles", "1", "--inputs", inputs,
                   "--monitor", CORPUS / "robot_prop.srainv",
                   "--out", tmp_path / "t.jsonl")
    assert code == 1


def test_simulate_fixed_order(tmp_path):
    orders = tmp_path / "orders.json"
    orders.write_text(json.dumps(
        {p: ["c1", "sL", "sR1", "sR2"]
         for p in ("Sense", "Act", "Reset", "End")}))
    code = run_cli("simulate", CORPUS / "robot.sra",
                   "--config", CORPUS / "robot.sracfg",
                   "--order", f"fixed:{orders}",
                   "--inputs", CORPUS / "robot_scenario.json",
                   "--out", tmp_path / "t.jsonl")
    assert code == 0
    steps = [json.loads(l) for l in (tmp_path / "t.jsonl").read_text().splitlines()]
    acts = [s for s in steps
            if s["label"]["kind"] == "self-loop" and s["label"]["phase"] == "Act"]
    assert len(acts) == 1  # controller-first order consumes events in one sweep


def test_simulate_rejects_bad_configuration(tmp_path, capsys):
    bad = tmp_path / "bad.sracfg"
    bad.write_text((CORPUS / "robot.sracfg").read_text().replace(
        "c1.leftSensors  = { sL };", "c1.leftSensors  = { };"))
    code = run_cli("simulate", CORPUS / "robot.sra", "--config", bad,
                   "--out", tmp_path / "t.jsonl")
    assert code == 2


def test_contracts_emission(tmp_path, capsys):
    code = run_cli("contracts", CORPUS / "robot.sra", "--out", tmp_path)
    assert code == 0
    text = (tmp_path / "contracts.txt").read_text()
    assert "contract exec(Controller, Act):" in text
    smt = (tmp_path / "contracts.smt2").read_text()
    assert "(define-fun exec_Controller_Act ((self Controller)) Bool" in smt


def test_ground_emits_model_and_lemmas(tmp_path):
    code = run_cli("ground", CORPUS / "robot_single.sra", "--out", tmp_path,
                   "--property", CORPUS / "robot_prop.srainv")
    assert code == 0
    grounded = (tmp_path / "robot_single_grounded.sra").read_text()
    assert "ref leftSensor : Sensor grounds leftSensors" in grounded
    assert "ghost set leftSensors" in grounded
    lemmas = list(tmp_path.glob("lemma_*.smt2"))
    assert lemmas
    # all writes stayed under --out
    assert not (Path.cwd() / "robot_single_grounded.sra").exists()


def test_verify_local_tiny_model(tmp_path, capsys):
    code = run_cli("verify-local", CORPUS / "mutants" / "unknown_name.sra")
    assert code == 2  # the mutant does not even check


def test_verify_global_rejects_configuration(capsys):
    code = run_cli("verify-global", CORPUS / "robot.sra",
                   "--invariant", CORPUS / "robot.srainv",
                   "--property", CORPUS / "robot_prop.srainv",
                   "--config", CORPUS / "robot.sracfg")
    assert code == 2
    assert "parameterized" in capsys.readouterr().err


def test_unknown_file_exit_two(capsys):
    assert run_cli("check", "no-such-file.sra") == 2


def test_oracle_contracts_cli(capsys):
    code = run_cli("oracle", CORPUS / "robot.sra", "--kind", "contracts",
                   "--samples", "60", "--seed", "2")
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "pass"

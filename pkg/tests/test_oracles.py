import random

import pytest

from sra.frontend import load_configuration, load_invariant
from sra.model import Card, FieldAcc, Var
from sra.oracles import (OracleError, RandomModelConfig,
                         bounded_reachability_check, contract_vs_simulator,
                         effect_host_model, effect_transform_oracle,
                         random_configuration, random_effect_source)
from sra.simulator import Exhaustive, evaluate

from conftest import corpus_text


def test_random_configurations_satisfy_constraints(robot):
    for i in range(10):
        rng = random.Random(100 + i)
        cfg = random_configuration(robot, rng)
        for g in robot.constraints:
            assert evaluate(g, robot, cfg, None) is True


def test_random_configuration_retry_cap():
    # an unsatisfiable constraint set must fail loudly, not loop
    from sra.frontend import load_model
    src = corpus_text("hub.sra").replace(
        "forall h in All_Hub :: |h.spokes| <= 1;",
        "forall h in All_Hub :: |h.spokes| <= 1;\n"
        "  forall h in All_Hub :: |h.spokes| >= 2;")
    m = load_model(src, "unsat-gamma")
    with pytest.raises(OracleError, match="attempts"):
        random_configuration(m, random.Random(0),
                             RandomModelConfig(retry_cap=300))


def test_contract_oracle_passes_on_robot(robot):
    rep = contract_vs_simulator(robot, 300, seed=5)
    assert rep["status"] == "pass"
    assert rep["soundness_rate"] == 1.0
    assert rep["precision_rate"] == 1.0
    # every class/phase combination exercised
    assert all(n > 0 for n in rep["per_combo"].values())
    assert rep["tick_checked"] > 0 and rep["init_checked"] > 0


def test_contract_oracle_vacuous_on_zero_samples(robot):
    rep = contract_vs_simulator(robot, 0, seed=5)
    assert rep["status"] == "pass"
    assert rep["samples"] == 0


def test_contract_oracle_reports_replayable_failures(robot):
    """A gutted stutter disjunct (missing its unchanged conjuncts) keeps
    soundness but drops precision, and every failure carries a replay seed."""
    from sra.contracts import Contract, exec_contract
    from sra.model import SelfField

    def gutted(m, cls, phase):
        c = exec_contract(m, cls, phase)
        disjuncts = tuple((n, d) if n != "stutter"
                          else (n, SelfField("executed"))
                          for n, d in c.disjuncts)
        from sra.model import or_
        return Contract(c.kind, c.cls, c.phase,
                        or_(*(d for _, d in disjuncts)), disjuncts)

    rep = contract_vs_simulator(robot, 80, seed=6, exec_factory=gutted)
    assert rep["status"] == "fail"
    assert rep["soundness_rate"] == 1.0
    assert rep["precision_rate"] < 1.0
    assert all("seed" in f for f in rep["failures"] if "fired" in f)


def test_bounded_reachability_on_appendix_config(robot, robot_cfg, robot_inv,
                                                 robot_prop):
    rep = bounded_reachability_check(robot, robot_cfg, robot_inv, robot_prop, 3)
    assert rep.status == "ok"
    assert rep.states > 100


def test_bounded_reachability_bound_zero_checks_init_only(robot, robot_cfg,
                                                          robot_inv,
                                                          robot_prop):
    rep = bounded_reachability_check(robot, robot_cfg, robot_inv, robot_prop, 0)
    assert rep.status == "ok"


def test_bounded_reachability_finds_mutant_violation(mutant):
    cfg, _ = load_configuration(corpus_text("robot.sracfg"), mutant)
    prop = load_invariant(corpus_text("robot_prop.srainv"), mutant)
    rep = bounded_reachability_check(mutant, cfg, None, prop, 1)
    assert rep.status == "violation"
    assert rep.violations[0]["kind"] == "property"
    assert rep.violations[0]["phase"] == "End"


def test_exhaustive_cap_enforced(robot, robot_cfg):
    with pytest.raises(OracleError, match="cap"):
        bounded_reachability_check(robot, robot_cfg, None, None, 1,
                                   policy=Exhaustive(cap=2))


def test_effect_oracle_on_random_effects():
    rng = random.Random(31)
    for _ in range(15):
        src = random_effect_source(rng, depth=4)
        host = effect_host_model(src)
        cfg = random_configuration(host, rng)
        effect = host.class_map["T"].transitions[0].effect
        bad = effect_transform_oracle(effect, host.class_map["T"], host, cfg,
                                      25, rng)
        assert bad == [], (src, bad[:2])


def test_effect_generator_covers_all_constructs():
    rng = random.Random(8)
    sources = "\n".join(random_effect_source(rng, 4) for _ in range(60))
    assert ":= *;" in sources          # havoc
    assert "if " in sources            # conditionals
    assert "forall " in sources        # quantified assignment
    assert ";" in sources              # sequencing

"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines; the
verification-backed criteria drive the external SMT solver."""

import json
import random
import time

import pytest

from sra import model as M
from sra.frontend import load_configuration, load_gprime, load_invariant, load_model
from sra.grounding import equivalence_lemmas, ground_statements, plan
from sra.oracles import (RandomModelConfig, bounded_reachability_check,
                         contract_vs_simulator, effect_host_model,
                         effect_transform_oracle, random_configuration,
                         random_effect_source)
from sra.simulator import FixedOrder, RandomInputs, Scripted, Seeded, run
from sra.vcgen import (INVALID, VALID, build_checks,
                       build_local_contract_tasks, discharge, overall_verdict,
                       report_text)

from conftest import CORPUS, corpus_text


def report(n, title):
    print(f"\nACCEPTANCE {n} ({title}): PASS")


def test_1_scenario_fidelity(robot, robot_cfg, scenario_inputs, good_order,
                             robot_prop):
    """One controller, three sensors, scripted inputs, fixed order: every
    intermediate fact of the worked scenario reproduces exactly."""
    t0 = time.monotonic()
    res = run(robot, robot_cfg, good_order, scenario_inputs, cycles=1,
              monitors=[robot_prop])
    elapsed = time.monotonic() - t0
    steps = res.trace.steps
    assert res.ok

    post_sense = steps[1].state
    assert steps[1].label == {"kind": "self-loop", "phase": "Sense",
                              "order": ["c1", "sL", "sR1", "sR2"]}
    assert post_sense.values[("sL", "location")] == "NoGo"
    assert post_sense.values[("sR1", "location")] == "Go"
    assert post_sense.values[("sR2", "location")] == "Go"
    assert post_sense.values[("c1", "location")] == "Idle"  # stuttered

    post_act = steps[3].state
    assert steps[3].label["phase"] == "Act"
    assert post_act.values[("c1", "location")] == "Moving"
    assert post_act.values[("c1", "direction")] == "Right"
    for s in ("sL", "sR1", "sR2"):
        assert post_act.values[(s, "processed")] is False  # consumed
        assert post_act.values[(s, "location")] == "Ready"

    final = steps[-1].state
    assert final.phase == "End"
    assert final.values[("c1", "location")] == "Idle"
    assert final.values[("c1", "direction")] == "Right"

    assert elapsed < 1.0, f"scenario took {elapsed:.2f}s"
    report(1, "scenario fidelity")


def test_2_parameterized_proof(robot, robot_inv, robot_prop, robot_gp,
                               solver_jobs):
    """verify-global on the robot model discharges every entailment task
    valid (and the local contract obligations backing the theorem)."""
    t0 = time.monotonic()
    tasks = build_checks(robot, robot_inv, robot_prop, robot_gp)
    locals_ = build_local_contract_tasks(robot)
    results = discharge(tasks + locals_, jobs=solver_jobs, timeout=60)
    elapsed = time.monotonic() - t0
    assert overall_verdict(results) == "proven", report_text(results)
    kinds = {t.kind for t in tasks}
    assert kinds == {"Establishment", "Stability", "SelfLoopPreservation",
                     "Init", "PhaseNonFinal", "PhaseFinal", "Reset",
                     "PropertyImplication"}
    assert all(r.wall_time < 60 for r in results)
    assert elapsed < 600, f"pipeline took {elapsed:.0f}s"
    print(f"\n  {len(results)} tasks valid in {elapsed:.0f}s")
    report(2, "parameterized proof")


def test_3_theorem1_agreement(robot, robot_inv, robot_prop, mutant,
                              solver_jobs):
    """Bounded exhaustive reachability finds no violation on 20 random legal
    configurations; the weakened-guard mutant is caught by both the simulator
    and the entailment checks."""
    opts = RandomModelConfig(seed=41, max_per_class=4, total_cap=6)
    for i in range(20):
        rng = random.Random(41_000 + i)
        cfg = random_configuration(robot, rng, opts)
        assert max(len(u) for u in cfg.universes.values()) <= 4
        rep = bounded_reachability_check(robot, cfg, robot_inv, robot_prop, 3)
        assert rep.status == "ok", (i, cfg.universes, rep.violations)

    mcfg, _ = load_configuration(corpus_text("robot.sracfg"), mutant)
    mprop = load_invariant(corpus_text("robot_prop.srainv"), mutant)
    rep = bounded_reachability_check(mutant, mcfg, None, mprop, 1)
    assert rep.status == "violation"
    assert rep.violations[0]["kind"] == "property"

    minv = load_invariant(corpus_text("robot.srainv"), mutant)
    mgp = load_gprime(corpus_text("robot.gprime"), mutant)
    tasks = build_checks(mutant, minv, mprop, mgp)
    results = discharge(tasks, jobs=solver_jobs, timeout=60)
    bad = [r for r in results if r.verdict == INVALID]
    assert bad, "expected at least one invalid entailment for the mutant"
    assert any(r.task_id == "selfloop_Controller_Act" for r in bad)
    report(3, "theorem-1 agreement")


def test_4_contract_oracle(robot, single, hub, mutant):
    """1000 samples per corpus model: 100% soundness and 100% precision for
    every class and phase, in under 30 seconds per model."""
    for name, m in (("robot", robot), ("robot_single", single),
                    ("hub", hub), ("robot_mutant", mutant)):
        t0 = time.monotonic()
        rep = contract_vs_simulator(m, 1000, seed=13)
        elapsed = time.monotonic() - t0
        assert rep["status"] == "pass", (name, rep["failures"][:3])
        assert rep["soundness_rate"] == 1.0
        assert rep["precision_rate"] == 1.0
        assert all(n > 0 for n in rep["per_combo"].values()), name
        assert elapsed < 30, f"{name} oracle took {elapsed:.1f}s"
    report(4, "contract oracle")


def test_5_effect_transformation_oracle(robot, hub, single):
    """Every corpus effect plus 200 random effects (depth <= 4, all
    transformation constructs): symbolic-map evaluation equals concrete
    execution on 100 random pre-states each, zero mismatches."""
    rng = random.Random(99)
    for m in (robot, hub, single):
        cfg = random_configuration(m, rng)
        for cls in m.classes:
            for t in cls.transitions:
                bad = effect_transform_oracle(t.effect, cls, m, cfg, 100, rng)
                assert bad == [], (cls.name, t.name, bad[:2])
    for i in range(200):
        src = random_effect_source(rng, depth=4)
        host = effect_host_model(src)
        cfg = random_configuration(host, rng)
        effect = host.class_map["T"].transitions[0].effect
        bad = effect_transform_oracle(effect, host.class_map["T"], host, cfg,
                                      100, rng)
        assert bad == [], (src, bad[:2])
    report(5, "effect-transformation oracle")


def test_6_grounding_equivalence(single, single_cfg, solver_jobs):
    """Grounded and original robot-single runs are trace-identical over 20
    seeds, and every equivalence lemma discharges valid in under 10s."""
    pl = plan(single)
    grounded = ground_statements(single, pl)
    for seed in range(20):
        r1 = run(single, single_cfg, Seeded(seed), RandomInputs(seed), cycles=3)
        r2 = run(grounded, single_cfg, Seeded(seed), RandomInputs(seed),
                 cycles=3)
        assert len(r1.trace.steps) == len(r2.trace.steps)
        for a, b in zip(r1.trace.steps, r2.trace.steps):
            assert a.label == b.label and a.state.key() == b.state.key()

    inv = load_invariant(corpus_text("robot.srainv"), single)
    prop = load_invariant(corpus_text("robot_prop.srainv"), single)
    tasks = equivalence_lemmas(single, pl, inv=inv, prop=prop)
    assert len(tasks) >= 10
    results = discharge(tasks, jobs=solver_jobs, timeout=30)
    assert overall_verdict(results) == "proven", report_text(results)
    assert all(r.wall_time < 10 for r in results)
    print(f"\n  {len(results)} lemmas valid")
    report(6, "grounding equivalence")


def test_7_frontend_robustness(mutants_manifest):
    """All restriction-violating mutants rejected with their diagnostic
    codes; parse/pretty-print round trip on the full corpus."""
    from sra.frontend import check_model, parse_model
    assert len(mutants_manifest) >= 10
    for fname, want in mutants_manifest.items():
        parsed, diags = parse_model(corpus_text(f"mutants/{fname}"), fname)
        if parsed is not None:
            _, cdiags = check_model(parsed)
            diags = diags + cdiags
        codes = {d.code for d in diags if d.severity == "error"}
        assert want in codes, (fname, codes)
    for name in ("robot", "robot_single", "robot_mutant", "hub"):
        m = load_model(corpus_text(f"{name}.sra"), name)
        assert load_model(M.model_text(m), "pp") == m
    report(7, "frontend robustness")


def test_8_order_sensitivity_witness(robot, robot_cfg, scenario_inputs,
                                     reversed_order, robot_prop):
    """Under the reversed Act order the sensors stutter, events persist, and
    an additional Act self-loop fires before the exit guard holds."""
    res = run(robot, robot_cfg, reversed_order, scenario_inputs, cycles=1,
              monitors=[robot_prop])
    assert res.ok
    steps = res.trace.steps
    act_loops = [s for s in steps if s.label.get("kind") == "self-loop"
                 and s.label.get("phase") == "Act"]
    assert len(act_loops) == 2, "expected an additional act phase"

    first, second = act_loops
    before_first = steps[first.index - 1].state
    # sensors ran before the controller: they stuttered and their events
    # remained pending after the first sweep
    for s in ("sL", "sR1", "sR2"):
        assert first.state.values[(s, "location")] == \
            before_first.values[(s, "location")]
        assert first.state.values[(s, "processed")] is True
    assert first.state.values[("c1", "location")] == "Moving"
    # the second sweep consumes the events, enabling the exit guard
    for s in ("sL", "sR1", "sR2"):
        assert second.state.values[(s, "processed")] is False
        assert second.state.values[(s, "location")] == "Ready"
    assert steps[second.index + 1].label == {"kind": "phase-change",
                                             "from": "Act", "to": "Reset"}
    report(8, "order-sensitivity witness")

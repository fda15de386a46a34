import random

import pytest

from sra import model as M
from sra.contracts import exec_contract, instantiate
from sra.frontend import load_model
from sra.model import BoolLit, Old, Var, and_, eq, not_
from sra.oracles import random_state
from sra.simulator import exec_local, init_state, run, RandomInputs, Seeded
from sra.vcgen import (Encoder, EncodingError, VALID, INVALID, build_checks,
                       build_local_contract_tasks, discharge, make_task,
                       overall_verdict, report_json, report_text, run_solver,
                       write_tasks)
from sra.vcgen.checks import TwoStateContext, step_frame, _ctx

from conftest import corpus_text


# -- sexp plumbing for the negation-discipline check ----------------------------


def parse_sexps(text):
    out, stack, tok = [], [], []
    cur = out
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch == "(":
            new = []
            cur.append(new)
            stack.append(cur)
            cur = new
        elif ch == ")":
            if tok:
                cur.append("".join(tok))
                tok = []
            cur = stack.pop()
        elif ch.isspace():
            if tok:
                cur.append("".join(tok))
                tok = []
        else:
            tok.append(ch)
        i += 1
    if tok:
        cur.append("".join(tok))
    return out


def alpha_normalize(sexp, env=None, counter=None):
    """Rename bound variables to de-Bruijn-style names so that two encodings
    of the same formula compare equal despite fresh-name counters."""
    env = env or {}
    counter = counter if counter is not None else [0]
    if isinstance(sexp, str):
        return env.get(sexp, sexp)
    if sexp and sexp[0] in ("forall", "exists"):
        binders = sexp[1]
        env2 = dict(env)
        new_binders = []
        for name, sort in binders:
            counter[0] += 1
            fresh = f"v{counter[0]}"
            env2[name] = fresh
            new_binders.append([fresh, sort])
        return [sexp[0], new_binders,
                alpha_normalize(sexp[2], env2, counter)]
    return [alpha_normalize(x, env, counter) for x in sexp]


# -- encode_model ------------------------------------------------------------------


def test_preamble_declares_sorts_and_predicates(robot):
    pre = "\n".join(Encoder(robot).preamble())
    assert "(declare-sort Sensor 0)" in pre
    assert "(declare-sort Controller 0)" in pre
    for name in ("leftSensors", "rightSensors", "allSensors"):
        assert f"(declare-fun Controller__{name} (Controller Sensor) Bool)" in pre
    assert pre.count("; configuration constraint") == 5
    assert "(declare-const phase__pre Phase)" in pre


def test_gamma3_expands_to_witness(robot):
    pre = "\n".join(Encoder(robot).preamble())
    # |leftSensors| >= 1 becomes an existential witness
    assert "(exists ((w!" in pre


def test_cardinality_expansion_against_enumeration(hub):
    """card_ge / card_le agree with brute-force set enumeration: the encoding
    of |spokes| <= 1 forbids two distinct members and allows one."""
    enc = Encoder(hub)
    base = enc.preamble()
    probes = [
        # two distinct members in spokes: inconsistent with Gamma
        ("(assert (exists ((a Spoke) (b Spoke)) (and (distinct a b) "
         "(Hub__spokes h a) (Hub__spokes h b))))", "unsat"),
        # a single member is fine
        ("(assert (exists ((a Spoke)) (Hub__spokes h a)))", "sat"),
    ]
    for probe, want in probes:
        text = "\n".join(base + ["(declare-const h Hub)",
                                 "(assert (All_Hub h))", probe, "(check-sat)"])
        task = make_fake_task(text)
        res = run_solver(task, timeout=30, want_model=False, want_stats=False)
        got = {"valid": "unsat", "invalid": "sat"}.get(res.verdict)
        assert got == want, (probe, res.verdict, res.detail)


def make_fake_task(smt_text):
    from sra.vcgen.checks import VerificationTask
    return VerificationTask("probe", "Probe", BoolLit(True), {}, smt_text + "\n")


def test_model_without_constraints_has_no_gamma_asserts():
    src = corpus_text("mutants/unknown_phase.sra").replace(
        "  transition t2 = (B, true, A, { }, R)\n", "")
    m = load_model(src, "plain")
    pre = "\n".join(Encoder(m).preamble())
    assert "configuration constraint" not in pre


def test_cardinality_bound_overflow_rejected(robot):
    enc = Encoder(robot, card_bound=4)
    bad = M.Binary("le", M.IntLit(5),
                   M.Card(M.FieldAcc(Var("c"), "leftSensors")))
    with pytest.raises(EncodingError, match="bound"):
        enc.encode(bad, enc.env({"c": "Controller"}))


# -- task structure -------------------------------------------------------------------


def test_negation_discipline(robot, robot_inv, robot_prop, robot_gp):
    tasks = build_checks(robot, robot_inv, robot_prop, robot_gp)
    t = tasks[0]
    sexps = parse_sexps(t.smt_text)
    asserts = [s for s in sexps if isinstance(s, list) and s and s[0] == "assert"]
    negated = [s for s in asserts
               if isinstance(s[1], list) and s[1] and s[1][0] == "not"]
    # exactly one negated assertion: the task formula
    assert len(negated) == 1
    ctx = _ctx(robot)
    for name, cls in t.consts.items():
        pass
    fresh = ctx.encoder.encode(t.formula, ctx.encoder.env(t.consts))
    want = alpha_normalize(parse_sexps(f"(not {fresh})")[0])
    got = alpha_normalize(negated[0][1])
    assert got == want


def test_establishment_formula_shape(robot, robot_inv, robot_prop):
    # with the default g', establishment for Sense is (Inv && G1) ==> !c.executed
    tasks = build_checks(robot, robot_inv, robot_prop, gprime=None)
    est = [t for t in tasks if t.id == "establishment_Sensor_Sense"][0]
    f = est.formula
    assert isinstance(f, M.Binary) and f.op == "implies"
    assert M.expr_text(f.right) == "!c.executed"
    sense_loop = robot.scheduler.transitions[0]
    assert M.expr_text(sense_loop.guard) in M.expr_text(f.left)


def test_reset_task_has_input_change(robot, robot_inv, robot_prop, robot_gp):
    tasks = build_checks(robot, robot_inv, robot_prop, robot_gp)
    reset = [t for t in tasks if t.kind == "Reset"][0]
    text = M.expr_text(reset.formula)
    # non-input fields pinned, the obstacle input free
    for fname in ("direction", "processed", "location", "executed"):
        assert f"x.{fname} == old(x.{fname})" in text.replace("x_", "x").replace(
            "x1", "x").replace("x2", "x") or f".{fname} == old(" in text
    assert ".obstacle == old(" not in text


def test_task_files_written(tmp_path, robot, robot_inv, robot_prop, robot_gp):
    tasks = build_checks(robot, robot_inv, robot_prop, robot_gp)
    paths = write_tasks(tasks[:3], str(tmp_path))
    assert all(p.endswith(".smt2") for p in paths)
    assert (tmp_path / tasks[0].filename()).read_text() == tasks[0].smt_text


# -- discharge ---------------------------------------------------------------------------


def test_trivial_tautology_is_valid(robot):
    task = make_task(_ctx(robot), "taut", "Probe", BoolLit(True), {})
    res = run_solver(task, timeout=30)
    assert res.verdict == VALID


def test_trivial_contradiction_is_invalid_with_model(robot):
    task = make_task(_ctx(robot), "contra", "Probe", BoolLit(False), {})
    res = run_solver(task, timeout=30)
    assert res.verdict == INVALID
    assert res.model_summary is not None


def test_property_implication_with_conjunct_is_valid(robot, robot_prop):
    inv = and_(robot_prop, BoolLit(True))
    tasks = build_checks(robot, inv, robot_prop, None)
    prop_task = [t for t in tasks if t.kind == "PropertyImplication"][0]
    res = run_solver(prop_task, timeout=60)
    assert res.verdict == VALID


def test_local_contract_tasks_valid_for_sensor(robot, solver_jobs):
    tasks = [t for t in build_local_contract_tasks(robot)
             if t.meta.get("cls") == "Sensor"]
    results = discharge(tasks, jobs=solver_jobs, timeout=60)
    assert overall_verdict(results) == "proven", report_text(results)


def test_corrupted_contract_detected(robot):
    """Moving a consumed event into the unchanged frame contradicts the
    concrete reset-on-consumption semantics: the obligation turns invalid."""
    tasks = [t for t in build_local_contract_tasks(robot)
             if t.id == "local_exec_Sensor_Act"]
    good = tasks[0]
    corrupt_formula = _swap_reset_events(good.formula)
    assert corrupt_formula != good.formula
    ctx = _ctx(robot)
    bad = make_task(ctx, good.id + "_corrupt", good.kind, corrupt_formula,
                    good.consts, good.meta, good.extra_asserts)
    res = run_solver(bad, timeout=60)
    assert res.verdict == INVALID


def _swap_reset_events(e):
    """processed == false  -->  processed == old(processed)."""
    if (isinstance(e, M.Binary) and e.op == "eq"
            and isinstance(e.left, M.FieldAcc) and e.left.name == "processed"
            and e.right == BoolLit(False)):
        return eq(e.left, Old(e.left))
    if isinstance(e, M.Quant):
        return M.Quant(e.kind, e.var, _swap_reset_events(e.dom),
                       _swap_reset_events(e.body))
    return M.map_children(e, _swap_reset_events)


# -- frame adequacy ------------------------------------------------------------------------


def test_frames_hold_on_concrete_steps(robot, robot_cfg):
    rng = random.Random(23)
    for _ in range(40):
        pre = random_state(robot, robot_cfg, rng)
        inst = rng.choice(list(robot_cfg.instances()))
        cls = robot_cfg.class_of[inst]
        phase = rng.choice(robot.scheduler.phases)
        pre.phase = phase
        post, _ = exec_local(robot, robot_cfg, pre, inst, phase, rng)
        post.executed[inst] = True
        frame = step_frame(robot, cls, phase, Var("OBJ"))
        ok = __import__("sra.simulator", fromlist=["evaluate"]).evaluate(
            frame, robot, robot_cfg, post, pre, {"OBJ": inst})
        assert ok is True


# -- finite-structure soundness spot check ---------------------------------------------------


def test_valid_single_state_tasks_hold_on_reachable_states(
        robot, robot_cfg, robot_inv, robot_prop, robot_gp):
    """Valid tasks have no finite counterexample: check the single-state ones
    against every state of a few concrete runs."""
    from sra.simulator import evaluate
    tasks = build_checks(robot, robot_inv, robot_prop, robot_gp)
    single_state = [t for t in tasks
                    if t.kind in ("Establishment", "PropertyImplication")]
    states = []
    for seed in range(3):
        res = run(robot, robot_cfg, Seeded(seed), RandomInputs(seed), cycles=2)
        states.extend(s.state for s in res.trace.steps)
    for t in single_state:
        for st in states:
            if not t.consts:
                assert evaluate(t.formula, robot, robot_cfg, st) is True
            else:
                (name, cls), = t.consts.items()
                for inst in robot_cfg.universes[cls]:
                    assert evaluate(t.formula, robot, robot_cfg, st,
                                    env={name: inst}) is True, (t.id, inst)


def test_report_shapes(robot):
    t1 = make_task(_ctx(robot), "a", "Probe", BoolLit(True), {})
    r = run_solver(t1, timeout=30)
    doc = report_json([r], [t1])
    assert doc["verdict"] == "proven"
    assert doc["totals"]["valid"] == 1
    text = report_text([r], [t1])
    assert "verdict: proven" in text

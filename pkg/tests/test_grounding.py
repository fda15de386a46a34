import itertools
import random

import pytest

from sra import model as M
from sra.frontend import load_configuration, load_invariant, load_model
from sra.grounding import (GroundingError, equivalence_lemmas, ground_formula,
                           ground_statements, plan, spec_suite)
from sra.model import (Binary, BoolLit, Configuration, FieldAcc, IfStmt,
                       IntLit, NullLit, Quant, Var)
from sra.simulator import RandomInputs, Seeded, evaluate, run
from sra.vcgen import INVALID, VALID, discharge, make_lemma_task, run_solver

from conftest import corpus_text


# -- plan -------------------------------------------------------------------------


def test_robot_plan_is_empty(robot):
    assert not plan(robot)


def test_robot_single_plan(single):
    pl = plan(single)
    assert set(pl.entries) == {("Controller", "leftSensors")}
    entry = pl.entries[("Controller", "leftSensors")]
    assert entry.ref_name == "leftSensor"
    assert entry.nullable is False


def test_upper_bound_gives_nullable_plan(hub):
    pl = plan(hub)
    entry = pl.entries[("Hub", "spokes")]
    assert entry.ref_name == "spoke"
    assert entry.nullable is True


def test_k_geq_2_is_skipped_with_note(robot):
    src = corpus_text("robot.sra").replace(
        "forall c in All_Controller :: |c.leftSensors| >= 1;",
        "forall c in All_Controller :: |c.leftSensors| == 2;")
    m = load_model(src, "k2")
    pl = plan(m)
    assert not pl.entries
    assert any("k <= 1" in s for s in pl.skipped)


# -- ground_formula ------------------------------------------------------------------


def left_exists(m):
    return load_invariant(
        "forall c in All_Controller :: (exists s in c.leftSensors :: s.obstacle)", m)


def test_exists_over_exact_singleton(single):
    pl = plan(single)
    g = ground_formula(left_exists(single), pl, single)
    assert M.expr_text(g) == \
        "forall c in All_Controller :: c.leftSensor.obstacle"


def test_exists_over_nullable_singleton(hub):
    pl = plan(hub)
    f = load_invariant("forall h in All_Hub :: (exists s in h.spokes :: s.poke)", hub)
    g = ground_formula(f, pl, hub)
    text = M.expr_text(g)
    assert "!(h.spoke == null)" in text and "h.spoke.poke" in text
    assert "&&" in text


def test_forall_over_nullable_guards_with_null(hub):
    pl = plan(hub)
    f = load_invariant("forall h in All_Hub :: (forall s in h.spokes :: s.poke)", hub)
    text = M.expr_text(ground_formula(f, pl, hub))
    assert "==>" in text and "h.spoke.poke" in text


def test_formula_without_grounded_sets_unchanged(single, robot_prop):
    pl = plan(single)
    f = load_invariant(
        "forall c in All_Controller :: (forall s in c.rightSensors :: !s.obstacle)",
        single)
    assert ground_formula(f, pl, single) == f


def test_cardinality_and_membership_atoms_rewrite(single):
    pl = plan(single)
    f = load_invariant("forall c in All_Controller :: |c.leftSensors| == 1", single)
    text = M.expr_text(ground_formula(f, pl, single))
    assert "leftSensors" not in text  # collapses to 1 == 1
    f2 = load_invariant(
        "forall c in All_Controller :: forall s in c.rightSensors :: "
        "!(s in c.leftSensors)", single)
    text2 = M.expr_text(ground_formula(f2, pl, single))
    assert "s == c.leftSensor" in text2


def test_semantics_preserved_by_enumeration(single, single_cfg):
    """The grounded formula agrees with the original on every global state of
    a unit-cardinality configuration (both quantifier polarities)."""
    pl = plan(single)
    forms = [
        left_exists(single),
        load_invariant(
            "forall c in All_Controller :: (forall s in c.leftSensors :: s.obstacle)",
            single),
    ]
    grounded_model = ground_statements(single, pl)
    for f in forms:
        g = ground_formula(f, pl, single)
        for vals in itertools.product([False, True], repeat=3):
            st = _state_with_obstacles(single, single_cfg, vals)
            assert (evaluate(f, single, single_cfg, st)
                    == evaluate(g, grounded_model, single_cfg, st))


def _state_with_obstacles(m, cfg, vals):
    from sra.simulator import init_state, Scripted
    keys = [("sL", "obstacle"), ("sR1", "obstacle"), ("sR2", "obstacle")]
    return init_state(m, cfg, Scripted({0: dict(zip(keys, vals))}))


def test_nullable_semantics_covers_empty_set(hub):
    """Enumerate 0- and 1-element interpretations of spokes: the grounded
    existential matches the original."""
    pl = plan(hub)
    f = load_invariant("forall h in All_Hub :: (exists s in h.spokes :: s.poke)", hub)
    g = ground_formula(f, pl, hub)
    grounded_model = ground_statements(hub, pl)
    for members in (frozenset(), frozenset({"k1"})):
        cfg = Configuration({"Hub": ("h1",), "Spoke": ("k1",)},
                            {("h1", "spokes"): members},
                            {("h1", "limit"): 1})
        for poke in (False, True):
            st = _hub_state(hub, cfg, poke)
            assert (evaluate(f, hub, cfg, st)
                    == evaluate(g, grounded_model, cfg, st))


def _hub_state(m, cfg, poke):
    from sra.simulator import init_state
    st = init_state(m, cfg, None)
    st.values[("k1", "poke")] = poke
    return st


# -- ground_statements ------------------------------------------------------------------


def test_quantified_assignment_becomes_guarded_single_assignment(hub):
    pl = plan(hub)
    g = ground_statements(hub, pl)
    ping = [t for t in g.class_map["Hub"].transitions if t.name == "ping"][0]
    stmts = M.seq_of(ping.effect)
    guarded = stmts[-1]
    assert isinstance(guarded, IfStmt)
    assert M.expr_text(guarded.cond) == "!(spoke == null)"
    assign = guarded.then
    assert isinstance(assign, M.Assign)
    assert assign.owner == M.SelfField("spoke")
    assert assign.field_name == "poke"


def test_exact_singleton_assignment_is_unguarded(single):
    src = corpus_text("robot_single.sra").replace(
        "{ direction := Right;\n      forall s in allSensors { s.processed := true; } }",
        "{ direction := Right;\n      forall s in leftSensors { s.processed := true; } }")
    m = load_model(src, "left-assign")
    pl = plan(m)
    g = ground_statements(m, pl)
    act = [t for t in g.class_map["Controller"].transitions
           if t.name == "actRight"][0]
    last = M.seq_of(act.effect)[-1]
    assert isinstance(last, M.Assign)
    assert last.owner == M.SelfField("leftSensor")


def test_empty_plan_keeps_model_identical(robot):
    from sra.grounding import GroundingPlan
    assert ground_statements(robot, GroundingPlan()) == robot


def test_grounded_model_round_trips(single, hub):
    for m in (single, hub):
        g = ground_statements(m, plan(m))
        assert load_model(M.model_text(g), "pp") == g


def test_ghost_sets_stay_in_constraints_only(single):
    g = ground_statements(single, plan(single))
    ctrl = g.class_map["Controller"]
    assert ctrl.set_map["leftSensors"].ghost
    # guards no longer mention the ghost set
    for t in ctrl.transitions:
        names = {s.name for s in M.free_symbols(t.guard, g, ctrl)}
        assert "leftSensors" not in names
    # constraints still do
    names = set()
    for c in g.constraints:
        names |= {s.name for s in M.free_symbols(c, g)}
    assert "leftSensors" in names


# -- runtime equivalence --------------------------------------------------------------------


def test_grounded_runs_trace_identical(single, single_cfg, hub, hub_cfg):
    for m, cfg, seeds in ((single, single_cfg, range(8)),
                          (hub, hub_cfg, range(8))):
        g = ground_statements(m, plan(m))
        for seed in seeds:
            r1 = run(m, cfg, Seeded(seed), RandomInputs(seed), cycles=3)
            r2 = run(g, cfg, Seeded(seed), RandomInputs(seed), cycles=3)
            assert len(r1.trace.steps) == len(r2.trace.steps)
            for a, b in zip(r1.trace.steps, r2.trace.steps):
                assert a.label == b.label
                assert a.state.key() == b.state.key()


# -- equivalence lemmas ------------------------------------------------------------------------


def test_lemma_completeness(single, robot_inv):
    """Every generated spec that mentions a grounded field has a lemma."""
    pl = plan(single)
    grounded = ground_statements(single, pl)
    inv = load_invariant(corpus_text("robot.srainv"), single)
    prop = load_invariant(corpus_text("robot_prop.srainv"), single)
    specs = spec_suite(single, grounded, inv, prop)
    names = {name for name, _, _, _ in specs}
    tasks = equivalence_lemmas(single, pl, specs)
    task_specs = {t.meta["spec"] for t in tasks}
    assert names == task_specs
    mentioning = {name for name, orig, _, _ in specs
                  if "leftSensors" in M.expr_text(orig)}
    assert {"exec_Controller_Act", "invariant", "property"} <= mentioning
    assert mentioning <= task_specs


def test_trivial_lemma_for_ungrounded_spec(single, solver_jobs):
    pl = plan(single)
    grounded = ground_statements(single, pl)
    specs = [("sched", single.scheduler.transitions[0].guard,
              grounded.scheduler.transitions[0].guard, {})]
    tasks = equivalence_lemmas(single, pl, specs)
    res = run_solver(tasks[0], timeout=30)
    assert res.verdict == VALID


def test_property_lemma_valid_and_mutation_invalid(hub, solver_jobs):
    """The nullable grounding of an existential is valid; dropping the null
    guard is refuted."""
    pl = plan(hub)
    f = load_invariant("forall h in All_Hub :: (exists s in h.spokes :: s.poke)", hub)
    good = ground_formula(f, pl, hub)
    tasks = equivalence_lemmas(hub, pl, specs=[("probe", f, good, {})])
    assert run_solver(tasks[0], timeout=30).verdict == VALID

    # mutation: claim the existential equals the unguarded field read
    bad = load_invariant_grounded(hub, pl)
    tasks = equivalence_lemmas(hub, pl, specs=[("bad", f, bad, {})])
    assert run_solver(tasks[0], timeout=30).verdict == INVALID


def load_invariant_grounded(hub, pl):
    g = ground_statements(hub, pl)
    from sra.frontend import resolve_formula
    from sra.frontend.parser import parse_expr_text
    e, _ = parse_expr_text("forall h in All_Hub :: h.spoke.poke")
    resolved, diags = resolve_formula(e, g)
    assert resolved is not None, diags
    return resolved

import random

import pytest
from hypothesis import given, settings, strategies as st

from sra import model as M
from sra.frontend import load_model
from sra.model import SymbolRef, free_symbols, write_footprint
from sra.oracles import EFFECT_HOST, random_effect_source
from sra.simulator import Seeded, RandomInputs, run

from conftest import corpus_text


def refs(symbols):
    return {(s.kind, s.cls, s.name, s.pre) for s in symbols}


def test_free_symbols_constant_true(robot):
    assert free_symbols(M.BoolLit(True), robot) == frozenset()


def test_free_symbols_sense_no_go_guard(robot):
    sensor = robot.class_map["Sensor"]
    t = [t for t in sensor.transitions if t.name == "senseNoGo"][0]
    syms = free_symbols(t.guard, robot, sensor)
    assert refs(syms) == {("field", "Sensor", "obstacle", False)}


def test_free_symbols_quantified(robot):
    ctrl = robot.class_map["Controller"]
    guard = [t for t in ctrl.transitions if t.name == "actRight"][0].guard
    syms = free_symbols(guard, robot, ctrl)
    # independent oracle: a plain syntactic walk collecting member accesses
    expected = set()

    def walk(e, env):
        if isinstance(e, M.SelfField):
            kind = "set" if e.name in ctrl.set_map else "field"
            expected.add((kind, "Controller", e.name, False))
        elif isinstance(e, M.FieldAcc):
            expected.add(("field", env[e.obj.name], e.name, False))
        elif isinstance(e, M.Quant):
            walk(e.dom, env)
            dom_elem = ctrl.set_map[e.dom.name].elem
            walk(e.body, {**env, e.var: dom_elem})
        elif isinstance(e, (M.Binary,)):
            walk(e.left, env)
            walk(e.right, env)
        elif isinstance(e, M.Not):
            walk(e.arg, env)

    walk(guard, {})
    assert ("set", "Controller", "rightSensors", False) in refs(syms)
    assert ("field", "Sensor", "location", False) in refs(syms)
    assert refs(syms) == expected


def test_free_symbols_old_tagging(robot):
    sensor = robot.class_map["Sensor"]
    e = M.Old(M.SelfField("obstacle"))
    assert refs(free_symbols(e, robot, sensor)) == {
        ("field", "Sensor", "obstacle", True)}


def test_free_symbols_monotone_under_subterms(robot, robot_inv):
    whole = free_symbols(robot_inv, robot)

    def subterms(e):
        yield e
        collected = []
        M.map_children(e, lambda s: (collected.append(s), s)[1])
        if isinstance(e, M.Quant):
            collected = [e.dom, e.body]
        for s in collected:
            yield from subterms(s)

    # bound-variable field accesses lose their class tag out of context, so
    # compare on names only
    names = {s.name for s in whole if s.name}
    for sub in subterms(robot_inv):
        for sym in free_symbols(sub, robot):
            if sym.name:
                assert sym.name in names


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_free_symbols_monotone_on_random_effects(seed):
    rng = random.Random(seed)
    host = load_model(EFFECT_HOST % random_effect_source(rng, 3), "<host>")
    cls = host.class_map["T"]
    guard_syms = free_symbols(cls.transitions[0].guard, host, cls)
    for s in M.stmt_iter(cls.transitions[0].effect):
        if isinstance(s, M.Assign):
            sub = free_symbols(s.value, host, cls)
            whole = free_symbols(
                M.Binary("and", M.BoolLit(True), M.eq(s.value, s.value)),
                host, cls)
            assert sub <= whole | guard_syms | sub


def test_write_footprint_sensor_sense(robot):
    assert write_footprint(robot, "Sensor", "Sense") == {
        ("Sensor", "location"), ("Sensor", "executed")}


def test_write_footprint_controller_act(robot):
    assert write_footprint(robot, "Controller", "Act") == {
        ("Controller", "location"), ("Controller", "direction"),
        ("Controller", "executed"), ("Sensor", "processed")}


def test_write_footprint_controller_sense_trivial(robot):
    assert write_footprint(robot, "Controller", "Sense") == {
        ("Controller", "executed")}


def test_footprint_overapproximates_concrete_steps(robot, robot_cfg):
    res = run(robot, robot_cfg, Seeded(3), RandomInputs(3), cycles=2)
    footprints = {(c.name, p): write_footprint(robot, c.name, p)
                  for c in robot.classes for p in robot.scheduler.phases}
    steps = res.trace.steps
    for before, after in zip(steps, steps[1:]):
        if after.label["kind"] != "self-loop":
            continue
        phase = after.label["phase"]
        changed = {
            (robot_cfg.class_of[inst], f)
            for (inst, f), v in after.state.values.items()
            if before.state.values[(inst, f)] != v}
        allowed = set()
        for c in robot.classes:
            allowed |= footprints[(c.name, phase)]
        assert changed <= allowed, (phase, changed - allowed)


def test_round_trip_all_corpus_models():
    for name in ("robot", "robot_single", "robot_mutant", "hub"):
        m = load_model(corpus_text(f"{name}.sra"), name)
        again = load_model(M.model_text(m), f"{name}-pp")
        assert m == again


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**9))
def test_round_trip_random_effect_hosts(seed):
    rng = random.Random(seed)
    m = load_model(EFFECT_HOST % random_effect_source(rng, 4), "<host>")
    assert m == load_model(M.model_text(m), "<host-pp>")

import pytest

from sra import model as M
from sra.frontend import (DiagnosticError, check_model, load_configuration,
                          load_invariant, load_model, parse_configuration,
                          parse_gprime, parse_invariant, parse_model)
from sra.model import free_symbols
from sra.simulator import evaluate

from conftest import corpus_text


def error_codes(diags):
    return {d.code for d in diags if d.severity == "error"}


def check_source(src, name="<test>"):
    parsed, diags = parse_model(src, name)
    if parsed is None:
        return None, diags
    resolved, cdiags = check_model(parsed)
    return resolved, diags + cdiags


# -- parse_model ---------------------------------------------------------------


def test_parse_robot_shape(robot):
    assert {c.name for c in robot.classes} == {"Sensor", "Controller"}
    assert robot.scheduler.phases == ("Sense", "Act", "Reset", "End")
    assert len(robot.scheduler.transitions) == 6
    assert len(robot.constraints) == 5


def test_empty_file_is_an_error():
    parsed, diags = parse_model("", "<empty>")
    assert parsed is None
    assert error_codes(diags) == {"no-classes"}
    assert all(d.span is not None for d in diags)


def test_location_assignment_rejected():
    src = corpus_text("mutants/loc_assigned.sra")
    _, diags = check_source(src)
    assert "loc-assigned" in error_codes(diags)


def test_syntax_error_has_span():
    parsed, diags = parse_model("class C {", "<bad>")
    assert parsed is None
    assert diags[0].code == "syntax" and diags[0].span is not None


# -- check_model ---------------------------------------------------------------


def test_check_accepts_all_corpus_models():
    for name in ("robot", "robot_single", "robot_mutant", "hub"):
        m, diags = check_source(corpus_text(f"{name}.sra"), name)
        assert m is not None, diags


def test_input_assignment_rejected():
    _, diags = check_source(corpus_text("mutants/input_assigned.sra"))
    assert "input-assigned" in error_codes(diags)


def test_event_false_rejected():
    _, diags = check_source(corpus_text("mutants/event_false.sra"))
    assert "event-false" in error_codes(diags)


def test_every_mutant_rejected_with_its_code(mutants_manifest):
    assert len(mutants_manifest) >= 10
    for fname, want in mutants_manifest.items():
        _, diags = check_source(corpus_text(f"mutants/{fname}"), fname)
        assert want in error_codes(diags), (fname, error_codes(diags))


def test_diagnostics_are_not_fail_fast():
    src = corpus_text("mutants/input_assigned.sra").replace(
        "{ inp := false; }", "{ inp := false; ev := false; }")
    _, diags = check_source(src)
    assert {"input-assigned", "event-false"} <= error_codes(diags)


def test_redundant_executed_declaration_is_dropped(robot):
    # the corpus models declare `var executed : Bool`; the checked model
    # carries only the built-in flag
    assert "executed" not in robot.class_map["Sensor"].field_map


# -- parse_invariant -----------------------------------------------------------


def test_prop_parses_with_expected_symbols(robot, robot_prop):
    names = {s.name for s in free_symbols(robot_prop, robot) if s.name}
    classes = {s.cls for s in free_symbols(robot_prop, robot) if s.kind == "all"}
    assert {"leftSensors", "obstacle", "direction"} <= names
    assert "Controller" in classes


def test_trivial_invariant(robot):
    e, diags = parse_invariant("true", robot)
    assert e == M.BoolLit(True) and not error_codes(diags)


def test_old_rejected_in_invariants(robot):
    e, diags = parse_invariant("forall c in All_Controller :: old(c.direction) == c.direction", robot)
    assert e is None
    assert "old-in-invariant" in error_codes(diags)


def test_invariant_unknown_symbol(robot):
    e, diags = parse_invariant("forall c in All_Controller :: c.speed == 1", robot)
    assert e is None
    assert error_codes(diags)


# -- parse_configuration -------------------------------------------------------


def test_configuration_satisfies_all_gammas(robot):
    cfg, diags, report = parse_configuration(corpus_text("robot.sracfg"), robot)
    assert cfg is not None and not error_codes(diags)
    assert [ok for _, ok in report] == [True] * 5
    assert cfg.universes["Sensor"] == ("sL", "sR1", "sR2")


def test_empty_left_sensors_fails_gamma3(robot):
    src = corpus_text("robot.sracfg").replace(
        "c1.leftSensors  = { sL };", "c1.leftSensors  = { };")
    cfg, diags, report = parse_configuration(src, robot)
    assert cfg is not None
    flags = [ok for _, ok in report]
    assert flags[2] is False  # |leftSensors| >= 1
    assert flags[4] is False  # union no longer covers allSensors


def test_overlapping_sides_fail_gamma1(robot):
    src = corpus_text("robot.sracfg").replace(
        "c1.rightSensors = { sR1, sR2 };", "c1.rightSensors = { sL, sR1, sR2 };")
    cfg, diags, report = parse_configuration(src, robot)
    assert cfg is not None
    assert report[0][1] is False  # disjointness


def test_gamma_report_agrees_with_evaluator(robot, robot_cfg):
    for g in robot.constraints:
        assert evaluate(g, robot, robot_cfg, None) is True


def test_configuration_errors(robot):
    base = corpus_text("robot.sracfg")
    _, diags, _ = parse_configuration(base.replace("Controller", "Ctrl"), robot)
    assert "unknown-class" in error_codes(diags)
    _, diags, _ = parse_configuration(
        base.replace("Sensor : sL, sR1, sR2;", "Sensor : sL, sL, sR2;"), robot)
    assert "dup-decl" in error_codes(diags)
    _, diags, _ = parse_configuration(
        base.replace("c1.leftSensors  = { sL };", "c1.leftSensors  = { c1 };"),
        robot)
    assert "wrong-class" in error_codes(diags)


def test_missing_param_rejected(hub):
    src = corpus_text("hub.sracfg").replace("h1.limit = 2;", "")
    _, diags, _ = parse_configuration(src, hub)
    assert "missing-param" in error_codes(diags)


# -- g' files -------------------------------------------------------------------


def test_gprime_parses(robot):
    gp, diags = parse_gprime(corpus_text("robot.gprime"), robot)
    assert not error_codes(diags)
    assert gp[("Act", None)] == M.BoolLit(True)


def test_gprime_default_is_not_executed(robot):
    from sra.frontend import gprime_for
    e = gprime_for(None, "Sense", "Sensor")
    assert e == M.Not(M.SelfField("executed"))


# -- round trip ------------------------------------------------------------------


def test_pretty_print_reparse_identity(robot, hub, single, mutant):
    for m in (robot, hub, single, mutant):
        assert load_model(M.model_text(m), "pp") == m

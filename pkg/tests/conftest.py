from __future__ import annotations

import json
from pathlib import Path

import pytest

from sra.frontend import (load_configuration, load_gprime, load_invariant,
                          load_model)
from sra.simulator import FixedOrder, Scripted

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


@pytest.fixture(scope="session")
def robot():
    return load_model(corpus_text("robot.sra"), "robot.sra")


@pytest.fixture(scope="session")
def robot_cfg(robot):
    cfg, report = load_configuration(corpus_text("robot.sracfg"), robot)
    assert all(ok for _, ok in report)
    return cfg


@pytest.fixture(scope="session")
def robot_inv(robot):
    return load_invariant(corpus_text("robot.srainv"), robot)


@pytest.fixture(scope="session")
def robot_prop(robot):
    return load_invariant(corpus_text("robot_prop.srainv"), robot)


@pytest.fixture(scope="session")
def robot_gp(robot):
    return load_gprime(corpus_text("robot.gprime"), robot)


@pytest.fixture(scope="session")
def mutant():
    return load_model(corpus_text("robot_mutant.sra"), "robot_mutant.sra")


@pytest.fixture(scope="session")
def hub():
    return load_model(corpus_text("hub.sra"), "hub.sra")


@pytest.fixture(scope="session")
def hub_cfg(hub):
    cfg, _ = load_configuration(corpus_text("hub.sracfg"), hub)
    return cfg


@pytest.fixture(scope="session")
def single():
    return load_model(corpus_text("robot_single.sra"), "robot_single.sra")


@pytest.fixture(scope="session")
def single_cfg(single):
    cfg, report = load_configuration(corpus_text("robot_single.sracfg"), single)
    assert all(ok for _, ok in report)
    return cfg


@pytest.fixture(scope="session")
def mutants_manifest():
    return json.loads(corpus_text("mutants/manifest.json"))


@pytest.fixture(scope="session")
def scenario_inputs():
    # left sensor sees the obstacle, both right sensors are clear
    return Scripted({0: {("sL", "obstacle"): True,
                         ("sR1", "obstacle"): False,
                         ("sR2", "obstacle"): False}})


def fixed_order(robot, order):
    return FixedOrder({p: tuple(order) for p in robot.scheduler.phases})


@pytest.fixture(scope="session")
def good_order(robot):
    # controller before the sensors: events are consumed in one Act sweep
    return fixed_order(robot, ("c1", "sL", "sR1", "sR2"))


@pytest.fixture(scope="session")
def reversed_order(robot):
    # sensors before the controller: events persist into a second Act sweep
    return fixed_order(robot, ("sL", "sR1", "sR2", "c1"))


@pytest.fixture(scope="session")
def solver_jobs():
    return 6

"""Toolchain for configurable scheduler-restricted asynchronous systems:
parsing and static checking, simulation, automatic local-contract generation,
SMT-backed compositional verification, and quantifier grounding."""

__version__ = "0.1.0"

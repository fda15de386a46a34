"""Verification-condition generation and discharge: SMT-LIB encoding of the
model signature, the global entailment checks, the local contract
obligations, the external solver driver, and report aggregation."""

from .checks import (TwoStateContext, VerificationTask, build_checks,
                     build_local_contract_tasks, make_lemma_task, make_task)
from .smt import Encoder, EncodingError, sanitize
from .solver import (DEFAULT_TIMEOUT, INVALID, TIMEOUT, UNKNOWN, VALID,
                     SolverNotFound, VcResult, bundled_wrapper,
                     default_solver_command, discharge, run_solver,
                     write_tasks)
from .report import (INCONCLUSIVE, PROVEN, REFUTED, overall_verdict,
                     render_figures, report_json, report_text, write_report)

__all__ = [
    "TwoStateContext", "VerificationTask", "build_checks",
    "build_local_contract_tasks", "make_lemma_task", "make_task",
    "Encoder", "EncodingError", "sanitize",
    "DEFAULT_TIMEOUT", "INVALID", "TIMEOUT", "UNKNOWN", "VALID",
    "SolverNotFound", "VcResult", "bundled_wrapper", "default_solver_command",
    "discharge", "run_solver", "write_tasks",
    "INCONCLUSIVE", "PROVEN", "REFUTED", "overall_verdict", "render_figures",
    "report_json", "report_text", "write_report",
]

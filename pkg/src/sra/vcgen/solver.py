"""External SMT solver driver: feeds each task's SMT-LIB text to a solver
subprocess on stdin, interprets sat/unsat/unknown, and collects wall time,
counter-model summaries, and the solver's step statistic when reported."""

from __future__ import annotations

import os
import re
import shlex
import shutil
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..model import SraError
from .checks import VerificationTask

DEFAULT_TIMEOUT = 60.0

VALID = "valid"
INVALID = "invalid"
UNKNOWN = "unknown"
TIMEOUT = "timeout"


class SolverNotFound(SraError):
    pass


@dataclass
class VcResult:
    task_id: str
    verdict: str
    wall_time: float
    solver: str
    model_summary: Optional[dict] = None
    steps: Optional[int] = None  # solver resource/step count when reported
    detail: str = ""

    def to_json(self) -> dict:
        return {"task": self.task_id, "verdict": self.verdict,
                "wall_time": round(self.wall_time, 3), "solver": self.solver,
                "steps": self.steps, "model": self.model_summary,
                "detail": self.detail[:2000]}


def bundled_wrapper() -> Optional[str]:
    """The repository-local z3-on-wasm pipe, when its npm module is present."""
    here = Path(__file__).resolve()
    for root in [Path.cwd()] + list(here.parents):
        script = root / "tools" / "solver" / "z3pipe.js"
        if script.exists() and (root / "tools" / "solver" / "node_modules"
                                / "z3-solver").exists():
            if shutil.which("node"):
                return f"node {script}"
    return None


def default_solver_command() -> str:
    env = os.environ.get("SRA_SMT_CMD")
    if env:
        return env
    if shutil.which("z3"):
        return "z3 -in"
    if shutil.which("cvc5"):
        return "cvc5 --lang smt2"
    wrapper = bundled_wrapper()
    if wrapper:
        return wrapper
    raise SolverNotFound(
        "no SMT solver found: set SRA_SMT_CMD / --solver, install z3 or cvc5, "
        "or run `npm install` in tools/solver for the bundled wrapper")


_UNIVERSE = re.compile(r";;\s*universe for (\w+):\s*\n\s*;;\s*([^\n]*)")
_RLIMIT = re.compile(r":rlimit-count\s+(\d+)")


def _summarize_model(text: str) -> dict:
    sizes = {}
    for sort, vals in _UNIVERSE.findall(text):
        sizes[sort] = len(vals.split())
    return {"universes": sizes, "raw": text.strip()[:4000]}


def run_solver(task: VerificationTask, command: Optional[str] = None,
               timeout: float = DEFAULT_TIMEOUT, want_model: bool = True,
               want_stats: bool = True) -> VcResult:
    cmd = command or default_solver_command()
    payload = task.smt_text
    if want_model:
        payload += "(get-model)\n"
    if want_stats:
        payload += "(get-info :all-statistics)\n"
    start = time.monotonic()
    try:
        proc = subprocess.run(shlex.split(cmd), input=payload,
                              capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return VcResult(task.id, TIMEOUT, time.monotonic() - start, cmd)
    except OSError as exc:
        return VcResult(task.id, UNKNOWN, time.monotonic() - start, cmd,
                        detail=f"solver failed to start: {exc}")
    wall = time.monotonic() - start
    verdict, rest = _parse_output(proc.stdout)
    steps = None
    mm = _RLIMIT.search(proc.stdout)
    if mm:
        steps = int(mm.group(1))
    if verdict is None:
        return VcResult(task.id, UNKNOWN, wall, cmd,
                        detail=(proc.stderr or proc.stdout)[:2000])
    if verdict == "unsat":
        return VcResult(task.id, VALID, wall, cmd, steps=steps)
    if verdict == "sat":
        summary = _summarize_model(rest) if want_model else None
        return VcResult(task.id, INVALID, wall, cmd, model_summary=summary,
                        steps=steps)
    return VcResult(task.id, UNKNOWN, wall, cmd, steps=steps,
                    detail=rest[:2000])


def _parse_output(stdout: str) -> tuple[Optional[str], str]:
    lines = stdout.splitlines()
    for i, line in enumerate(lines):
        word = line.strip()
        if word in ("sat", "unsat", "unknown"):
            return word, "\n".join(lines[i + 1:])
    return None, stdout


def discharge(tasks: list[VerificationTask], command: Optional[str] = None,
              timeout: float = DEFAULT_TIMEOUT, jobs: int = 1,
              want_model: bool = True) -> list[VcResult]:
    """Tasks are independent; run up to `jobs` solver processes in parallel
    and merge results back into task order."""
    cmd = command or default_solver_command()
    if jobs <= 1:
        return [run_solver(t, cmd, timeout, want_model) for t in tasks]
    results: dict[str, VcResult] = {}
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futs = {pool.submit(run_solver, t, cmd, timeout, want_model): t
                for t in tasks}
        for fut, t in futs.items():
            results[t.id] = fut.result()
    return [results[t.id] for t in tasks]


def write_tasks(tasks: list[VerificationTask], outdir: str) -> list[str]:
    """One SMT-LIB file per task under the output directory."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in tasks:
        p = out / t.filename()
        p.write_text(t.smt_text)
        paths.append(str(p))
    return paths

"""Verdict aggregation into a verification report: human text, JSON, and
optional rendered figures next to the machine-readable output."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .checks import VerificationTask
from .solver import INVALID, TIMEOUT, UNKNOWN, VALID, VcResult

PROVEN = "proven"
REFUTED = "refuted-obligation"
INCONCLUSIVE = "inconclusive"


def overall_verdict(results: list[VcResult]) -> str:
    if any(r.verdict == INVALID for r in results):
        return REFUTED
    if any(r.verdict in (UNKNOWN, TIMEOUT) for r in results):
        return INCONCLUSIVE
    return PROVEN


def report_json(results: list[VcResult],
                tasks: Optional[list[VerificationTask]] = None) -> dict:
    total_steps = sum(r.steps for r in results if r.steps is not None)
    by_id = {t.id: t for t in (tasks or [])}
    return {
        "verdict": overall_verdict(results),
        "tasks": [dict(r.to_json(), kind=by_id[r.task_id].kind)
                  if r.task_id in by_id else r.to_json() for r in results],
        "totals": {
            "count": len(results),
            "valid": sum(r.verdict == VALID for r in results),
            "invalid": sum(r.verdict == INVALID for r in results),
            "inconclusive": sum(r.verdict in (UNKNOWN, TIMEOUT)
                                for r in results),
            "wall_time": round(sum(r.wall_time for r in results), 3),
            "solver_steps": total_steps or None,
        },
    }


def report_text(results: list[VcResult],
                tasks: Optional[list[VerificationTask]] = None) -> str:
    lines = []
    width = max((len(r.task_id) for r in results), default=10)
    for r in results:
        mark = {VALID: "valid  ", INVALID: "INVALID", TIMEOUT: "timeout",
                UNKNOWN: "unknown"}[r.verdict]
        steps = f" steps={r.steps}" if r.steps is not None else ""
        lines.append(f"  {r.task_id:<{width}}  {mark}  "
                     f"{r.wall_time:7.2f}s{steps}")
        if r.verdict == INVALID and r.model_summary:
            sizes = r.model_summary.get("universes") or {}
            if sizes:
                pretty = ", ".join(f"{k}:{v}" for k, v in sorted(sizes.items()))
                lines.append(f"  {'':<{width}}  counter-model universes "
                             f"({pretty}); replay the configuration in the "
                             f"simulator")
    verdict = overall_verdict(results)
    total = sum(r.wall_time for r in results)
    steps = sum(r.steps for r in results if r.steps is not None)
    note = ""
    if verdict == REFUTED:
        note = ("  (an invalid obligation refutes the proof attempt, not "
                "necessarily the system: the invariant may be too weak)")
    lines.append(f"verdict: {verdict}{note}")
    lines.append(f"totals: {len(results)} tasks, {total:.2f}s wall time"
                 + (f", {steps} solver steps" if steps else ""))
    return "\n".join(lines)


def render_figures(results: list[VcResult], outdir: str,
                   stem: str = "verification") -> list[str]:
    """Wall-time/verdict charts written alongside the report files."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths: list[str] = []

    colors = {VALID: "#3a7d44", INVALID: "#b23a48",
              TIMEOUT: "#c98a1b", UNKNOWN: "#888888"}
    names = [r.task_id for r in results]
    times = [r.wall_time for r in results]
    cols = [colors[r.verdict] for r in results]
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.28 * len(results))))
    ax.barh(range(len(results)), times, color=cols)
    ax.set_yticks(range(len(results)))
    ax.set_yticklabels(names, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("wall time (s)")
    ax.set_title(f"verification tasks ({overall_verdict(results)})")
    fig.tight_layout()
    p = out / f"{stem}_times.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    paths.append(str(p))

    counts = {}
    for r in results:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    fig, ax = plt.subplots(figsize=(4, 3))
    keys = sorted(counts)
    ax.bar(keys, [counts[k] for k in keys],
           color=[colors[k] for k in keys])
    ax.set_ylabel("tasks")
    ax.set_title("verdict summary")
    fig.tight_layout()
    p = out / f"{stem}_verdicts.png"
    fig.savefig(p, dpi=130)
    plt.close(fig)
    paths.append(str(p))
    return paths


def write_report(results: list[VcResult], outdir: Optional[str],
                 tasks: Optional[list[VerificationTask]] = None,
                 figures: bool = False, stem: str = "verification") -> dict:
    doc = report_json(results, tasks)
    if outdir:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}_report.json").write_text(json.dumps(doc, indent=2))
        if figures:
            doc["figures"] = render_figures(results, outdir, stem)
    return doc

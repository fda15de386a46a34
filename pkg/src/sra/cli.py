"""Command-line entry point: check, simulate, contracts, ground,
verify-local, verify-global, oracle.

Exit codes: 0 success/proven, 1 property violation or invalid obligation,
2 usage or internal error, 3 inconclusive (timeout/unknown)."""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path
from typing import Optional

from . import model as M
from .contracts import all_contracts, contract_text
from .frontend import (DiagnosticError, check_model, load_configuration,
                       load_gprime, load_invariant, load_model, parse_model,
                       raise_on_error)
from .grounding import equivalence_lemmas, ground_statements, plan
from .model import SraError
from .oracles import (OracleError, RandomModelConfig, bounded_reachability_check,
                      contract_vs_simulator, effect_host_model,
                      effect_transform_oracle, random_configuration,
                      random_effect_source)
from .simulator import (Exhaustive, FixedOrder, RandomInputs, Scripted, Seeded,
                        SimulationError, evaluate, run)
from .vcgen import (Encoder, build_checks, build_local_contract_tasks,
                    discharge, overall_verdict, report_json, report_text,
                    sanitize, write_report, write_tasks)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2
EXIT_INCONCLUSIVE = 3


def _read(path: str) -> str:
    return Path(path).read_text()


def _load_model(path: str):
    return load_model(_read(path), path)


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(text)


def _verify_exit(verdict: str) -> int:
    return {"proven": EXIT_OK, "refuted-obligation": EXIT_VIOLATION,
            "inconclusive": EXIT_INCONCLUSIVE}[verdict]


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    source = _read(args.model)
    parsed, diags = parse_model(source, args.model)
    if parsed is not None:
        _, cdiags = check_model(parsed)
        diags = diags + cdiags
    errors = [d for d in diags if d.severity == "error"]
    payload = {"ok": not errors,
               "diagnostics": [{"severity": d.severity, "code": d.code,
                                "message": d.message,
                                "span": str(d.span) if d.span else None}
                               for d in diags]}
    text = "\n".join(str(d) for d in diags) or "ok"
    _emit(args, payload, text)
    return EXIT_OK if not errors else EXIT_ERROR


def _order_policy(args, m):
    if args.order:
        kind, _, rest = args.order.partition(":")
        if kind == "seeded":
            return Seeded(int(rest or 0))
        if kind == "fixed":
            orders = json.loads(_read(rest))
            return FixedOrder({p: tuple(v) for p, v in orders.items()})
        raise SraError(f"unknown order policy {args.order}")
    return Seeded(args.seed)


def _input_provider(args):
    if args.inputs:
        raw = json.loads(_read(args.inputs))
        per_cycle = {}
        for cycle, assigns in raw.items():
            entry = {}
            for key, value in assigns.items():
                inst, _, fieldname = key.partition(".")
                entry[(inst, fieldname)] = value
            per_cycle[int(cycle)] = entry
        return Scripted(per_cycle)
    return RandomInputs(args.seed)


def cmd_simulate(args) -> int:
    m = _load_model(args.model)
    cfg, gamma = load_configuration(_read(args.config), m, args.config)
    bad = [t for t, ok in gamma if not ok]
    if bad:
        print(f"configuration violates constraints: {'; '.join(bad)}",
              file=sys.stderr)
        return EXIT_ERROR
    monitors = [load_invariant(_read(p), m, p) for p in (args.monitor or [])]
    result = run(m, cfg, _order_policy(args, m), _input_provider(args),
                 args.cycles, monitors)
    trace_text = result.trace.to_jsonl(m, cfg)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(trace_text)
    else:
        sys.stdout.write(trace_text)
    if args.json:
        print(json.dumps({"verdict": result.verdict,
                          "steps": len(result.trace.steps)}))
    else:
        print(f"verdict: {result.verdict['status']}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_contracts(args) -> int:
    m = _load_model(args.model)
    contracts = all_contracts(m)
    text = "\n\n".join(contract_text(c) for c in contracts)
    smt_lines: list[str] = []
    enc = Encoder(m, args.card_bound)
    smt_lines.extend(enc.preamble())
    for c in contracts:
        name = sanitize(c.label().replace("(", "_").replace(")", "")
                        .replace(", ", "_").replace(",", "_"))
        body = enc.encode(M.subst_self(c.formula, M.Var("self")),
                          enc.env({"self": c.cls}))
        smt_lines.append(f"(define-fun {name} ((self {enc.sort(c.cls)})) "
                         f"Bool {body})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "contracts.txt").write_text(text + "\n")
        (out / "contracts.smt2").write_text("\n".join(smt_lines) + "\n")
        print(f"wrote {out}/contracts.txt and {out}/contracts.smt2")
    else:
        print(text)
    if args.json:
        print(json.dumps({"contracts": [c.label() for c in contracts]}))
    return EXIT_OK


def cmd_ground(args) -> int:
    m = _load_model(args.model)
    pl = plan(m)
    for note in pl.skipped:
        print(f"note: not grounded: {note}", file=sys.stderr)
    grounded = ground_statements(m, pl)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.model).stem
    gpath = outdir / f"{stem}_grounded.sra"
    gpath.write_text(M.model_text(grounded))
    inv = load_invariant(_read(args.invariant), m, args.invariant) \
        if args.invariant else None
    prop = load_invariant(_read(args.property), m, args.property) \
        if args.property else None
    tasks = equivalence_lemmas(m, pl, inv=inv, prop=prop,
                               card_bound=args.card_bound)
    write_tasks(tasks, str(outdir))
    print(f"wrote {gpath} and {len(tasks)} equivalence lemma tasks")
    if not args.check:
        return EXIT_OK
    results = discharge(tasks, args.solver, args.timeout, args.jobs)
    doc = write_report(results, str(outdir), tasks, figures=bool(args.figures),
                       stem="lemmas")
    _emit(args, doc, report_text(results, tasks))
    return _verify_exit(overall_verdict(results))


def cmd_verify_local(args) -> int:
    m = _load_model(args.model)
    tasks = build_local_contract_tasks(m, args.card_bound)
    if args.out:
        write_tasks(tasks, args.out)
    results = discharge(tasks, args.solver, args.timeout, args.jobs)
    doc = write_report(results, args.out, tasks, figures=bool(args.figures),
                       stem="local")
    _emit(args, doc, report_text(results, tasks))
    return _verify_exit(overall_verdict(results))


def cmd_verify_global(args) -> int:
    if args.config and args.config != "none":
        print("verify-global is parameterized over all configurations "
              "satisfying the constraints; pass --config none (or omit it)",
              file=sys.stderr)
        return EXIT_ERROR
    m = _load_model(args.model)
    inv = load_invariant(_read(args.invariant), m, args.invariant)
    prop = load_invariant(_read(args.property), m, args.property)
    gp = load_gprime(_read(args.gprime), m, args.gprime) if args.gprime else None
    tasks = build_checks(m, inv, prop, gp, args.card_bound,
                         prop_phase=args.property_phase)
    if args.out:
        write_tasks(tasks, args.out)
    results = discharge(tasks, args.solver, args.timeout, args.jobs)
    doc = write_report(results, args.out, tasks, figures=bool(args.figures),
                       stem="global")
    _emit(args, doc, report_text(results, tasks))
    return _verify_exit(overall_verdict(results))


def cmd_oracle(args) -> int:
    m = _load_model(args.model) if args.model else None
    report: dict
    if args.kind == "contracts":
        assert m is not None
        report = contract_vs_simulator(m, args.samples, args.seed)
        ok = report["status"] == "pass"
    elif args.kind == "reachability":
        assert m is not None
        inv = load_invariant(_read(args.invariant), m, args.invariant) \
            if args.invariant else None
        prop = load_invariant(_read(args.property), m, args.property) \
            if args.property else None
        opts = RandomModelConfig(seed=args.seed, max_per_class=4, total_cap=6)
        runs = []
        ok = True
        for i in range(args.configs):
            rng = random.Random(args.seed * 1_000_003 + i)
            cfg = random_configuration(m, rng, opts)
            rep = bounded_reachability_check(m, cfg, inv, prop, args.cycles)
            runs.append({"config": {c: len(u) for c, u in cfg.universes.items()},
                         **rep.to_json()})
            ok = ok and rep.status == "ok"
        report = {"kind": "reachability", "runs": runs,
                  "status": "pass" if ok else "fail"}
    elif args.kind == "effects":
        failures = []
        rng = random.Random(args.seed)
        for i in range(args.samples):
            src = random_effect_source(rng, depth=4)
            host = effect_host_model(src)
            cfg = random_configuration(host, rng)
            effect = host.class_map["T"].transitions[0].effect
            bad = effect_transform_oracle(effect, host.class_map["T"], host,
                                          cfg, args.pre_states, rng)
            if bad:
                failures.append({"effect": src, "mismatches": bad[:3]})
                if len(failures) >= 5:
                    break
        report = {"kind": "effects", "effects": args.samples,
                  "pre_states": args.pre_states, "failures": failures,
                  "status": "pass" if not failures else "fail"}
        ok = not failures
    else:
        raise SraError(f"unknown oracle kind {args.kind}")
    print(json.dumps(report, indent=2))
    return EXIT_OK if ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# argument plumbing


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", help="solver command reading SMT-LIB on stdin "
                   "(default: $SRA_SMT_CMD, z3, cvc5, or the bundled wrapper)")
    p.add_argument("--timeout", type=float, default=60.0,
                   help="per-task solver timeout in seconds (default 60)")
    p.add_argument("--jobs", type=int, default=4,
                   help="parallel solver processes (default 4)")
    p.add_argument("--card-bound", type=int, default=4,
                   help="cardinality expansion bound (default 4)")
    p.add_argument("--out", help="directory for task files and reports")
    p.add_argument("--figures", action="store_true",
                   help="render wall-time/verdict charts next to the report")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sra",
        description="parse, simulate, and compositionally verify "
                    "scheduler-restricted asynchronous system models")
    ap.add_argument("--json", action="store_true",
                    help="machine-readable output")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and type-check a model")
    p.add_argument("model")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("simulate", help="run scheduling cycles on a "
                       "configuration, monitoring formulas at the final phase")
    p.add_argument("model")
    p.add_argument("--config", required=True, help=".sracfg file")
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the order policy and random inputs")
    p.add_argument("--order", help="seeded:N or fixed:ORDERS.json")
    p.add_argument("--inputs", help="scripted inputs JSON "
                   '({"cycle": {"inst.field": value}})')
    p.add_argument("--monitor", action="append", help=".srainv formula file "
                   "checked at every final-phase state (repeatable)")
    p.add_argument("--out", help="trace JSONL path (default stdout)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("contracts", help="emit generated local contracts")
    p.add_argument("model")
    p.add_argument("--out", help="directory for contracts.txt/contracts.smt2")
    p.add_argument("--card-bound", type=int, default=4)
    p.set_defaults(fn=cmd_contracts)

    p = sub.add_parser("ground", help="apply quantifier grounding and emit "
                       "the grounded model plus equivalence lemmas")
    p.add_argument("model")
    p.add_argument("--invariant")
    p.add_argument("--property")
    p.add_argument("--check", action="store_true",
                   help="discharge the equivalence lemmas")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_ground)

    p = sub.add_parser("verify-local", help="check generated contracts "
                       "against a direct encoding of the method semantics")
    p.add_argument("model")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_verify_local)

    p = sub.add_parser("verify-global", help="discharge the global entailment "
                       "checks for an invariant and safety property over all "
                       "configurations")
    p.add_argument("model")
    p.add_argument("--invariant", required=True)
    p.add_argument("--property", required=True)
    p.add_argument("--gprime", help="per-phase local conditions file")
    p.add_argument("--property-phase",
                   help="check the property at this phase instead of the "
                        "final one (beyond the standard obligations)")
    p.add_argument("--config", help="accepted for symmetry; must be 'none'")
    _add_solver_flags(p)
    p.set_defaults(fn=cmd_verify_global)

    p = sub.add_parser("oracle", help="run differential-testing harnesses")
    p.add_argument("model", nargs="?")
    p.add_argument("--kind", required=True,
                   choices=["contracts", "reachability", "effects"])
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--pre-states", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--configs", type=int, default=20)
    p.add_argument("--cycles", type=int, default=3)
    p.add_argument("--invariant")
    p.add_argument("--property")
    p.set_defaults(fn=cmd_oracle)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except DiagnosticError as exc:
        for d in exc.diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_ERROR
    except (SraError, OracleError, SimulationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

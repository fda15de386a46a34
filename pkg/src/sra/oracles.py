"""Differential-testing harnesses tying contracts, VCs, grounding, and the
simulator together: random configuration/state sampling, the contract
soundness/precision oracle, and bounded exhaustive-interleaving reachability."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import model as M
from .contracts import Contract, exec_contract, init_contract, tick_contract, instantiate
from .model import (AllSet, Binary, Card, ClassDecl, Configuration, Expr,
                    FieldAcc, GlobalState, IntLit, Model, Quant, SraError, Var)
from .simulator import (Exhaustive, Scripted, apply_tick, evaluate, exec_local,
                        init_state, sweep_post_states, _random_scalar)


class OracleError(SraError):
    pass


@dataclass
class RandomModelConfig:
    seed: int = 0
    max_per_class: int = 3
    total_cap: int = 6
    retry_cap: int = 10_000
    int_lo: int = 0
    int_hi: int = 4
    subset_p: float = 0.4
    cycles: int = 3


# ---------------------------------------------------------------------------
# random configurations


def _derived_sets(m: Model) -> dict[tuple[str, str], list[str]]:
    """Set fields pinned by an equality constraint of the shape
    forall c :: (c.s1 + ... + c.sn) == c.sk; sampling computes them instead of
    rejecting (plain rejection almost never satisfies an equality)."""
    out: dict[tuple[str, str], list[str]] = {}
    for g in m.constraints:
        if not (isinstance(g, Quant) and g.kind == "forall"
                and isinstance(g.dom, AllSet) and g.dom.cls):
            continue
        body = g.body
        if not (isinstance(body, Binary) and body.op == "seteq"):
            continue

        def union_fields(e: Expr) -> Optional[list[str]]:
            if (isinstance(e, FieldAcc) and isinstance(e.obj, Var)
                    and e.obj.name == g.var):
                return [e.name]
            if isinstance(e, Binary) and e.op == "union":
                l, r = union_fields(e.left), union_fields(e.right)
                if l is not None and r is not None:
                    return l + r
            return None

        for side, other in ((body.left, body.right), (body.right, body.left)):
            tgt = union_fields(side)
            src = union_fields(other)
            if tgt is not None and len(tgt) == 1 and src is not None:
                out[(g.dom.cls, tgt[0])] = src
    return out


def random_configuration(m: Model, rng: random.Random,
                         cfg_opts: Optional[RandomModelConfig] = None
                         ) -> Configuration:
    """Rejection sampling against the configuration constraints with a retry
    cap; union-equality constraints are satisfied by construction."""
    opts = cfg_opts or RandomModelConfig()
    derived = _derived_sets(m)
    for _ in range(opts.retry_cap):
        universes: dict[str, tuple[str, ...]] = {}
        total = 0
        for c in m.classes:
            hi = min(opts.max_per_class, opts.total_cap - total)
            n = rng.randint(1, max(1, hi))
            total += n
            universes[c.name] = tuple(
                f"{c.name.lower()}{i}" for i in range(n))
        set_fields: dict[tuple[str, str], frozenset[str]] = {}
        params: dict[tuple[str, str], object] = {}
        for c in m.classes:
            for inst in universes[c.name]:
                for sd in c.sets:
                    if (c.name, sd.name) in derived:
                        continue
                    pool = universes.get(sd.elem, ())
                    members = frozenset(x for x in pool
                                        if rng.random() < opts.subset_p)
                    set_fields[(inst, sd.name)] = members
                for sd in c.sets:
                    if (c.name, sd.name) in derived:
                        acc: frozenset[str] = frozenset()
                        for src in derived[(c.name, sd.name)]:
                            acc |= set_fields.get((inst, src), frozenset())
                        set_fields[(inst, sd.name)] = acc
                for pd in c.params:
                    params[(inst, pd.name)] = _random_scalar(
                        m, pd.ty, rng, opts.int_lo, opts.int_hi)
        cfg = Configuration(universes, set_fields, params)
        if all(evaluate(g, m, cfg, None) for g in m.constraints):
            return cfg
    raise OracleError(
        f"no configuration satisfying the constraints found in "
        f"{opts.retry_cap} attempts")


def random_state(m: Model, cfg: Configuration, rng: random.Random,
                 opts: Optional[RandomModelConfig] = None) -> GlobalState:
    opts = opts or RandomModelConfig()
    values: dict[tuple[str, str], object] = {}
    executed: dict[str, bool] = {}
    for cls, insts in cfg.universes.items():
        cd = m.class_map[cls]
        for inst in insts:
            executed[inst] = rng.random() < 0.5
            for f in cd.fields:
                if f.is_event:
                    values[(inst, f.name)] = rng.random() < 0.5
                elif f.is_timer:
                    values[(inst, f.name)] = (None if rng.random() < 0.5
                                              else rng.randint(1, 3))
                else:
                    values[(inst, f.name)] = _random_scalar(
                        m, f.ty, rng, opts.int_lo, opts.int_hi)
    phase = rng.choice(m.scheduler.phases)
    return GlobalState(phase, values, executed)  # type: ignore[arg-type]


def _reachable_state(m: Model, cfg: Configuration, rng: random.Random
                     ) -> GlobalState:
    """A state drawn from a short random run (guard-consistent sampling)."""
    from .simulator import Engine, RandomInputs, Seeded
    eng = Engine(m, cfg, Seeded(rng.randrange(1 << 30)),
                 RandomInputs(rng.randrange(1 << 30)))
    steps = rng.randint(0, 12)
    try:
        for _ in range(steps):
            eng.step()
    except SraError:
        pass
    return eng.state


# ---------------------------------------------------------------------------
# contract soundness / precision oracle


def contract_vs_simulator(m: Model, samples: int, seed: int = 0,
                          opts: Optional[RandomModelConfig] = None,
                          exec_factory=exec_contract) -> dict:
    """Draw random constraint-satisfying configurations and states, run the
    concrete exec/init/tick semantics, and check the generated contracts:
    satisfaction must be 100% and exactly the fired disjunct must hold.
    exec_factory exists so tests can feed deliberately broken contracts."""
    opts = opts or RandomModelConfig(seed=seed)
    combos = [(c.name, p) for c in m.classes for p in m.scheduler.phases]
    contracts: dict[tuple[str, str], Contract] = {}
    inst_var = Var("OBJ")
    inst_disjuncts: dict[tuple[str, str], list[tuple[str, Expr]]] = {}
    for key in combos:
        contracts[key] = exec_factory(m, *key)
        inst_disjuncts[key] = [(n, instantiate(d, inst_var))
                               for n, d in contracts[key].disjuncts]
    init_forms = {c.name: instantiate(init_contract(m, c.name).formula, inst_var)
                  for c in m.classes}
    tick_forms = {c.name: instantiate(tick_contract(m, c.name).formula, inst_var)
                  for c in m.classes}

    report = {"samples": 0, "sound": 0, "precise": 0, "failures": [],
              "per_combo": {f"{c}/{p}": 0 for c, p in combos},
              "init_checked": 0, "tick_checked": 0}
    if samples <= 0:
        report.update({"soundness_rate": 1.0, "precision_rate": 1.0,
                       "status": "pass"})
        return report

    cfg = None
    for i in range(samples):
        rng = random.Random(seed * 1_000_003 + i)
        if cfg is None or i % 50 == 0:
            cfg = random_configuration(m, rng, opts)
        cls_name, phase = combos[i % len(combos)]
        insts = cfg.universes[cls_name]
        inst = rng.choice(list(insts))
        if rng.random() < 0.5:
            pre = random_state(m, cfg, rng, opts)
        else:
            pre = _reachable_state(m, cfg, rng)
        pre.phase = phase

        post, fired = exec_local(m, cfg, pre, inst, phase, rng)
        post.executed[inst] = True
        env = {"OBJ": inst}
        sat = [name for name, d in inst_disjuncts[(cls_name, phase)]
               if evaluate(d, m, cfg, post, pre, env)]
        expected = fired.name if fired is not None else "stutter"
        report["samples"] += 1
        report["per_combo"][f"{cls_name}/{phase}"] += 1
        sound = bool(sat)
        precise = sat == [expected]
        report["sound"] += sound
        report["precise"] += precise
        if not (sound and precise):
            report["failures"].append(
                {"sample": i, "seed": [seed, i], "cls": cls_name,
                 "phase": phase, "inst": inst, "fired": expected,
                 "satisfied": sat})
            if len(report["failures"]) >= 20:
                break

        if i % 10 == 0:
            # tick: pre/post pair from the concrete timer decrement
            tpost = pre.copy()
            apply_tick(m, cfg, tpost)
            if not evaluate(tick_forms[cls_name], m, cfg, tpost, pre, env):
                report["failures"].append(
                    {"sample": i, "seed": [seed, i], "cls": cls_name,
                     "kind": "tick", "inst": inst})
            report["tick_checked"] += 1
        if i % 100 == 0:
            st0 = init_state(m, cfg, None, 0)
            for cls2, insts2 in cfg.universes.items():
                for inst2 in insts2:
                    if not evaluate(init_forms[cls2], m, cfg, st0, None,
                                    {"OBJ": inst2}):
                        report["failures"].append(
                            {"sample": i, "kind": "init", "cls": cls2,
                             "inst": inst2})
            report["init_checked"] += 1

    n = report["samples"] or 1
    report["soundness_rate"] = report["sound"] / n
    report["precision_rate"] = report["precise"] / n
    report["status"] = ("pass" if not report["failures"]
                        and report["soundness_rate"] == 1.0
                        and report["precision_rate"] == 1.0 else "fail")
    return report


# ---------------------------------------------------------------------------
# bounded exhaustive reachability


def _input_space(m: Model, cfg: Configuration, cap: int = 64
                 ) -> list[dict[tuple[str, str], object]]:
    """Every valuation of the input fields (bounded: ints sample {0,1,2})."""
    slots: list[tuple[tuple[str, str], list[object]]] = []
    for cls in sorted(cfg.universes):
        cd = m.class_map[cls]
        for inst in cfg.universes[cls]:
            for f in cd.fields:
                if not f.is_input:
                    continue
                if isinstance(f.ty, M.BoolType):
                    vals: list[object] = [False, True]
                elif isinstance(f.ty, M.IntType):
                    vals = [0, 1, 2]
                else:
                    vals = list(m.enum_map[f.ty.name].values)
                slots.append(((inst, f.name), vals))
    total = 1
    for _, vals in slots:
        total *= len(vals)
    if total > cap:
        raise OracleError(
            f"input space of size {total} exceeds the exhaustive cap {cap}")
    out = []
    for combo in itertools.product(*(vals for _, vals in slots)):
        out.append({key: v for (key, _), v in zip(slots, combo)})
    return out


@dataclass
class ReachReport:
    status: str
    states: int
    violations: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"status": self.status, "states": self.states,
                "violations": self.violations}


def bounded_reachability_check(m: Model, cfg: Configuration,
                               inv: Optional[Expr], prop: Optional[Expr],
                               cycle_bound: int = 3,
                               policy: Optional[Exhaustive] = None,
                               input_cap: int = 64) -> ReachReport:
    """Enumerate every run up to the cycle bound under all self-loop
    interleavings and all input valuations, checking the invariant at every
    scheduler step boundary and the property at every final-phase state."""
    policy = policy or Exhaustive()
    total_insts = len(cfg.instances())
    if total_insts > policy.cap:
        raise OracleError(
            f"{total_insts} instances exceed the exhaustive-policy cap "
            f"{policy.cap}")
    sched = m.scheduler
    inputs = _input_space(m, cfg, input_cap)
    violations: list[dict] = []
    seen: set = set()
    frontier: list[tuple[GlobalState, int]] = []

    def check(state: GlobalState, cycle: int, what: str) -> bool:
        if inv is not None and not evaluate(inv, m, cfg, state):
            violations.append({"kind": "invariant", "cycle": cycle,
                               "phase": state.phase, "at": what})
            return False
        if (prop is not None and state.phase == sched.final
                and not evaluate(prop, m, cfg, state)):
            violations.append({"kind": "property", "cycle": cycle,
                               "phase": state.phase, "at": what})
            return False
        return True

    for iv in inputs:
        st = init_state(m, cfg, Scripted({0: iv}), 0)
        key = (st.key(), 0)
        if key in seen:
            continue
        seen.add(key)
        if check(st, 0, "init"):
            frontier.append((st, 0))

    while frontier:
        state, cycle = frontier.pop()
        if violations:
            break
        children: list[tuple[GlobalState, int]] = []
        if state.phase == sched.final:
            if cycle + 1 > cycle_bound:
                continue
            for iv in inputs:
                nxt = state.copy()
                for k, v in iv.items():
                    nxt.values[k] = v
                nxt.phase = sched.initial
                children.append((nxt, cycle + 1))
        else:
            fired = None
            for t in sched.transitions:
                if t.source == state.phase and evaluate(t.guard, m, cfg, state):
                    fired = t
                    break
            if fired is None:
                violations.append({"kind": "deadlock", "cycle": cycle,
                                   "phase": state.phase, "at": "step"})
                break
            if fired.is_self_loop:
                for post in sweep_post_states(m, cfg, state, state.phase):
                    children.append((post, cycle))
            else:
                nxt = state.copy()
                nxt.phase = fired.target
                for inst in nxt.executed:
                    nxt.executed[inst] = False
                if fired.target == sched.final:
                    apply_tick(m, cfg, nxt)
                children.append((nxt, cycle))
        for child, ccycle in children:
            key = (child.key(), ccycle)
            if key in seen:
                continue
            seen.add(key)
            if check(child, ccycle, "step"):
                frontier.append((child, ccycle))

    status = "ok" if not violations else "violation"
    return ReachReport(status, len(seen), violations)


# ---------------------------------------------------------------------------
# random effect generation (effect-transformation oracle)


EFFECT_HOST = """
enum Mode { MA, MB }
enum TLoc { L0 }
enum ULoc { U0 }

class U {
  var location : ULoc = U0
  var w : Int = 0
  var z : Bool = false
}

class T {
  var location : TLoc = L0
  var a : Int = 0
  var b : Int = 1
  var flag : Bool = false
  var mode : Mode = MA
  var t1 : Timer
  param k : Int
  set others : Set<U>

  transition step = (L0, true, L0, { %s }, P)
}

scheduler {
  phases P, Q;
  initial P;
  final Q;
  trans P -> P when forall x in All :: !x.executed;
  trans P -> Q when forall x in All :: x.executed;
}
"""


def random_effect_source(rng: random.Random, depth: int = 4) -> str:
    """Random statement over the effect-host class exercising every
    transformation construct: assignment, havoc, conditional, quantified
    assignment, sequence, and the empty statement."""

    def int_expr(d: int, bound: Optional[str] = None) -> str:
        opts: list[Callable[[], str]] = [
            lambda: str(rng.randint(0, 3)),
            lambda: rng.choice(["a", "b", "k"]),
        ]
        if bound:
            opts.append(lambda: f"{bound}.w")
        if d > 0:
            opts += [
                lambda: f"({int_expr(d - 1, bound)} + {int_expr(d - 1, bound)})",
                lambda: f"({int_expr(d - 1, bound)} - {int_expr(d - 1, bound)})",
                lambda: f"({int_expr(d - 1, bound)} * {int_expr(d - 1, bound)})",
                lambda: (f"(if {bool_expr(d - 1, bound)} then "
                         f"{int_expr(d - 1, bound)} else {int_expr(d - 1, bound)})"),
            ]
        return rng.choice(opts)()

    def bool_expr(d: int, bound: Optional[str] = None) -> str:
        opts = [
            lambda: rng.choice(["true", "false", "flag", "mode == MA"]),
            lambda: f"{int_expr(max(d - 1, 0), bound)} < {int_expr(max(d - 1, 0), bound)}",
        ]
        if bound:
            opts.append(lambda: f"{bound}.z")
        if d > 0:
            opts += [
                lambda: f"({bool_expr(d - 1, bound)} && {bool_expr(d - 1, bound)})",
                lambda: f"!({bool_expr(d - 1, bound)})",
                lambda: "(exists u in others :: u.z)",
            ]
        return rng.choice(opts)()

    def stmt(d: int) -> str:
        choices = ["assign", "assign", "havoc", "seq", "empty"]
        if d > 0:
            choices += ["if", "if", "quant", "seq", "seq"]
        kind = rng.choice(choices)
        if kind == "assign":
            tgt = rng.choice(["a", "b", "flag", "mode", "t1"])
            if tgt in ("a", "b"):
                return f"{tgt} := {int_expr(d)};"
            if tgt == "flag":
                return f"flag := {bool_expr(d)};"
            if tgt == "t1":
                return f"t1 := {rng.randint(1, 3)};"
            return f"mode := (if {bool_expr(d)} then MA else MB);"
        if kind == "havoc":
            return f"{rng.choice(['a', 'b', 'flag', 'mode'])} := *;"
        if kind == "if":
            s1, s2 = stmt(d - 1), stmt(d - 1)
            if rng.random() < 0.5:
                return f"if {bool_expr(d - 1)} then {{ {s1} }}"
            return f"if {bool_expr(d - 1)} then {{ {s1} }} else {{ {s2} }}"
        if kind == "quant":
            fieldname = rng.choice(["w", "z"])
            v = "y"
            value = (int_expr(d - 1, v) if fieldname == "w"
                     else bool_expr(d - 1, v))
            return f"forall {v} in others {{ {v}.{fieldname} := {value}; }}"
        if kind == "seq":
            return f"{stmt(d - 1)} {stmt(d - 1)}"
        return ""

    return stmt(depth)


def effect_host_model(effect_src: str):
    from .frontend import load_model
    return load_model(EFFECT_HOST % effect_src, "<effect-host>")


def effect_transform_oracle(effect, cls: ClassDecl, m: Model,
                            cfg: Configuration, pre_states: int,
                            rng: random.Random) -> list[str]:
    """Evaluate every symbolic-map entry on random pre-states and compare
    against concrete execution; returns mismatch descriptions."""
    from .contracts import transform_effect
    from .simulator import exec_stmt
    sm = transform_effect(effect, cls, m)
    mismatches: list[str] = []
    insts = list(cfg.universes[cls.name])
    for i in range(pre_states):
        pre = random_state(m, cfg, rng)
        inst = rng.choice(insts)
        post = pre.copy()
        exec_stmt(effect, m, cfg, post, inst, rng)
        env = {"OBJ": inst}
        for v, entry in sm.scalars.items():
            if isinstance(entry, M.Epsilon):
                continue
            got = post.values[(inst, v)]
            want = _eval_entry(instantiate(entry, Var("OBJ")), m, cfg, pre, env,
                               got, m.class_map[cls.name].field_map[v].is_timer)
            if want is not _MATCH:
                mismatches.append(
                    f"pre-state {i}: {cls.name}.{v} = {got!r}, map gives {want!r}")
        for fname, fe in sm.funcs.items():
            for u in cfg.universes[fe.cls]:
                body = instantiate(M.substitute(fe.body, {fe.var: Var("ELEM")}),
                                   Var("OBJ"))
                got = post.values[(u, fname)]
                want = _eval_entry(body, m, cfg, pre, {**env, "ELEM": u}, got,
                                   False)
                if want is not _MATCH:
                    mismatches.append(
                        f"pre-state {i}: {fe.cls}.{fname}[{u}] = {got!r}, "
                        f"map gives {want!r}")
        if len(mismatches) > 10:
            break
    return mismatches


_MATCH = object()


def _eval_entry(entry: Expr, m: Model, cfg: Configuration, pre: GlobalState,
                env: dict, got, is_timer: bool):
    """Evaluate a (possibly epsilon-bearing conditional) map entry; returns
    _MATCH when the concrete value satisfies it, else the expected value."""
    if isinstance(entry, M.Epsilon):
        return _MATCH
    if isinstance(entry, M.Ite):
        from .contracts import contains_epsilon
        if contains_epsilon(entry.then) or contains_epsilon(entry.els):
            cond = evaluate(entry.cond, m, cfg, None, pre, env)
            branch = entry.then if cond else entry.els
            return _eval_entry(branch, m, cfg, pre, env, got, is_timer)
    if is_timer and not isinstance(entry, (M.InactiveLit, M.Old)):
        want = evaluate(entry, m, cfg, None, pre, env)
        return _MATCH if got == want else ("active", want)
    want = evaluate(entry, m, cfg, None, pre, env)
    return _MATCH if got == want else want

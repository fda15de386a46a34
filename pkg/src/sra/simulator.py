"""Executable operational semantics: expression evaluation, local execution,
scheduler steps, scheduling cycles, runs, and a property monitor at the final
phase."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from . import model as M
from .model import (AllSet, Assign, AssertStmt, Assume, Binary, BoolLit, Card,
                    ClassDecl, Configuration, EnumVal, EventType, Expr,
                    FieldAcc, FieldDecl, GlobalState, Havoc, IfStmt,
                    InactiveLit, IntLit, Ite, Model, Name, Not, NullLit, Old,
                    PhaseRef, PhaseVal, Quant, QuantAssign, SelfField, Seq,
                    Skip, SraError, Stmt, TimerActive, Transition, Value, Var,
                    guard_event_list)


class SimulationError(SraError):
    pass


class AssertFailure(SimulationError):
    def __init__(self, msg: str, inst: str, transition: str):
        super().__init__(msg)
        self.inst = inst
        self.transition = transition


class DeadlockError(SimulationError):
    def __init__(self, state: GlobalState):
        super().__init__(f"scheduler deadlock in phase {state.phase}")
        self.state = state


# ---------------------------------------------------------------------------
# Order policies and input providers


@dataclass(frozen=True)
class Seeded:
    seed: int = 0


@dataclass(frozen=True)
class FixedOrder:
    orders: dict  # phase -> tuple of instance ids (a permutation of all)

    def __hash__(self):  # dict field; identity hash is fine for a policy object
        return id(self)


@dataclass(frozen=True)
class Exhaustive:
    cap: int = 6


OrderPolicy = Union[Seeded, FixedOrder, Exhaustive]


class Scripted:
    """Per-cycle assignments to input fields; unscripted inputs keep their
    declared initial value (cycle 0) or current value (later cycles)."""

    def __init__(self, per_cycle: dict[int, dict[tuple[str, str], Value]]):
        self.per_cycle = per_cycle

    def provide(self, m: Model, cfg: Configuration, cycle: int):
        script = self.per_cycle.get(cycle, {})
        for (inst, fname) in script:
            cls = cfg.class_of.get(inst)
            fd = m.class_map[cls].field_map.get(fname) if cls else None
            if fd is None or not fd.is_input:
                raise SimulationError(
                    f"scripted input {inst}.{fname} is not an input field")
        return dict(script)


class RandomInputs:
    def __init__(self, seed: int = 0, int_lo: int = 0, int_hi: int = 4):
        self.seed = seed
        self.int_lo = int_lo
        self.int_hi = int_hi

    def provide(self, m: Model, cfg: Configuration, cycle: int):
        rng = random.Random(self.seed * 1_000_003 + cycle)
        out: dict[tuple[str, str], Value] = {}
        for cls, insts in sorted(cfg.universes.items()):
            cd = m.class_map[cls]
            for inst in insts:
                for fd in cd.fields:
                    if fd.is_input:
                        out[(inst, fd.name)] = _random_scalar(m, fd.ty, rng,
                                                              self.int_lo, self.int_hi)
        return out


def _random_scalar(m: Model, ty, rng: random.Random, lo: int = 0, hi: int = 4) -> Value:
    if isinstance(ty, M.IntType):
        return rng.randint(lo, hi)
    if isinstance(ty, M.BoolType):
        return rng.random() < 0.5
    if isinstance(ty, M.EnumType):
        return rng.choice(m.enum_map[ty.name].values)
    raise SraError(f"no random value for {ty}")


# ---------------------------------------------------------------------------
# Expression evaluation


def evaluate(e: Expr, m: Model, cfg: Configuration,
             state: Optional[GlobalState], pre: Optional[GlobalState] = None,
             env: Optional[dict[str, str]] = None):
    """Concrete semantics of expressions.  `pre` backs old(...); `env` binds
    quantified variables and instance constants to instance ids, plus 'self'."""
    env = env or {}

    def instance_of(obj: Expr) -> Optional[str]:
        v = ev(obj)
        if v is None:
            return None
        if not isinstance(v, str):
            raise SimulationError(f"expected an instance, got {v!r}")
        return v

    def member(inst: Optional[str], name: str):
        if inst is None:
            raise SimulationError(f"null dereference reading {name}")
        cls = cfg.class_of.get(inst)
        if cls is None:
            raise SimulationError(f"unknown instance {inst}")
        cd = m.class_map[cls]
        if name == "executed":
            if state is None:
                raise SimulationError("executed flag needs a global state")
            return state.executed[inst]
        if name in cd.param_map:
            return cfg.params[(inst, name)]
        if name in cd.set_map:
            return cfg.set_fields.get((inst, name), frozenset())
        if name in cd.ref_map:
            return cfg.ref_value(inst, cd.ref_map[name])
        if name in cd.field_map:
            if state is None:
                raise SimulationError(f"mutable field {name} needs a global state")
            return state.values[(inst, name)]
        raise SimulationError(f"unknown member {cls}.{name}")

    def ev(e: Expr):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, (EnumVal, PhaseVal)):
            return e.value
        if isinstance(e, (InactiveLit, NullLit)):
            return None
        if isinstance(e, PhaseRef):
            if state is None:
                raise SimulationError("phase needs a global state")
            return state.phase
        if isinstance(e, AllSet):
            if e.cls is None:
                raise SimulationError("unresolved All")
            return frozenset(cfg.universes.get(e.cls, ()))
        if isinstance(e, Var):
            if e.name not in env:
                raise SimulationError(f"unbound symbol {e.name}")
            return env[e.name]
        if isinstance(e, SelfField):
            return member(env.get("self"), e.name)
        if isinstance(e, FieldAcc):
            return member(instance_of(e.obj), e.name)
        if isinstance(e, TimerActive):
            return ev(e.arg) is not None
        if isinstance(e, M.TimerCount):
            v = ev(e.arg)
            return v if isinstance(v, int) else 0
        if isinstance(e, M.SelfObj):
            if "self" not in env:
                raise SimulationError("self is unbound")
            return env["self"]
        if isinstance(e, Old):
            if pre is None:
                raise SimulationError("old(...) needs a pre-state")
            return evaluate(e.arg, m, cfg, pre, None, env)
        if isinstance(e, Not):
            return not ev(e.arg)
        if isinstance(e, Card):
            return len(ev(e.arg))
        if isinstance(e, Ite):
            return ev(e.then) if ev(e.cond) else ev(e.els)
        if isinstance(e, Quant):
            dom = sorted(ev(e.dom))
            if e.kind == "forall":
                return all(evaluate(e.body, m, cfg, state, pre,
                                    {**env, e.var: x}) for x in dom)
            return any(evaluate(e.body, m, cfg, state, pre,
                                {**env, e.var: x}) for x in dom)
        if isinstance(e, Binary):
            op = e.op
            if op == "and":
                return bool(ev(e.left)) and bool(ev(e.right))
            if op == "or":
                return bool(ev(e.left)) or bool(ev(e.right))
            if op == "implies":
                return (not ev(e.left)) or bool(ev(e.right))
            l, r = ev(e.left), ev(e.right)
            if op == "add":
                return l + r
            if op == "sub":
                return l - r
            if op == "mul":
                return l * r
            if op in ("eq", "seteq"):
                return l == r
            if op == "lt":
                return l < r
            if op == "le":
                return l <= r
            if op == "in":
                return l in r
            if op == "subset":
                return l <= r
            if op == "disjoint":
                return l.isdisjoint(r)
            if op == "union":
                return l | r
        if isinstance(e, Name):
            raise SimulationError(f"unresolved name {e.name}")
        raise SimulationError(f"cannot evaluate {type(e).__name__}")

    return ev(e)


# ---------------------------------------------------------------------------
# Statement execution


def exec_stmt(s: Stmt, m: Model, cfg: Configuration, state: GlobalState,
              inst: str, rng: random.Random, transition: str = "") -> None:
    cls = cfg.class_of[inst]
    cd = m.class_map[cls]
    env = {"self": inst}

    def ev(e: Expr):
        return evaluate(e, m, cfg, state, None, env)

    if isinstance(s, Skip):
        return
    if isinstance(s, Seq):
        for inner in s.stmts:
            exec_stmt(inner, m, cfg, state, inst, rng, transition)
        return
    if isinstance(s, Assign):
        fd_owner_inst = inst
        owner_cd = cd
        if s.owner is not None:
            target = ev(s.owner)
            if target is None:
                raise SimulationError(
                    f"null target in assignment to {s.field_name} ({transition})")
            fd_owner_inst = target
            owner_cd = m.class_map[cfg.class_of[target]]
        fd = owner_cd.field_map[s.field_name]
        val = ev(s.value)
        if fd.is_timer:
            if not isinstance(val, int) or val < 1:
                raise SimulationError(
                    f"timer {s.field_name} activated with non-positive count {val!r}")
        state.values[(fd_owner_inst, s.field_name)] = val
        return
    if isinstance(s, Havoc):
        fd = cd.field_map[s.field_name]
        state.values[(inst, s.field_name)] = _havoc_value(m, fd, rng)
        return
    if isinstance(s, IfStmt):
        if ev(s.cond):
            exec_stmt(s.then, m, cfg, state, inst, rng, transition)
        elif s.els is not None:
            exec_stmt(s.els, m, cfg, state, inst, rng, transition)
        return
    if isinstance(s, QuantAssign):
        domain = sorted(ev(s.dom))
        # simultaneous semantics: every right-hand side reads the pre-assignment state
        updates = []
        for member_id in domain:
            val = evaluate(s.value, m, cfg, state, None,
                           {**env, s.var: member_id})
            updates.append((member_id, val))
        for member_id, val in updates:
            state.values[(member_id, s.field_name)] = val
        return
    if isinstance(s, Assume):
        if not ev(s.cond):
            raise SimulationError(
                f"assume violated in effect of {transition} on {inst}")
        return
    if isinstance(s, AssertStmt):
        if not ev(s.cond):
            raise AssertFailure(
                f"assert failed in effect of {transition} on {inst}", inst, transition)
        return
    raise SraError(f"cannot execute {type(s).__name__}")


def _havoc_value(m: Model, fd: FieldDecl, rng: random.Random) -> Value:
    if fd.is_timer:
        return None if rng.random() < 0.5 else rng.randint(1, 3)
    return _random_scalar(m, fd.ty, rng, -4, 4)


# ---------------------------------------------------------------------------
# Local and global execution


def exec_local(m: Model, cfg: Configuration, state: GlobalState, inst: str,
               phase: str, rng: Optional[random.Random] = None
               ) -> tuple[GlobalState, Optional[Transition]]:
    """One atomic local step: the first enabled phase-matching transition
    fires, or the instance stutters.  Returns the new state and the fired
    transition (None on stutter).  The executed flag is left untouched."""
    rng = rng or random.Random(0)
    cd = m.class_map[cfg.class_of[inst]]
    out = state.copy()
    env = {"self": inst}
    loc = state.values[(inst, "location")]
    for t in cd.phase_transitions(phase):
        if t.start != loc:
            continue
        if evaluate(t.guard, m, cfg, state, None, env):
            exec_stmt(t.effect, m, cfg, out, inst, rng, t.name)
            out.values[(inst, "location")] = t.end
            for ev_name in guard_event_list(cd, t.guard):
                out.values[(inst, ev_name)] = False
            return out, t
    return out, None


def init_state(m: Model, cfg: Configuration, inputs=None,
               cycle: int = 0) -> GlobalState:
    """Declared initial values, inactive timers, false events and flags,
    scheduler at the initial phase; inputs from the provider."""
    provided = inputs.provide(m, cfg, cycle) if inputs is not None else {}
    values: dict[tuple[str, str], Value] = {}
    executed: dict[str, bool] = {}
    for cls, insts in cfg.universes.items():
        cd = m.class_map[cls]
        for inst in insts:
            executed[inst] = False
            for fd in cd.fields:
                if fd.is_input:
                    if (inst, fd.name) in provided:
                        values[(inst, fd.name)] = provided[(inst, fd.name)]
                    elif fd.init is not None:
                        values[(inst, fd.name)] = evaluate(fd.init, m, cfg, None)
                    else:
                        values[(inst, fd.name)] = _default_value(m, fd.ty)
                elif fd.is_event:
                    values[(inst, fd.name)] = False
                elif fd.is_timer:
                    values[(inst, fd.name)] = None
                else:
                    if fd.init is None:
                        raise SimulationError(
                            f"missing initial value for non-input field "
                            f"{cls}.{fd.name}")
                    values[(inst, fd.name)] = evaluate(fd.init, m, cfg, None)
    return GlobalState(m.scheduler.initial, values, executed)


def _default_value(m: Model, ty) -> Value:
    if isinstance(ty, M.IntType):
        return 0
    if isinstance(ty, M.BoolType):
        return False
    if isinstance(ty, M.EnumType):
        return m.enum_map[ty.name].values[0]
    raise SraError(f"no default for {ty}")


def apply_tick(m: Model, cfg: Configuration, state: GlobalState) -> None:
    """Decrement active timers: n>1 -> n-1, 1 -> inactive, inactive unchanged."""
    for cls, insts in cfg.universes.items():
        cd = m.class_map[cls]
        for inst in insts:
            for fd in cd.timers():
                v = state.values[(inst, fd.name)]
                if isinstance(v, int):
                    state.values[(inst, fd.name)] = v - 1 if v > 1 else None


def apply_inputs(state: GlobalState, provided: dict[tuple[str, str], Value]) -> None:
    for key, val in provided.items():
        state.values[key] = val


def sweep(m: Model, cfg: Configuration, state: GlobalState, phase: str,
          order: list[str], rng: Optional[random.Random] = None) -> GlobalState:
    """Self-loop body: exec each instance once in the given order, setting its
    executed flag immediately so later instances observe it."""
    cur = state
    for inst in order:
        cur, _ = exec_local(m, cfg, cur, inst, phase, rng)
        cur.executed[inst] = True
    return cur


@dataclass
class TraceStep:
    index: int
    label: dict
    state: GlobalState


@dataclass
class Trace:
    steps: list[TraceStep] = field(default_factory=list)

    def append(self, label: dict, state: GlobalState) -> TraceStep:
        step = TraceStep(len(self.steps), label, state.copy())
        self.steps.append(step)
        return step

    def final(self) -> GlobalState:
        return self.steps[-1].state

    def to_jsonl(self, m: Model, cfg: Configuration) -> str:
        lines = []
        for s in self.steps:
            lines.append(json.dumps(snapshot_json(s, m, cfg)))
        return "\n".join(lines) + "\n"


def snapshot_json(step: TraceStep, m: Model, cfg: Configuration) -> dict:
    insts: dict[str, dict] = {}
    for cls in sorted(cfg.universes):
        cd = m.class_map[cls]
        for inst in sorted(cfg.universes[cls]):
            fields: dict[str, Value] = {}
            for fd in cd.fields:
                fields[fd.name] = step.state.values[(inst, fd.name)]
            fields["executed"] = step.state.executed[inst]
            insts[inst] = fields
    return {"step": step.index, "label": step.label,
            "phase": step.state.phase, "state": insts}


class Engine:
    """Deterministic single-run engine; one scheduler step per call."""

    def __init__(self, m: Model, cfg: Configuration,
                 order: OrderPolicy = Seeded(0), inputs=None):
        if isinstance(order, Exhaustive):
            raise SraError("the exhaustive policy is reserved for "
                           "bounded reachability checking")
        if isinstance(order, FixedOrder):
            everyone = sorted(cfg.instances())
            for phase, lst in order.orders.items():
                if sorted(lst) != everyone:
                    raise SraError(f"fixed order for {phase} is not a "
                                   "permutation of the instance list")
        self.m = m
        self.cfg = cfg
        self.order = order
        self.inputs = inputs
        self.rng = random.Random(order.seed if isinstance(order, Seeded) else 0)
        self.cycle = 0
        self.state = init_state(m, cfg, inputs, cycle=0)

    def order_for(self, phase: str) -> list[str]:
        insts = list(self.cfg.instances())
        if isinstance(self.order, FixedOrder):
            return list(self.order.orders.get(phase, insts))
        self.rng.shuffle(insts)
        return insts

    def step(self) -> dict:
        """Advance one scheduler step; returns the step label."""
        m, cfg, state = self.m, self.cfg, self.state
        sched = m.scheduler
        if state.phase == sched.final:
            # implicit reset: next cycle's inputs, everything else preserved
            self.cycle += 1
            provided = (self.inputs.provide(m, cfg, self.cycle)
                        if self.inputs is not None else {})
            nxt = state.copy()
            apply_inputs(nxt, provided)
            nxt.phase = sched.initial
            self.state = nxt
            return {"kind": "reset", "cycle": self.cycle}
        for t in sched.transitions:
            if t.source != state.phase:
                continue
            if not evaluate(t.guard, m, cfg, state):
                continue
            if t.is_self_loop:
                order = self.order_for(state.phase)
                self.state = sweep(m, cfg, state, state.phase, order, self.rng)
                return {"kind": "self-loop", "phase": state.phase, "order": order}
            nxt = state.copy()
            nxt.phase = t.target
            for inst in nxt.executed:
                nxt.executed[inst] = False
            if t.target == sched.final:
                apply_tick(m, cfg, nxt)
            self.state = nxt
            return {"kind": "phase-change", "from": t.source, "to": t.target}
        raise DeadlockError(state)


def step_scheduler(m: Model, cfg: Configuration, state: GlobalState,
                   order: OrderPolicy = Seeded(0), inputs=None
                   ) -> tuple[GlobalState, dict]:
    """One-shot scheduler step on an explicit state."""
    eng = Engine(m, cfg, order, inputs)
    eng.state = state.copy()
    label = eng.step()
    return eng.state, label


@dataclass
class RunResult:
    trace: Trace
    verdict: dict

    @property
    def ok(self) -> bool:
        return self.verdict["status"] == "pass"


MAX_STEPS_PER_CYCLE = 10_000


def run(m: Model, cfg: Configuration, order: OrderPolicy = Seeded(0),
        inputs=None, cycles: int = 1, monitors: Optional[list[Expr]] = None
        ) -> RunResult:
    """Execute `cycles` scheduling cycles, checking every monitor at each
    final-phase state; the verdict is the first violation or pass."""
    monitors = monitors or []
    eng = Engine(m, cfg, order, inputs)
    trace = Trace()
    trace.append({"kind": "init"}, eng.state)
    completed = 0
    steps_this_cycle = 0
    while completed < cycles:
        label = eng.step()
        trace.append(label, eng.state)
        steps_this_cycle += 1
        if steps_this_cycle > MAX_STEPS_PER_CYCLE:
            raise SimulationError("scheduling cycle did not terminate")
        if label["kind"] == "reset":
            steps_this_cycle = 0
        if eng.state.phase == m.scheduler.final:
            for idx, mon in enumerate(monitors):
                if not evaluate(mon, m, cfg, eng.state):
                    return RunResult(trace, {
                        "status": "violation", "monitor": idx,
                        "step": len(trace.steps) - 1})
            completed += 1
            if completed < cycles:
                label = eng.step()  # reset into the next cycle
                trace.append(label, eng.state)
                steps_this_cycle = 0
    return RunResult(trace, {"status": "pass", "cycles": completed})


# ---------------------------------------------------------------------------
# Exhaustive sweep enumeration (shared with the oracles)


def sweep_post_states(m: Model, cfg: Configuration, state: GlobalState,
                      phase: str) -> list[GlobalState]:
    """All distinct post-states of a self-loop sweep under every instance
    order, deduplicated by (state, remaining) during exploration."""
    insts = frozenset(cfg.instances())
    seen: set = set()
    out: dict = {}
    stack = [(state, insts)]
    while stack:
        cur, remaining = stack.pop()
        key = (cur.key(), remaining)
        if key in seen:
            continue
        seen.add(key)
        if not remaining:
            out.setdefault(cur.key(), cur)
            continue
        for inst in sorted(remaining):
            nxt, _ = exec_local(m, cfg, cur, inst, phase)
            nxt.executed[inst] = True
            stack.append((nxt, remaining - {inst}))
    return list(out.values())

"""Compilation of the global entailment checks and the local contract
obligations into first-order validity queries (SMT-LIB text asserting the
negation of each task formula)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .. import model as M
from ..contracts import (Contract, ContractGenError, exec_contract,
                         extended_guard, init_contract,
                         phase_function_fields, instantiate, tick_contract)
from ..frontend import GPrimeMap, gprime_for
from ..model import (AllSet, Binary, BoolLit, ClassDecl, EnumVal, Expr,
                     FieldAcc, Model, Not, Old, PhaseRef, PhaseVal, Quant,
                     SelfField, Var, and_, eq, implies, not_, or_,
                     write_footprint)
from .smt import EncEnv, Encoder, EncodingError, PRE, POST, sanitize


@dataclass
class TwoStateContext:
    """Shared two-vocabulary encoding context for a model: one pre and one
    post function symbol per mutable field (plus phase and executed), with
    immutable symbols shared between the states."""

    model: Model
    encoder: Encoder

    def preamble(self) -> list[str]:
        return self.encoder.preamble()


@dataclass
class VerificationTask:
    id: str
    kind: str
    formula: Expr               # closed modulo the declared instance constants
    consts: dict[str, str]      # constant name -> class
    smt_text: str
    meta: dict = field(default_factory=dict)
    extra_asserts: tuple[str, ...] = ()  # positive context (local-task relations)

    def filename(self) -> str:
        return f"{self.id}.smt2"


def _ctx(m: Model, card_bound: int = 4) -> TwoStateContext:
    return TwoStateContext(m, Encoder(m, card_bound))


def make_task(ctx: TwoStateContext, task_id: str, kind: str, formula: Expr,
              consts: dict[str, str], meta: Optional[dict] = None,
              extra_asserts: tuple[str, ...] = ()) -> VerificationTask:
    enc = ctx.encoder
    lines = list(enc.preamble())
    env = enc.env(consts)
    for name, cls in consts.items():
        lines.append(f"(declare-const {sanitize(name)} {enc.sort(cls)})")
        lines.append(f"(assert ({enc.all_sym(cls)} {sanitize(name)}))")
    for extra in extra_asserts:
        lines.append(extra)
    lines.append(f"; task {task_id}: validity of the formula below")
    lines.append(f"(assert (not {enc.encode(formula, env)}))")
    lines.append("(check-sat)")
    return VerificationTask(task_id, kind, formula, dict(consts),
                            "\n".join(lines) + "\n", meta or {},
                            extra_asserts)


# ---------------------------------------------------------------------------
# frames


def _all_classes_quant(m: Model, body: Callable[[Expr], Expr],
                       var: str = "x") -> Expr:
    parts = []
    for c in m.classes:
        v = M.fresh_name(var)
        parts.append(Quant("forall", v, AllSet(c.name), body(Var(v))))
    return and_(*parts)


def _unchanged_field(cls: str, fname: str, guard_var: Optional[Expr] = None) -> Expr:
    v = M.fresh_name("x")
    body = eq(FieldAcc(Var(v), fname), Old(FieldAcc(Var(v), fname)))
    if guard_var is not None:
        body = implies(not_(eq(Var(v), guard_var)), body)
    return Quant("forall", v, AllSet(cls), body)


def step_frame(m: Model, cls_name: str, phase: str, actor: Expr) -> Expr:
    """Frame for a single-instance exec step: every (class, field) outside the
    write footprint is unchanged for all instances; footprint fields written
    through self are unchanged for instances other than the actor; fields
    written through other-instance paths are constrained by the contract."""
    fp = write_footprint(m, cls_name, phase)
    funcs = phase_function_fields(m, m.class_map[cls_name], phase)
    parts: list[Expr] = [eq(PhaseRef(), Old(PhaseRef()))]
    for D in m.classes:
        names = [f.name for f in D.fields] + ["executed"]
        for fname in names:
            if funcs.get(fname) == D.name:
                continue
            if (D.name, fname) in fp:
                parts.append(_unchanged_field(D.name, fname, actor))
            else:
                parts.append(_unchanged_field(D.name, fname))
    return and_(*parts)


def full_frame(m: Model) -> Expr:
    """All mutable instance fields unchanged (phase changes touch only the
    phase variable and the executed flags)."""
    parts = []
    for D in m.classes:
        for f in D.fields:
            parts.append(_unchanged_field(D.name, f.name))
    return and_(*parts)


def input_change(m: Model) -> Expr:
    """Every non-input field (executed included) is preserved; inputs free."""
    parts = []
    for D in m.classes:
        for f in D.fields:
            if not f.is_input:
                parts.append(_unchanged_field(D.name, f.name))
        parts.append(_unchanged_field(D.name, "executed"))
    return and_(*parts)


# ---------------------------------------------------------------------------
# global entailment checks


def build_checks(m: Model, inv: Expr, prop: Expr,
                 gprime: Optional[GPrimeMap] = None, card_bound: int = 4,
                 prop_phase: Optional[str] = None) -> list[VerificationTask]:
    """One task per §-display: establishment/stability/preservation for every
    self-loop phase and class, initialization, every phase edge, the implicit
    reset, and the property implication."""
    ctx = _ctx(m, card_bound)
    sched = m.scheduler
    tasks: list[VerificationTask] = []

    exec_cache: dict[tuple[str, str], Contract] = {}

    def execc(cls: str, phase: str) -> Contract:
        if (cls, phase) not in exec_cache:
            exec_cache[(cls, phase)] = exec_contract(m, cls, phase)
        return exec_cache[(cls, phase)]

    for t in sched.transitions:
        if not t.is_self_loop:
            continue
        p = t.source
        for C in m.classes:
            gp = gprime_for(gprime, p, C.name)
            c = Var("c")
            gp_c = instantiate(gp, c)
            consts = {"c": C.name}
            tasks.append(make_task(
                ctx, f"establishment_{C.name}_{p}", "Establishment",
                implies(and_(inv, t.guard), gp_c), consts,
                {"phase": p, "cls": C.name}))
            for D in m.classes:
                d = Var("d")
                td = instantiate(execc(D.name, p).formula, d)
                ante = [Old(and_(inv, gp_c)), td, FieldAcc(d, "executed"),
                        step_frame(m, D.name, p, d)]
                if D.name == C.name:
                    ante.append(not_(eq(c, d)))
                tasks.append(make_task(
                    ctx, f"stability_{C.name}_{D.name}_{p}", "Stability",
                    implies(and_(*ante), gp_c),
                    {"c": C.name, "d": D.name},
                    {"phase": p, "cls": C.name, "other": D.name}))
            tc = instantiate(execc(C.name, p).formula, c)
            main = implies(
                and_(Old(and_(inv, eq(PhaseRef(), PhaseVal(p)), gp_c)),
                     tc, FieldAcc(c, "executed"),
                     step_frame(m, C.name, p, c)),
                inv)
            tasks.append(make_task(
                ctx, f"selfloop_{C.name}_{p}", "SelfLoopPreservation",
                main, consts, {"phase": p, "cls": C.name}))

    init_parts = []
    for C in m.classes:
        ic = init_contract(m, C.name)
        v = M.fresh_name("x")
        init_parts.append(Quant(
            "forall", v, AllSet(C.name),
            and_(instantiate(ic.formula, Var(v)),
                 not_(FieldAcc(Var(v), "executed")))))
    tasks.append(make_task(
        ctx, "init", "Init",
        implies(and_(*init_parts, eq(PhaseRef(), PhaseVal(sched.initial))), inv),
        {}, {}))

    for t in sched.transitions:
        if t.is_self_loop:
            continue
        pre = Old(and_(inv, eq(PhaseRef(), PhaseVal(t.source)), t.guard))
        post_phase = eq(PhaseRef(), PhaseVal(t.target))
        reset_flags = _all_classes_quant(
            m, lambda x: not_(FieldAcc(x, "executed")))
        if t.target == sched.final:
            tick_parts = []
            for C in m.classes:
                kc = tick_contract(m, C.name)
                v = M.fresh_name("x")
                tick_parts.append(Quant(
                    "forall", v, AllSet(C.name),
                    and_(not_(FieldAcc(Var(v), "executed")),
                         instantiate(kc.formula, Var(v)))))
            f = implies(and_(pre, post_phase, *tick_parts), inv)
            tasks.append(make_task(
                ctx, f"phasefinal_{t.source}_{t.target}", "PhaseFinal", f, {},
                {"edge": [t.source, t.target]}))
        else:
            f = implies(and_(pre, post_phase, reset_flags, full_frame(m)), inv)
            tasks.append(make_task(
                ctx, f"phase_{t.source}_{t.target}", "PhaseNonFinal", f, {},
                {"edge": [t.source, t.target]}))

    reset = implies(
        and_(Old(and_(inv, eq(PhaseRef(), PhaseVal(sched.final)))),
             input_change(m),
             eq(PhaseRef(), PhaseVal(sched.initial))),
        inv)
    tasks.append(make_task(ctx, "reset", "Reset", reset, {},
                           {"edge": [sched.final, sched.initial]}))

    target_phase = prop_phase or sched.final
    tasks.append(make_task(
        ctx, "propimpl", "PropertyImplication",
        implies(and_(inv, eq(PhaseRef(), PhaseVal(target_phase))), prop),
        {}, {"phase": target_phase}))
    return tasks


# ---------------------------------------------------------------------------
# local contract obligations (independent direct encoding of exec/init/tick)


class _Ssa:
    """SSA-style relational encoding of an effect: each primitive statement
    introduces fresh function symbols with defining axioms, independent of the
    symbolic-map transformation it is used to validate."""

    def __init__(self, enc: Encoder, m: Model, cls: ClassDecl, const: str,
                 prefix: str):
        self.enc = enc
        self.m = m
        self.cls = cls
        self.const = const
        self.prefix = prefix
        self.k = 0
        self.table: dict[tuple[str, str], str] = {}
        self.decls: list[str] = []
        self.axioms: list[str] = []

    def resolver(self):
        table = self.table
        return lambda cls, fname: table.get((cls, fname)) or PRE(cls, fname)

    def env(self) -> EncEnv:
        return EncEnv({self.const: self.cls.name, "self": self.cls.name},
                      self.resolver(), "phase__pre")

    def cur(self, cls: str, fname: str) -> str:
        return self.table.get((cls, fname)) or PRE(cls, fname)

    def declare(self, cls: str, fname: str) -> str:
        self.k += 1
        cd = self.m.class_map[cls]
        ty = "Bool" if fname == "executed" else self.enc.type_sort(
            cd.field_map[fname].ty)
        name = f"{self.prefix}__{sanitize(cls)}__{sanitize(fname)}__s{self.k}"
        self.decls.append(
            f"(declare-fun {name} ({self.enc.sort(cls)}) {ty})")
        return name

    def enc_expr(self, e: Expr, extra: Optional[dict[str, str]] = None) -> str:
        env = self.env()
        for k, v in (extra or {}).items():
            env = env.bind(k, v)
        e = M.subst_self(e, Var(self.const))
        return self.enc.encode(e, env)

    def run(self, s: M.Stmt) -> None:
        enc, cls = self.enc, self.cls
        if isinstance(s, M.Skip):
            return
        if isinstance(s, M.Seq):
            for inner in s.stmts:
                self.run(inner)
            return
        if isinstance(s, M.Assign) and s.owner is None:
            value = self.enc_expr(s.value)
            fd = cls.field_map[s.field_name]
            if fd.is_timer:
                value = f"(tm_active {value})"
            cur = self.cur(cls.name, s.field_name)
            new = self.declare(cls.name, s.field_name)
            x = enc.fresh("x")
            self.axioms.append(
                f"(assert (forall (({x} {enc.sort(cls.name)})) "
                f"(= ({new} {x}) (ite (= {x} {sanitize(self.const)}) "
                f"{value} ({cur} {x})))))")
            self.table[(cls.name, s.field_name)] = new
            return
        if isinstance(s, M.Assign):  # through a grounded ref
            rd = cls.ref_map[s.owner.name]  # type: ignore[union-attr]
            value = self.enc_expr(s.value)
            tgt_null = (f"({enc.ref_null_sym(cls.name, rd.name)} "
                        f"{sanitize(self.const)})")
            tgt_val = (f"({enc.ref_val_sym(cls.name, rd.name)} "
                       f"{sanitize(self.const)})")
            cur = self.cur(rd.cls, s.field_name)
            new = self.declare(rd.cls, s.field_name)
            x = enc.fresh("x")
            self.axioms.append(
                f"(assert (forall (({x} {enc.sort(rd.cls)})) "
                f"(= ({new} {x}) (ite (and (not {tgt_null}) (= {x} {tgt_val})) "
                f"{value} ({cur} {x})))))")
            self.table[(rd.cls, s.field_name)] = new
            return
        if isinstance(s, M.Havoc):
            cur = self.cur(cls.name, s.field_name)
            new = self.declare(cls.name, s.field_name)
            x = enc.fresh("x")
            self.axioms.append(
                f"(assert (forall (({x} {enc.sort(cls.name)})) "
                f"(=> (not (= {x} {sanitize(self.const)})) "
                f"(= ({new} {x}) ({cur} {x})))))")
            self.table[(cls.name, s.field_name)] = new
            return
        if isinstance(s, M.IfStmt):
            cond = self.enc_expr(s.cond)
            snap = dict(self.table)
            self.run(s.then)
            t1 = dict(self.table)
            self.table = dict(snap)
            if s.els is not None:
                self.run(s.els)
            t2 = dict(self.table)
            self.table = dict(snap)
            for key in set(t1) | set(t2):
                a = t1.get(key) or self.cur(*key)
                b = t2.get(key) or self.cur(*key)
                if a == b:
                    self.table[key] = a
                    continue
                new = self.declare(*key)
                x = enc.fresh("x")
                self.axioms.append(
                    f"(assert (forall (({x} {enc.sort(key[0])})) "
                    f"(= ({new} {x}) (ite {cond} ({a} {x}) ({b} {x})))))")
                self.table[key] = new
            return
        if isinstance(s, M.QuantAssign):
            elem = M._set_expr_elem(self.m, cls, s.dom)
            cur = self.cur(elem, s.field_name)
            new = self.declare(elem, s.field_name)
            y = enc.fresh("y")
            dom = M.subst_self(s.dom, Var(self.const))
            mem = enc.member(y, dom, self.env().bind(y, elem))
            value = self.enc_expr(M.substitute(s.value, {s.var: Var(y)}),
                                  {y: elem})
            self.axioms.append(
                f"(assert (forall (({y} {enc.sort(elem)})) "
                f"(= ({new} {y}) (ite {mem} {value} ({cur} {y})))))")
            self.table[(elem, s.field_name)] = new
            return
        if isinstance(s, (M.Assume, M.AssertStmt)):
            raise ContractGenError(
                "assume/assert effects have no contract; local obligations "
                "are not generated for them")
        raise M.SraError(f"cannot encode statement {type(s).__name__}")


def _exec_relation(enc: Encoder, m: Model, cls: ClassDecl, phase: str,
                   const: str) -> tuple[list[str], str]:
    """Direct relational encoding of exec(phase) on the instance `const`:
    declarations+axioms, and the relation formula (a disjunction over the
    first-enabled transition plus the stutter case)."""
    decls: list[str] = []
    branches: list[str] = []
    pre_env = EncEnv({const: cls.name}, PRE, "phase__pre")

    def enabled(t: M.Transition) -> str:
        loc = (f"(= ({PRE(cls.name, 'location')} {sanitize(const)}) "
               f"{sanitize(t.start)})")
        g = enc.encode(M.subst_self(t.guard, Var(const)), pre_env)
        return f"(and {loc} {g})"

    transitions = cls.phase_transitions(phase)
    for idx, t in enumerate(transitions):
        ssa = _Ssa(enc, m, cls, const, f"{sanitize(cls.name)}_{sanitize(t.name)}")
        ssa.run(t.effect)
        decls.extend(ssa.decls)
        decls.extend(ssa.axioms)
        fired = [enabled(t)]
        for prior in transitions[:idx]:
            fired.append(f"(not {enabled(prior)})")
        posts = _post_equalities(enc, m, cls, const, ssa, t)
        branches.append("(and " + " ".join(fired + posts) + ")")
    stutter = [f"(not {enabled(t)})" for t in transitions]
    stutter.extend(_identity_posts(enc, m, cls, const))
    branches.append("(and " + " ".join(stutter) + ")"
                    if stutter else "true")
    rel = branches[0] if len(branches) == 1 else "(or " + " ".join(branches) + ")"
    return decls, rel


def _post_equalities(enc: Encoder, m: Model, cls: ClassDecl, const: str,
                     ssa: _Ssa, t: M.Transition) -> list[str]:
    c = sanitize(const)
    out = [f"(= phase__post phase__pre)"]
    consumed = set(M.guard_event_list(cls, t.guard))
    for D in m.classes:
        names = [f.name for f in D.fields] + ["executed"]
        for fname in names:
            cur = ssa.cur(D.name, fname)
            x = enc.fresh("x")
            rhs = f"({cur} {x})"
            if D.name == cls.name:
                if fname == "location":
                    rhs = f"(ite (= {x} {c}) {sanitize(t.end)} {rhs})"
                elif fname in consumed:
                    rhs = f"(ite (= {x} {c}) false {rhs})"
                elif fname == "executed":
                    rhs = f"(ite (= {x} {c}) true {rhs})"
            out.append(f"(forall (({x} {enc.sort(D.name)})) "
                       f"(= ({POST(D.name, fname)} {x}) {rhs}))")
    return out


def _identity_posts(enc: Encoder, m: Model, cls: ClassDecl, const: str) -> list[str]:
    c = sanitize(const)
    out = [f"(= phase__post phase__pre)"]
    for D in m.classes:
        names = [f.name for f in D.fields] + ["executed"]
        for fname in names:
            x = enc.fresh("x")
            rhs = f"({PRE(D.name, fname)} {x})"
            if D.name == cls.name and fname == "executed":
                rhs = f"(ite (= {x} {c}) true {rhs})"
            out.append(f"(forall (({x} {enc.sort(D.name)})) "
                       f"(= ({POST(D.name, fname)} {x}) {rhs}))")
    return out


def _init_relation(enc: Encoder, m: Model, cls: ClassDecl, const: str) -> str:
    """Direct single-state encoding of init(): declared values, events false,
    timers inactive, executed false (post vocabulary)."""
    c = sanitize(const)
    env = enc.env({const: cls.name})
    parts = []
    for f in cls.fields:
        if f.is_input:
            continue
        sym = f"({POST(cls.name, f.name)} {c})"
        if f.is_event:
            parts.append(f"(= {sym} false)")
        elif f.is_timer:
            parts.append(f"(= {sym} tm_inactive)")
        else:
            parts.append(f"(= {sym} {enc.encode(f.init, env)})")
    parts.append(f"(= ({POST(cls.name, 'executed')} {c}) false)")
    return "(and " + " ".join(parts) + ")"


def _tick_relation(enc: Encoder, m: Model, cls: ClassDecl, const: str) -> str:
    c = sanitize(const)
    parts = []
    for f in cls.fields:
        pre = f"({PRE(cls.name, f.name)} {c})"
        post = f"({POST(cls.name, f.name)} {c})"
        if f.is_timer:
            parts.append(
                f"(= {post} (ite ((_ is tm_active) {pre}) "
                f"(ite (> (tm_count {pre}) 1) "
                f"(tm_active (- (tm_count {pre}) 1)) tm_inactive) "
                f"tm_inactive))")
        else:
            parts.append(f"(= {post} {pre})")
    parts.append(f"(= ({POST(cls.name, 'executed')} {c}) "
                 f"({PRE(cls.name, 'executed')} {c}))")
    return "(and " + " ".join(parts) + ")"


def build_local_contract_tasks(m: Model, card_bound: int = 4
                               ) -> list[VerificationTask]:
    """Per class and phase: the direct relational encoding of exec implies
    the generated contract; likewise for init and tick."""
    ctx = _ctx(m, card_bound)
    enc = ctx.encoder
    tasks: list[VerificationTask] = []
    for C in m.classes:
        const = "c"
        for phase in m.scheduler.phases:
            decls, rel = _exec_relation(enc, m, C, phase, const)
            contract = instantiate(exec_contract(m, C.name, phase).formula,
                                   Var(const))
            tasks.append(make_task(
                ctx, f"local_exec_{C.name}_{phase}", "LocalContract",
                contract, {const: C.name},
                {"cls": C.name, "phase": phase, "method": "exec"},
                tuple(decls) + (f"(assert {rel})",)))
        rel = _init_relation(enc, m, C, const)
        contract = instantiate(init_contract(m, C.name).formula, Var(const))
        tasks.append(make_task(
            ctx, f"local_init_{C.name}", "LocalContract", contract,
            {const: C.name}, {"cls": C.name, "method": "init"},
            (f"(assert {rel})",)))
        rel = _tick_relation(enc, m, C, const)
        contract = instantiate(tick_contract(m, C.name).formula, Var(const))
        tasks.append(make_task(
            ctx, f"local_tick_{C.name}", "LocalContract", contract,
            {const: C.name}, {"cls": C.name, "method": "tick"},
            (f"(assert {rel})",)))
    return tasks


def make_lemma_task(m: Model, task_id: str, formula: Expr,
                    consts: dict[str, str], meta: Optional[dict] = None,
                    card_bound: int = 4) -> VerificationTask:
    """Grounding equivalence lemmas reuse the standard task surface."""
    return make_task(_ctx(m, card_bound), task_id, "GroundingLemma", formula,
                     consts, meta or {})

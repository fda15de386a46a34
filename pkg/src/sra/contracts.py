"""Automatic generation of local contracts (init / exec-per-phase / tick)
from class declarations by forward symbolic execution of transition effects.

The symbolic map sends every assigned scalar to an expression over pre-state
symbols (pre-state reads are old-wrapped) and every quantified-assignment
target to a pointwise function update; havoc produces the unconstrained
marker, contributing no conjunct."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import model as M
from .model import (AllSet, Assign, AssertStmt, Assume, Binary, BoolLit,
                    ClassDecl, EnumVal, Epsilon, EventType, Expr, FieldAcc,
                    FieldDecl, Havoc, IfStmt, InactiveLit, IntLit, Ite, Model,
                    Not, Old, Quant, QuantAssign, SelfField, SelfObj, Seq,
                    Skip, SraError, Stmt, TimerActive, TimerCount, Transition,
                    Var, and_, eq, fresh_name, guard_event_free_part,
                    guard_event_list, implies, not_, or_, substitute,
                    subst_self, true_)


class ContractGenError(SraError):
    pass


@dataclass
class FuncEntry:
    """Pointwise update of a field written through other-instance paths:
    a function of the bound variable `var`, chaining back to old values."""

    cls: str
    var: str
    body: Expr

    def at(self, obj: Expr) -> Expr:
        return substitute(self.body, {self.var: obj})


@dataclass
class SymbolicMap:
    cls: ClassDecl
    scalars: dict[str, Expr] = field(default_factory=dict)   # Epsilon allowed
    funcs: dict[str, FuncEntry] = field(default_factory=dict)

    def copy(self) -> "SymbolicMap":
        out = SymbolicMap(self.cls, dict(self.scalars), {})
        for k, f in self.funcs.items():
            out.funcs[k] = FuncEntry(f.cls, f.var, f.body)
        return out


def contains_epsilon(e: Expr) -> bool:
    if isinstance(e, Epsilon):
        return True
    found = False

    def probe(sub: Expr) -> Expr:
        nonlocal found
        if contains_epsilon(sub):
            found = True
        return sub

    M.map_children(e, probe)
    return found


def _collapse_eps(e: Expr) -> Expr:
    """Any expression contaminated by a havoc value is itself unconstrained,
    except if-then-else merges, which stay branch-precise."""
    if isinstance(e, Ite) and not contains_epsilon(e.cond):
        t, f = _collapse_eps(e.then), _collapse_eps(e.els)
        if isinstance(t, Epsilon) and isinstance(f, Epsilon):
            return Epsilon()
        return Ite(e.cond, t, f)
    if contains_epsilon(e):
        return Epsilon()
    return e


def _classify_targets(effect: Stmt, cls: ClassDecl, m: Model
                      ) -> tuple[set[str], dict[str, str]]:
    """Scalars assigned through self vs fields written through other-instance
    paths (quantified assignments and ref-owner assignments); a field written
    both ways is treated as a function field throughout."""
    scalars: set[str] = set()
    funcs: dict[str, str] = {}  # field name -> owning class
    for s in M.stmt_iter(effect):
        if isinstance(s, (Assume, AssertStmt)):
            raise ContractGenError(
                "assume/assert statements have no effect transformation; "
                "remove them before generating contracts")
        if isinstance(s, Assign) and s.owner is None:
            scalars.add(s.field_name)
        elif isinstance(s, Havoc):
            scalars.add(s.field_name)
        elif isinstance(s, Assign):
            rd = cls.ref_map[s.owner.name]  # type: ignore[union-attr]
            _add_func(funcs, s.field_name, rd.cls)
        elif isinstance(s, QuantAssign):
            _add_func(funcs, s.field_name, M._set_expr_elem(m, cls, s.dom))
    for fname, owner in list(funcs.items()):
        if owner == cls.name and fname in scalars:
            scalars.discard(fname)
    return scalars, funcs


def _add_func(funcs: dict[str, str], fname: str, owner: str) -> None:
    if funcs.get(fname, owner) != owner:
        raise ContractGenError(
            f"field {fname} is written through two different classes in one "
            "effect; rename one of the fields")
    funcs[fname] = owner


def _initial_map(effect: Stmt, cls: ClassDecl, m: Model) -> SymbolicMap:
    scalars, funcs = _classify_targets(effect, cls, m)
    sm = SymbolicMap(cls)
    for v in scalars:
        sm.scalars[v] = Old(SelfField(v))
    for fname, owner in funcs.items():
        y = fresh_name("y")
        sm.funcs[fname] = FuncEntry(owner, y, Old(FieldAcc(Var(y), fname)))
    return sm


def subst_in_map(e: Expr, sm: SymbolicMap, m: Model,
                 env: Optional[dict[str, str]] = None) -> Expr:
    """Replace every mutable symbol read in e by its current symbolic value
    (old-wrapping reads the map does not track)."""
    cls = sm.cls

    def go(e: Expr, env: dict[str, str]) -> Expr:
        if isinstance(e, SelfField):
            name = e.name
            if name in sm.scalars:
                return sm.scalars[name]
            if name in sm.funcs and sm.funcs[name].cls == cls.name:
                return sm.funcs[name].at(SelfObj())
            fd = cls.field_map.get(name)
            if fd is not None or name == "executed":
                return Old(e)
            return e  # params, sets, refs are immutable
        if isinstance(e, FieldAcc):
            obj = go(e.obj, env)
            fe = sm.funcs.get(e.name)
            ocls = _obj_cls(e.obj, cls, m, env)
            if fe is not None and ocls == fe.cls:
                return fe.at(obj)
            if ocls is not None:
                cd = m.class_map[ocls]
                if e.name == "executed" or e.name in cd.field_map:
                    return Old(FieldAcc(obj, e.name))
            return FieldAcc(obj, e.name)
        if isinstance(e, Old):
            raise ContractGenError("old(...) cannot appear in effects")
        if isinstance(e, Quant):
            elem = _dom_cls(e.dom, cls, m, env)
            env2 = dict(env)
            if elem:
                env2[e.var] = elem
            return Quant(e.kind, e.var, go(e.dom, env), go(e.body, env2),
                         span=e.span)
        return M.map_children(e, lambda sub: go(sub, env))

    return go(e, env or {})


def _obj_cls(obj: Expr, cls: ClassDecl, m: Model,
             env: Optional[dict[str, str]] = None) -> Optional[str]:
    """Class of an object-valued expression within an effect."""
    if isinstance(obj, SelfObj):
        return cls.name
    if isinstance(obj, SelfField) and obj.name in cls.ref_map:
        return cls.ref_map[obj.name].cls
    if isinstance(obj, Var) and env:
        return env.get(obj.name)
    if isinstance(obj, FieldAcc):
        ocls = _obj_cls(obj.obj, cls, m, env)
        if ocls:
            rd = m.class_map[ocls].ref_map.get(obj.name)
            if rd:
                return rd.cls
    return None


def _dom_cls(dom: Expr, cls: ClassDecl, m: Model,
             env: Optional[dict[str, str]] = None) -> Optional[str]:
    """Element class of a set-valued expression within an effect."""
    if isinstance(dom, M.AllSet):
        return dom.cls
    if isinstance(dom, SelfField) and dom.name in cls.set_map:
        return cls.set_map[dom.name].elem
    if isinstance(dom, FieldAcc):
        ocls = _obj_cls(dom.obj, cls, m, env)
        if ocls:
            sd = m.class_map[ocls].set_map.get(dom.name)
            if sd:
                return sd.elem
    if isinstance(dom, Binary) and dom.op == "union":
        return (_dom_cls(dom.left, cls, m, env)
                or _dom_cls(dom.right, cls, m, env))
    return None


def transform_stmt(s: Stmt, sm: SymbolicMap, m: Model,
                   env: Optional[dict[str, str]] = None) -> SymbolicMap:
    """Forward symbolic execution: one map per program point."""
    cls = sm.cls
    if isinstance(s, Skip):
        return sm
    if isinstance(s, Seq):
        cur = sm
        for inner in s.stmts:
            cur = transform_stmt(inner, cur, m, env)
        return cur
    if isinstance(s, Assign):
        value = _collapse_eps(subst_in_map(s.value, sm, m))
        out = sm.copy()
        if s.owner is None and s.field_name in sm.scalars:
            out.scalars[s.field_name] = value
            return out
        # write through self into a functionised own-class field, or through a ref
        fe = out.funcs[s.field_name]
        target: Expr = SelfObj() if s.owner is None else s.owner
        cond = eq(Var(fe.var), target)
        fe.body = Ite(cond, value, fe.body)
        return out
    if isinstance(s, Havoc):
        out = sm.copy()
        out.scalars[s.field_name] = Epsilon()
        return out
    if isinstance(s, IfStmt):
        cond = _collapse_eps(subst_in_map(s.cond, sm, m))
        m1 = transform_stmt(s.then, sm, m, env)
        m2 = transform_stmt(s.els, sm, m, env) if s.els is not None else sm
        out = sm.copy()
        if contains_epsilon(cond):
            for v in out.scalars:
                if m1.scalars[v] != m2.scalars[v]:
                    out.scalars[v] = Epsilon()
                else:
                    out.scalars[v] = m1.scalars[v]
            for fname, fe in out.funcs.items():
                b1, b2 = m1.funcs[fname].body, m2.funcs[fname].body
                fe.body = b1 if b1 == b2 else Epsilon()
            return out
        for v in out.scalars:
            v1, v2 = m1.scalars[v], m2.scalars[v]
            out.scalars[v] = v1 if v1 == v2 else Ite(cond, v1, v2)
        for fname, fe in out.funcs.items():
            b1 = m1.funcs[fname].body
            b2 = substitute(m2.funcs[fname].body,
                            {m2.funcs[fname].var: Var(fe.var)})
            fe.body = b1 if b1 == b2 else Ite(cond, b1, b2)
        return out
    if isinstance(s, QuantAssign):
        out = sm.copy()
        fe = out.funcs[s.field_name]
        dom = subst_in_map(s.dom, sm, m)  # set expressions are immutable
        value = substitute(s.value, {s.var: Var(fe.var)})
        value = _collapse_eps(subst_in_map(value, sm, m, {fe.var: fe.cls}))
        fe.body = Ite(Binary("in", Var(fe.var), dom), value, fe.body)
        return out
    if isinstance(s, (Assume, AssertStmt)):
        raise ContractGenError(
            "assume/assert statements have no effect transformation")
    raise SraError(f"cannot transform {type(s).__name__}")


def transform_effect(effect: Stmt, cls: ClassDecl, m: Model) -> SymbolicMap:
    """Symbolic map of a whole (type-checked, assume/assert-free) effect."""
    return transform_stmt(effect, _initial_map(effect, cls, m), m)


# ---------------------------------------------------------------------------
# formulas


def _value_constraint(target: Expr, entry: Expr, is_timer: bool) -> Expr:
    """post-target equals the symbolic entry; Epsilon contributes nothing and
    conditional entries constrain branch-wise."""
    if isinstance(entry, Epsilon):
        return true_()
    if isinstance(entry, Ite) and (is_timer or contains_epsilon(entry.then)
                                   or contains_epsilon(entry.els)):
        then_c = _value_constraint(target, entry.then, is_timer)
        else_c = _value_constraint(target, entry.els, is_timer)
        return and_(implies(entry.cond, then_c),
                    implies(not_(entry.cond), else_c))
    if is_timer and not _timer_shaped(entry):
        # integer-valued activation: t becomes active with that count
        return and_(TimerActive(target), eq(TimerCount(target), entry))
    return eq(target, entry)


def _timer_shaped(e: Expr) -> bool:
    return isinstance(e, (InactiveLit,)) or (
        isinstance(e, Old) and _timer_shaped(e.arg)) or (
        isinstance(e, (SelfField, FieldAcc)))


def effect_formula(sm: SymbolicMap, m: Model,
                   consumed: tuple[str, ...] = ()) -> Expr:
    """Conjunction of post = mapped-pre equalities: plain for self scalars,
    universally quantified over the element class's All-set for function
    fields.  Consumed guard events are excluded (the reset overrides them)."""
    cls = sm.cls
    parts: list[Expr] = []
    for v in _field_order(cls, sm.scalars):
        if v in consumed:
            continue
        fd = cls.field_map[v]
        parts.append(_value_constraint(SelfField(v), sm.scalars[v], fd.is_timer))
    for fname in sorted(sm.funcs):
        fe = sm.funcs[fname]
        y = fresh_name("x")
        body = substitute(fe.body, {fe.var: Var(y)})
        is_timer = m.class_map[fe.cls].field_map[fname].is_timer
        constraint = _value_constraint(FieldAcc(Var(y), fname), body, is_timer)
        if fname in consumed and fe.cls == cls.name:
            constraint = implies(not_(eq(Var(y), SelfObj())), constraint)
        parts.append(Quant("forall", y, AllSet(fe.cls), constraint))
    return and_(*parts)


def _field_order(cls: ClassDecl, names) -> list[str]:
    order = {f.name: i for i, f in enumerate(cls.fields)}
    return sorted(names, key=lambda n: order.get(n, len(order)))


def extended_guard(cls: ClassDecl, t: Transition) -> Expr:
    """Guard conjoined with the negation of every earlier phase-matching guard
    from the same start location (declaration-order priority)."""
    negs: list[Expr] = []
    for prior in cls.phase_transitions(t.phase):
        if prior is t:
            break
        if prior.start == t.start:
            negs.append(not_(prior.guard))
    return and_(t.guard, *negs)


def phase_function_fields(m: Model, cls: ClassDecl, phase: str
                          ) -> dict[str, str]:
    """Fields written through other-instance paths by any phase transition."""
    out: dict[str, str] = {}
    for t in cls.phase_transitions(phase):
        _, funcs = _classify_targets(t.effect, cls, m)
        out.update(funcs)
    return out


def _unchanged_own(cls: ClassDecl, skip: set[str],
                   func_fields: dict[str, str]) -> list[Expr]:
    parts = []
    for f in cls.fields:
        if f.name in skip:
            continue
        if f.name in func_fields and func_fields[f.name] == cls.name:
            continue  # framed over the whole All-set instead
        parts.append(eq(SelfField(f.name), Old(SelfField(f.name))))
    return parts


def _unchanged_all(fname: str, owner_cls: str) -> Expr:
    y = fresh_name("x")
    return Quant("forall", y, AllSet(owner_cls),
                 eq(FieldAcc(Var(y), fname), Old(FieldAcc(Var(y), fname))))


def transition_formula(m: Model, cls: ClassDecl, t: Transition) -> Expr:
    """old(location=start ∧ extended guard) ∧ effect ∧ location=end ∧
    executed ∧ consumed events false ∧ frame for everything untouched."""
    func_fields = phase_function_fields(m, cls, t.phase)
    consumed = guard_event_list(cls, t.guard)
    sm = transform_effect(t.effect, cls, m)
    pre = Old(and_(eq(SelfField("location"), _loc_value(m, cls, t.start)),
                   extended_guard(cls, t)))
    parts: list[Expr] = [pre,
                         effect_formula(sm, m, consumed),
                         eq(SelfField("location"), _loc_value(m, cls, t.end)),
                         SelfField("executed")]
    for ev in consumed:
        parts.append(eq(SelfField(ev), BoolLit(False)))
    touched = set(sm.scalars) | set(consumed) | {"location"}
    parts.extend(_unchanged_own(cls, touched, func_fields))
    for fname, owner in sorted(func_fields.items()):
        if fname not in sm.funcs:
            parts.append(_unchanged_all(fname, owner))
    return and_(*parts)


def stutter_formula(m: Model, cls: ClassDecl, phase: str) -> Expr:
    """Everything unchanged, the flag set, and no extended guard enabled."""
    func_fields = phase_function_fields(m, cls, phase)
    parts: list[Expr] = []
    parts.extend(_unchanged_own(cls, set(), func_fields))
    for fname, owner in sorted(func_fields.items()):
        parts.append(_unchanged_all(fname, owner))
    parts.append(SelfField("executed"))
    for t in cls.phase_transitions(phase):
        parts.append(not_(Old(and_(
            eq(SelfField("location"), _loc_value(m, cls, t.start)),
            extended_guard(cls, t)))))
    return and_(*parts)


def _loc_value(m: Model, cls: ClassDecl, name: str) -> EnumVal:
    enum = cls.location.ty.name  # type: ignore[union-attr]
    return EnumVal(enum, name)


@dataclass(frozen=True)
class Contract:
    kind: str                # init | exec | tick
    cls: str
    phase: Optional[str]
    formula: Expr            # over the implicit self; exec/tick are two-state
    disjuncts: tuple[tuple[str, Expr], ...] = ()

    def label(self) -> str:
        if self.kind == "exec":
            return f"exec({self.cls}, {self.phase})"
        return f"{self.kind}({self.cls})"


def exec_contract(m: Model, cls_name: str, phase: str) -> Contract:
    """Disjunction of every phase-matching transition formula plus the
    stutter case."""
    cls = m.class_map[cls_name]
    disjuncts: list[tuple[str, Expr]] = []
    for t in cls.phase_transitions(phase):
        disjuncts.append((t.name, transition_formula(m, cls, t)))
    disjuncts.append(("stutter", stutter_formula(m, cls, phase)))
    formula = or_(*(f for _, f in disjuncts))
    return Contract("exec", cls_name, phase, formula, tuple(disjuncts))


def init_contract(m: Model, cls_name: str) -> Contract:
    """Single-state conjunction: declared initial values, events false,
    timers inactive, flag down."""
    cls = m.class_map[cls_name]
    parts: list[Expr] = []
    for f in cls.fields:
        if f.is_input:
            continue
        if f.is_event:
            parts.append(eq(SelfField(f.name), BoolLit(False)))
        elif f.is_timer:
            parts.append(eq(SelfField(f.name), InactiveLit()))
        else:
            if f.init is None:
                raise ContractGenError(
                    f"{cls_name}.{f.name} has no declared initial value")
            parts.append(eq(SelfField(f.name), f.init))
    parts.append(not_(SelfField("executed")))
    return Contract("init", cls_name, None, and_(*parts))


def tick_contract(m: Model, cls_name: str) -> Contract:
    """Per timer: active n>1 decrements, active 1 expires, inactive stays;
    every other field unchanged."""
    cls = m.class_map[cls_name]
    parts: list[Expr] = []
    for f in cls.fields:
        t = SelfField(f.name)
        if f.is_timer:
            old_active = Old(TimerActive(t))
            parts.append(implies(
                and_(old_active, Binary("lt", IntLit(1), Old(TimerCount(t)))),
                and_(TimerActive(t),
                     eq(TimerCount(t),
                        Binary("sub", Old(TimerCount(t)), IntLit(1))))))
            parts.append(implies(
                and_(old_active, eq(Old(TimerCount(t)), IntLit(1))),
                eq(t, InactiveLit())))
            parts.append(implies(Old(eq(t, InactiveLit())),
                                 eq(t, InactiveLit())))
        else:
            parts.append(eq(t, Old(t)))
    parts.append(eq(SelfField("executed"), Old(SelfField("executed"))))
    return Contract("tick", cls_name, None, and_(*parts))


def all_contracts(m: Model) -> list[Contract]:
    out = []
    for c in m.classes:
        out.append(init_contract(m, c.name))
        for phase in m.scheduler.phases:
            out.append(exec_contract(m, c.name, phase))
        out.append(tick_contract(m, c.name))
    return out


def contract_text(c: Contract) -> str:
    lines = [f"contract {c.label()}:"]
    if c.kind == "exec":
        for i, (name, f) in enumerate(c.disjuncts):
            prefix = "   " if i == 0 else "|| "
            lines.append(f"  {prefix}[{name}] {M.expr_text(f)}")
    else:
        lines.append(f"  {M.expr_text(c.formula)}")
    return "\n".join(lines)


def instantiate(formula: Expr, inst: Expr) -> Expr:
    """Bind the implicit self of a contract formula to a concrete object."""
    return subst_self(formula, inst)

"""Abstract syntax and semantic domain types for SRA system descriptions.

Everything here is immutable after construction except GlobalState, which is
the simulator's mutable snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Optional, Union


class SraError(Exception):
    """Base class for all toolchain errors."""


class TypeMismatch(SraError):
    def __init__(self, node, msg: str) -> None:
        super().__init__(msg)
        self.node = node
        self.msg = msg


# ---------------------------------------------------------------------------
# Source locations


@dataclass(frozen=True)
class Span:
    file: str
    start: int
    end: int
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


def _span_field():
    return field(default=None, kw_only=True, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class TypeExpr:
    pass


@dataclass(frozen=True)
class IntType(TypeExpr):
    def __str__(self) -> str:
        return "Int"


@dataclass(frozen=True)
class BoolType(TypeExpr):
    def __str__(self) -> str:
        return "Bool"


@dataclass(frozen=True)
class EnumType(TypeExpr):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TimerType(TypeExpr):
    def __str__(self) -> str:
        return "Timer"


@dataclass(frozen=True)
class EventType(TypeExpr):
    def __str__(self) -> str:
        return "Event"


@dataclass(frozen=True)
class ClassType(TypeExpr):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class SetType(TypeExpr):
    elem: str

    def __str__(self) -> str:
        return f"Set<{self.elem}>"


@dataclass(frozen=True)
class PhaseType(TypeExpr):
    def __str__(self) -> str:
        return "PhaseEnum"


@dataclass(frozen=True)
class NullType(TypeExpr):
    """Type of the null literal; comparable with any class type."""

    def __str__(self) -> str:
        return "null"


INT = IntType()
BOOL = BoolType()
TIMER = TimerType()
EVENT = EventType()
PHASE = PhaseType()
NULL = NullType()


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Expr:
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int = 0


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool = False


@dataclass(frozen=True)
class EnumVal(Expr):
    enum: str = ""
    value: str = ""


@dataclass(frozen=True)
class PhaseVal(Expr):
    value: str = ""


@dataclass(frozen=True)
class InactiveLit(Expr):
    pass


@dataclass(frozen=True)
class NullLit(Expr):
    pass


@dataclass(frozen=True)
class Name(Expr):
    """Unresolved identifier; only present in parser output."""

    name: str = ""


@dataclass(frozen=True)
class Var(Expr):
    """Bound variable, or a free instance constant in verification tasks."""

    name: str = ""


@dataclass(frozen=True)
class SelfField(Expr):
    """Field, parameter, set, ref, or the executed flag of the implicit self."""

    name: str = ""


@dataclass(frozen=True)
class FieldAcc(Expr):
    obj: Expr = None  # type: ignore[assignment]
    name: str = ""


@dataclass(frozen=True)
class TimerActive(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class PhaseRef(Expr):
    pass


@dataclass(frozen=True)
class AllSet(Expr):
    cls: Optional[str] = None  # None: union over all classes (pre-resolution)


# Binary operator tags.  Arithmetic/set resolution happens in the checker:
# the parser emits 'add'/'le'/'eq'; set-typed operands become
# 'union'/'subset'/'seteq'.
BINOPS = {
    "add", "sub", "mul",
    "eq", "seteq", "lt", "le",
    "and", "or", "implies",
    "in", "subset", "disjoint", "union",
}


@dataclass(frozen=True)
class Binary(Expr):
    op: str = ""
    left: Expr = None  # type: ignore[assignment]
    right: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Ite(Expr):
    cond: Expr = None  # type: ignore[assignment]
    then: Expr = None  # type: ignore[assignment]
    els: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Card(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Quant(Expr):
    kind: str = "forall"  # 'forall' | 'exists'
    var: str = ""
    dom: Expr = None  # type: ignore[assignment]
    body: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Old(Expr):
    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class SelfObj(Expr):
    """The executing instance itself (contract formulas only)."""


@dataclass(frozen=True)
class TimerCount(Expr):
    """Remaining cycle count of an active timer (contract formulas only)."""

    arg: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Epsilon(Expr):
    """Havoc marker inside symbolic maps: no constraint on the value."""


def true_() -> BoolLit:
    return BoolLit(True)


def false_() -> BoolLit:
    return BoolLit(False)


def and_(*parts: Expr) -> Expr:
    flat = [p for p in parts if not (isinstance(p, BoolLit) and p.value)]
    if not flat:
        return true_()
    out = flat[0]
    for p in flat[1:]:
        out = Binary("and", out, p)
    return out


def or_(*parts: Expr) -> Expr:
    flat = [p for p in parts if not (isinstance(p, BoolLit) and not p.value)]
    if not flat:
        return false_()
    out = flat[0]
    for p in flat[1:]:
        out = Binary("or", out, p)
    return out


def implies(a: Expr, b: Expr) -> Expr:
    return Binary("implies", a, b)


def eq(a: Expr, b: Expr) -> Expr:
    return Binary("eq", a, b)


def not_(a: Expr) -> Expr:
    return Not(a)


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class Stmt:
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Skip(Stmt):
    pass


@dataclass(frozen=True)
class Assign(Stmt):
    field_name: str = ""
    value: Expr = None  # type: ignore[assignment]
    owner: Optional[Expr] = None  # None: self; otherwise a ref-field path


@dataclass(frozen=True)
class Havoc(Stmt):
    field_name: str = ""


@dataclass(frozen=True)
class IfStmt(Stmt):
    cond: Expr = None  # type: ignore[assignment]
    then: Stmt = None  # type: ignore[assignment]
    els: Optional[Stmt] = None


@dataclass(frozen=True)
class QuantAssign(Stmt):
    var: str = ""
    dom: Expr = None  # type: ignore[assignment]
    field_name: str = ""
    value: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Assume(Stmt):
    cond: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class AssertStmt(Stmt):
    cond: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Seq(Stmt):
    stmts: tuple[Stmt, ...] = ()


def seq_of(s: Stmt) -> tuple[Stmt, ...]:
    if isinstance(s, Seq):
        return s.stmts
    if isinstance(s, Skip):
        return ()
    return (s,)


def stmt_iter(s: Stmt) -> Iterator[Stmt]:
    """Yield every primitive statement, descending into sequences and ifs."""
    if isinstance(s, Seq):
        for inner in s.stmts:
            yield from stmt_iter(inner)
    elif isinstance(s, IfStmt):
        yield s
        yield from stmt_iter(s.then)
        if s.els is not None:
            yield from stmt_iter(s.els)
    elif isinstance(s, Skip):
        return
    else:
        yield s


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class EnumDecl:
    name: str
    values: tuple[str, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class FieldDecl:
    """Mutable scalar field: var/input/event/timer declarations."""

    name: str
    ty: TypeExpr
    init: Optional[Expr] = None
    is_input: bool = False
    ghost: bool = False
    span: Optional[Span] = _span_field()

    @property
    def is_event(self) -> bool:
        return isinstance(self.ty, EventType)

    @property
    def is_timer(self) -> bool:
        return isinstance(self.ty, TimerType)


@dataclass(frozen=True)
class ParamDecl:
    name: str
    ty: TypeExpr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SetDecl:
    name: str
    elem: str
    ghost: bool = False
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class RefDecl:
    """Object-valued field derived from a unit-cardinality ghost set."""

    name: str
    cls: str
    grounds: str
    nullable: bool
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Transition:
    name: str
    start: str
    guard: Expr
    end: str
    effect: Stmt
    phase: str
    span: Optional[Span] = _span_field()


ClassMember = Union[FieldDecl, ParamDecl, SetDecl, RefDecl, Transition]


@dataclass(frozen=True)
class ClassDecl:
    name: str
    members: tuple[ClassMember, ...]
    span: Optional[Span] = _span_field()

    @cached_property
    def fields(self) -> tuple[FieldDecl, ...]:
        return tuple(m for m in self.members if isinstance(m, FieldDecl))

    @cached_property
    def params(self) -> tuple[ParamDecl, ...]:
        return tuple(m for m in self.members if isinstance(m, ParamDecl))

    @cached_property
    def sets(self) -> tuple[SetDecl, ...]:
        return tuple(m for m in self.members if isinstance(m, SetDecl))

    @cached_property
    def refs(self) -> tuple[RefDecl, ...]:
        return tuple(m for m in self.members if isinstance(m, RefDecl))

    @cached_property
    def transitions(self) -> tuple[Transition, ...]:
        return tuple(m for m in self.members if isinstance(m, Transition))

    @cached_property
    def field_map(self) -> dict[str, FieldDecl]:
        return {f.name: f for f in self.fields}

    @cached_property
    def param_map(self) -> dict[str, ParamDecl]:
        return {p.name: p for p in self.params}

    @cached_property
    def set_map(self) -> dict[str, SetDecl]:
        return {s.name: s for s in self.sets}

    @cached_property
    def ref_map(self) -> dict[str, RefDecl]:
        return {r.name: r for r in self.refs}

    @property
    def location(self) -> FieldDecl:
        return self.field_map["location"]

    def phase_transitions(self, phase: str) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.phase == phase)

    def timers(self) -> tuple[FieldDecl, ...]:
        return tuple(f for f in self.fields if f.is_timer)

    def events(self) -> tuple[FieldDecl, ...]:
        return tuple(f for f in self.fields if f.is_event)


@dataclass(frozen=True)
class SchedTransition:
    source: str
    target: str
    guard: Expr
    span: Optional[Span] = _span_field()

    @property
    def is_self_loop(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class SchedulerDecl:
    phases: tuple[str, ...]
    initial: str
    final: str
    transitions: tuple[SchedTransition, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Model:
    enums: tuple[EnumDecl, ...]
    classes: tuple[ClassDecl, ...]
    scheduler: SchedulerDecl
    constraints: tuple[Expr, ...]
    span: Optional[Span] = _span_field()

    @cached_property
    def class_map(self) -> dict[str, ClassDecl]:
        return {c.name: c for c in self.classes}

    @cached_property
    def enum_map(self) -> dict[str, EnumDecl]:
        return {e.name: e for e in self.enums}

    @cached_property
    def enum_of_value(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for e in self.enums:
            for v in e.values:
                out[v] = e.name
        return out


# ---------------------------------------------------------------------------
# Configurations and global states


@dataclass
class Configuration:
    """Finite first-order structure: universes plus set/param interpretations."""

    universes: dict[str, tuple[str, ...]]
    set_fields: dict[tuple[str, str], frozenset[str]]
    params: dict[tuple[str, str], object]

    @cached_property
    def class_of(self) -> dict[str, str]:
        out = {}
        for cls, insts in self.universes.items():
            for i in insts:
                out[i] = cls
        return out

    def instances(self) -> tuple[str, ...]:
        out: list[str] = []
        for cls in sorted(self.universes):
            out.extend(self.universes[cls])
        return tuple(out)

    def ref_value(self, inst: str, ref: RefDecl) -> Optional[str]:
        """Grounded-field value: the unique member of the ghost set, or None."""
        members = sorted(self.set_fields.get((inst, ref.grounds), frozenset()))
        if not members:
            return None
        if len(members) > 1:
            raise SraError(
                f"ghost set {ref.grounds} of {inst} has {len(members)} members; "
                f"grounded field {ref.name} requires at most one")
        return members[0]


# Scalar runtime values: int | bool | str (enum value / instance id) |
# None-or-int for timers (None = inactive, n >= 1 = active count).
Value = Union[int, bool, str, None]


@dataclass
class GlobalState:
    phase: str
    values: dict[tuple[str, str], Value]
    executed: dict[str, bool]

    def copy(self) -> "GlobalState":
        return GlobalState(self.phase, dict(self.values), dict(self.executed))

    def key(self) -> tuple:
        """Hashable identity for state-space deduplication."""
        return (self.phase,
                tuple(sorted(self.values.items(), key=lambda kv: kv[0])),
                tuple(sorted(self.executed.items())))


# ---------------------------------------------------------------------------
# Type inference (single engine shared by checker, encoder, grounding)


@dataclass
class TypeCtx:
    model: Model
    cls: Optional[ClassDecl] = None       # class context for SelfField
    env: Optional[dict[str, TypeExpr]] = None  # bound variable types
    allow_old: bool = False
    sched_symbols: bool = False           # phase / All / x.executed visible

    def child(self, var: str, ty: TypeExpr) -> "TypeCtx":
        env = dict(self.env or {})
        env[var] = ty
        return TypeCtx(self.model, self.cls, env, self.allow_old, self.sched_symbols)


def _class_symbol_type(model: Model, cls: ClassDecl, name: str) -> Optional[TypeExpr]:
    if name == "executed":
        return BOOL
    if name in cls.field_map:
        return cls.field_map[name].ty
    if name in cls.param_map:
        return cls.param_map[name].ty
    if name in cls.set_map:
        return SetType(cls.set_map[name].elem)
    if name in cls.ref_map:
        return ClassType(cls.ref_map[name].cls)
    return None


def infer_type(e: Expr, ctx: TypeCtx) -> TypeExpr:
    """Type of a resolved expression; raises TypeMismatch on ill-typed trees."""
    model = ctx.model
    if isinstance(e, IntLit):
        return INT
    if isinstance(e, BoolLit):
        return BOOL
    if isinstance(e, EnumVal):
        return EnumType(e.enum)
    if isinstance(e, PhaseVal):
        return PHASE
    if isinstance(e, InactiveLit):
        return TIMER
    if isinstance(e, NullLit):
        return NULL
    if isinstance(e, PhaseRef):
        return PHASE
    if isinstance(e, AllSet):
        if e.cls is None:
            raise TypeMismatch(e, "unresolved All-set")
        return SetType(e.cls)
    if isinstance(e, Var):
        if ctx.env is None or e.name not in ctx.env:
            raise TypeMismatch(e, f"unbound variable {e.name}")
        return ctx.env[e.name]
    if isinstance(e, SelfField):
        if ctx.cls is None:
            raise TypeMismatch(e, f"bare name {e.name} outside class context")
        ty = _class_symbol_type(model, ctx.cls, e.name)
        if ty is None:
            raise TypeMismatch(e, f"unknown symbol {e.name} in class {ctx.cls.name}")
        return BOOL if isinstance(ty, EventType) else ty
    if isinstance(e, FieldAcc):
        oty = infer_type(e.obj, ctx)
        if not isinstance(oty, ClassType):
            raise TypeMismatch(e, f"field access on non-object value of type {oty}")
        cd = model.class_map.get(oty.name)
        if cd is None:
            raise TypeMismatch(e, f"unknown class {oty.name}")
        ty = _class_symbol_type(model, cd, e.name)
        if ty is None:
            raise TypeMismatch(e, f"class {oty.name} has no member {e.name}")
        return BOOL if isinstance(ty, EventType) else ty
    if isinstance(e, TimerActive):
        aty = infer_type(e.arg, ctx)
        if not isinstance(aty, TimerType):
            raise TypeMismatch(e, ".active applies to timers only")
        return BOOL
    if isinstance(e, TimerCount):
        aty = infer_type(e.arg, ctx)
        if not isinstance(aty, TimerType):
            raise TypeMismatch(e, ".count applies to timers only")
        return INT
    if isinstance(e, SelfObj):
        if ctx.cls is None:
            raise TypeMismatch(e, "self outside class context")
        return ClassType(ctx.cls.name)
    if isinstance(e, Not):
        _expect(e.arg, ctx, BOOL)
        return BOOL
    if isinstance(e, Old):
        if not ctx.allow_old:
            raise TypeMismatch(e, "old(...) is not allowed here")
        return infer_type(e.arg, ctx)
    if isinstance(e, Card):
        aty = infer_type(e.arg, ctx)
        if not isinstance(aty, SetType):
            raise TypeMismatch(e, "|...| applies to sets only")
        return INT
    if isinstance(e, Ite):
        _expect(e.cond, ctx, BOOL)
        t1 = infer_type(e.then, ctx)
        t2 = infer_type(e.els, ctx)
        if t1 != t2:
            raise TypeMismatch(e, f"branches of if have different types {t1} / {t2}")
        return t1
    if isinstance(e, Quant):
        dty = infer_type(e.dom, ctx)
        if not isinstance(dty, SetType):
            raise TypeMismatch(e, "quantifier domain must be set-typed")
        _expect(e.body, ctx.child(e.var, ClassType(dty.elem)), BOOL)
        return BOOL
    if isinstance(e, Binary):
        return _infer_binary(e, ctx)
    if isinstance(e, Name):
        raise TypeMismatch(e, f"unresolved name {e.name}")
    raise TypeMismatch(e, f"unknown expression node {type(e).__name__}")


def _expect(e: Expr, ctx: TypeCtx, ty: TypeExpr) -> None:
    actual = infer_type(e, ctx)
    if actual != ty:
        raise TypeMismatch(e, f"expected {ty}, got {actual}")


def _infer_binary(e: Binary, ctx: TypeCtx) -> TypeExpr:
    op = e.op
    if op in ("add", "sub", "mul"):
        _expect(e.left, ctx, INT)
        _expect(e.right, ctx, INT)
        return INT
    if op == "union":
        lt, rt = infer_type(e.left, ctx), infer_type(e.right, ctx)
        if not (isinstance(lt, SetType) and lt == rt):
            raise TypeMismatch(e, f"union requires same-class sets, got {lt} / {rt}")
        return lt
    if op in ("lt", "le"):
        _expect(e.left, ctx, INT)
        _expect(e.right, ctx, INT)
        return BOOL
    if op in ("and", "or", "implies"):
        _expect(e.left, ctx, BOOL)
        _expect(e.right, ctx, BOOL)
        return BOOL
    if op == "in":
        lt, rt = infer_type(e.left, ctx), infer_type(e.right, ctx)
        if not isinstance(rt, SetType):
            raise TypeMismatch(e, "right side of 'in' must be a set")
        if lt != ClassType(rt.elem):
            raise TypeMismatch(e, f"membership of {lt} in {rt}")
        return BOOL
    if op in ("subset", "disjoint", "seteq"):
        lt, rt = infer_type(e.left, ctx), infer_type(e.right, ctx)
        if not (isinstance(lt, SetType) and lt == rt):
            raise TypeMismatch(e, f"set comparison requires same-class sets, got {lt} / {rt}")
        return BOOL
    if op == "eq":
        lt, rt = infer_type(e.left, ctx), infer_type(e.right, ctx)
        if isinstance(lt, SetType) or isinstance(rt, SetType):
            raise TypeMismatch(e, "set equality must be resolved to seteq")
        if isinstance(lt, TimerType) or isinstance(rt, TimerType):
            ok = (isinstance(lt, TimerType) and isinstance(rt, TimerType))
            if not ok:
                raise TypeMismatch(e, "timers compare only against 'inactive'")
            # only t == inactive / inactive == t is meaningful
            if not (isinstance(e.left, InactiveLit) or isinstance(e.right, InactiveLit)):
                raise TypeMismatch(e, "timers compare only against 'inactive'")
            return BOOL
        if isinstance(lt, NullType) or isinstance(rt, NullType):
            other = rt if isinstance(lt, NullType) else lt
            if not isinstance(other, (ClassType, NullType)):
                raise TypeMismatch(e, "null compares only against object values")
            return BOOL
        if isinstance(lt, EventType):
            lt = BOOL
        if isinstance(rt, EventType):
            rt = BOOL
        if lt != rt:
            raise TypeMismatch(e, f"comparison of {lt} and {rt}")
        return BOOL
    raise TypeMismatch(e, f"unknown operator {op}")


# ---------------------------------------------------------------------------
# Symbol walks


@dataclass(frozen=True)
class SymbolRef:
    kind: str          # field | param | set | ref | all | phase | executed
    cls: Optional[str]
    name: Optional[str]
    pre: bool = False  # True when referenced under old(...)

    def __str__(self) -> str:
        base = {"all": f"All_{self.cls}", "phase": "phase"}.get(self.kind)
        if base is None:
            base = f"{self.cls}.{self.name}" if self.cls else str(self.name)
        return f"old({base})" if self.pre else base


def free_symbols(e: Expr, model: Optional[Model] = None,
                 cls: Optional[ClassDecl] = None) -> frozenset[SymbolRef]:
    """Every field/param/set/All/phase/executed reference in e, tagged by
    old-marker scope.  Bound variables themselves are not symbols."""
    out: set[SymbolRef] = set()

    def obj_class(obj: Expr, env: dict[str, str]) -> Optional[str]:
        if isinstance(obj, Var):
            return env.get(obj.name)
        if isinstance(obj, SelfField) and cls is not None and obj.name in cls.ref_map:
            return cls.ref_map[obj.name].cls
        if isinstance(obj, FieldAcc):
            ocls = obj_class(obj.obj, env)
            if ocls and model and obj.name in model.class_map[ocls].ref_map:
                return model.class_map[ocls].ref_map[obj.name].cls
        return None

    def sym_kind(owner: Optional[ClassDecl], name: str) -> str:
        if name == "executed":
            return "executed"
        if owner is not None:
            if name in owner.param_map:
                return "param"
            if name in owner.set_map:
                return "set"
            if name in owner.ref_map:
                return "ref"
        return "field"

    def dom_elem(dom: Expr, env: dict[str, str]) -> Optional[str]:
        if isinstance(dom, AllSet):
            return dom.cls
        if isinstance(dom, SelfField) and cls is not None and dom.name in cls.set_map:
            return cls.set_map[dom.name].elem
        if isinstance(dom, FieldAcc):
            ocls = obj_class(dom.obj, env)
            if ocls and model:
                sd = model.class_map[ocls].set_map.get(dom.name)
                if sd:
                    return sd.elem
        if isinstance(dom, Binary) and dom.op == "union":
            return dom_elem(dom.left, env) or dom_elem(dom.right, env)
        return None

    def walk(e: Expr, pre: bool, env: dict[str, str]) -> None:
        if isinstance(e, SelfField):
            owner = cls
            out.add(SymbolRef(sym_kind(owner, e.name), owner.name if owner else None,
                              e.name, pre))
        elif isinstance(e, FieldAcc):
            ocls = obj_class(e.obj, env)
            owner = model.class_map.get(ocls) if (model and ocls) else None
            out.add(SymbolRef(sym_kind(owner, e.name), ocls, e.name, pre))
            walk(e.obj, pre, env)
        elif isinstance(e, AllSet):
            out.add(SymbolRef("all", e.cls, None, pre))
        elif isinstance(e, PhaseRef):
            out.add(SymbolRef("phase", None, None, pre))
        elif isinstance(e, Old):
            walk(e.arg, True, env)
        elif isinstance(e, Quant):
            walk(e.dom, pre, env)
            elem = dom_elem(e.dom, env)
            env2 = dict(env)
            if elem:
                env2[e.var] = elem
            walk(e.body, pre, env2)
        elif isinstance(e, Binary):
            walk(e.left, pre, env)
            walk(e.right, pre, env)
        elif isinstance(e, Not):
            walk(e.arg, pre, env)
        elif isinstance(e, TimerActive):
            walk(e.arg, pre, env)
        elif isinstance(e, Card):
            walk(e.arg, pre, env)
        elif isinstance(e, Ite):
            walk(e.cond, pre, env)
            walk(e.then, pre, env)
            walk(e.els, pre, env)

    walk(e, False, {})
    return frozenset(out)


def write_footprint(model: Model, cls_name: str, phase: str) -> frozenset[tuple[str, str]]:
    """Over-approximation of the (class, field) pairs a phase-matching exec of
    cls_name may write: effect targets, quantified-assignment targets in their
    element class, plus own location, consumed events, and executed."""
    cd = model.class_map[cls_name]
    out: set[tuple[str, str]] = {(cls_name, "executed")}
    transitions = cd.phase_transitions(phase)
    if transitions:
        out.add((cls_name, "location"))
    for t in transitions:
        for ev in guard_event_list(cd, t.guard):
            out.add((cls_name, ev))
        for s in stmt_iter(t.effect):
            if isinstance(s, Assign):
                if s.owner is None:
                    out.add((cls_name, s.field_name))
                else:
                    out.add((_owner_class(model, cd, s.owner), s.field_name))
            elif isinstance(s, Havoc):
                out.add((cls_name, s.field_name))
            elif isinstance(s, QuantAssign):
                elem = _set_expr_elem(model, cd, s.dom)
                out.add((elem, s.field_name))
    return frozenset(out)


def _owner_class(model: Model, cd: ClassDecl, owner: Expr) -> str:
    if isinstance(owner, SelfField) and owner.name in cd.ref_map:
        return cd.ref_map[owner.name].cls
    raise SraError(f"unsupported assignment owner {owner}")


def _set_expr_elem(model: Model, cd: ClassDecl, dom: Expr) -> str:
    if isinstance(dom, AllSet) and dom.cls:
        return dom.cls
    if isinstance(dom, SelfField) and dom.name in cd.set_map:
        return cd.set_map[dom.name].elem
    if isinstance(dom, Binary) and dom.op == "union":
        return _set_expr_elem(model, cd, dom.left)
    raise SraError(f"cannot determine element class of {dom}")


def guard_event_list(cd: ClassDecl, guard: Expr) -> tuple[str, ...]:
    """Own-event conjuncts of a transition guard, in occurrence order."""
    events = []
    for conj in conjuncts(guard):
        if isinstance(conj, SelfField) and conj.name in cd.field_map \
                and cd.field_map[conj.name].is_event:
            events.append(conj.name)
    return tuple(dict.fromkeys(events))


def conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, Binary) and e.op == "and":
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]


def guard_event_free_part(cd: ClassDecl, guard: Expr) -> Expr:
    rest = [c for c in conjuncts(guard)
            if not (isinstance(c, SelfField) and c.name in cd.field_map
                    and cd.field_map[c.name].is_event)]
    return and_(*rest)


# ---------------------------------------------------------------------------
# Substitution (capture-avoiding)


_FRESH = 0


def fresh_name(base: str) -> str:
    global _FRESH
    _FRESH += 1
    return f"{base}_{_FRESH}"


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace free Var occurrences per mapping, renaming binders on capture."""
    if not mapping:
        return e
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Quant):
        mapping2 = {k: v for k, v in mapping.items() if k != e.var}
        var, body, dom = e.var, e.body, substitute(e.dom, mapping2)
        captured = any(_mentions_var(v, var) for v in mapping2.values())
        if captured:
            nv = fresh_name(var)
            body = substitute(body, {var: Var(nv)})
            var = nv
        return Quant(e.kind, var, dom, substitute(body, mapping2), span=e.span)
    return _rebuild(e, lambda sub: substitute(sub, mapping))


def subst_self(e: Expr, inst: Expr) -> Expr:
    """Instantiate the implicit self: SelfField(f) becomes inst.f."""
    if isinstance(e, SelfObj):
        return inst
    if isinstance(e, SelfField):
        if e.name == "self":
            return inst
        return FieldAcc(inst, e.name, span=e.span)
    if isinstance(e, Quant):
        return Quant(e.kind, e.var, subst_self(e.dom, inst),
                     subst_self(e.body, inst), span=e.span)
    return _rebuild(e, lambda sub: subst_self(sub, inst))


def _mentions_var(e: Expr, name: str) -> bool:
    if isinstance(e, Var):
        return e.name == name
    if isinstance(e, Quant):
        if e.var == name:
            return _mentions_var(e.dom, name)
        return _mentions_var(e.dom, name) or _mentions_var(e.body, name)
    found = False

    def probe(sub: Expr) -> Expr:
        nonlocal found
        if _mentions_var(sub, name):
            found = True
        return sub

    _rebuild(e, probe)
    return found


def _rebuild(e: Expr, f) -> Expr:
    """Apply f to every direct child expression and rebuild."""
    if isinstance(e, (IntLit, BoolLit, EnumVal, PhaseVal, InactiveLit, NullLit,
                      Name, Var, SelfField, PhaseRef, AllSet, SelfObj, Epsilon)):
        return e
    if isinstance(e, FieldAcc):
        return FieldAcc(f(e.obj), e.name, span=e.span)
    if isinstance(e, TimerActive):
        return TimerActive(f(e.arg), span=e.span)
    if isinstance(e, TimerCount):
        return TimerCount(f(e.arg), span=e.span)
    if isinstance(e, Not):
        return Not(f(e.arg), span=e.span)
    if isinstance(e, Old):
        return Old(f(e.arg), span=e.span)
    if isinstance(e, Card):
        return Card(f(e.arg), span=e.span)
    if isinstance(e, Binary):
        return Binary(e.op, f(e.left), f(e.right), span=e.span)
    if isinstance(e, Ite):
        return Ite(f(e.cond), f(e.then), f(e.els), span=e.span)
    if isinstance(e, Quant):
        return Quant(e.kind, e.var, f(e.dom), f(e.body), span=e.span)
    raise SraError(f"unknown expression node {type(e).__name__}")


map_children = _rebuild


# ---------------------------------------------------------------------------
# Pretty-printing


_PREC = {
    "implies": 1, "or": 2, "and": 3,
    "eq": 5, "seteq": 5, "lt": 5, "le": 5, "in": 5, "subset": 5, "disjoint": 5,
    "add": 6, "sub": 6, "union": 6, "mul": 7,
}

_OPTXT = {
    "add": "+", "sub": "-", "mul": "*", "union": "+",
    "eq": "==", "seteq": "==", "lt": "<", "le": "<=",
    "and": "&&", "or": "||", "implies": "==>",
    "in": "in", "subset": "<=", "disjoint": "!!",
}


def expr_text(e: Expr, prec: int = 0) -> str:
    def paren(s: str, my: int) -> str:
        return f"({s})" if my < prec else s

    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, EnumVal):
        return e.value
    if isinstance(e, PhaseVal):
        return e.value
    if isinstance(e, InactiveLit):
        return "inactive"
    if isinstance(e, NullLit):
        return "null"
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Var):
        return e.name
    if isinstance(e, SelfField):
        return e.name
    if isinstance(e, PhaseRef):
        return "phase"
    if isinstance(e, AllSet):
        return "All" if e.cls is None else f"All_{e.cls}"
    if isinstance(e, FieldAcc):
        return f"{expr_text(e.obj, 9)}.{e.name}"
    if isinstance(e, TimerActive):
        return f"{expr_text(e.arg, 9)}.active"
    if isinstance(e, TimerCount):
        return f"{expr_text(e.arg, 9)}.count"
    if isinstance(e, SelfObj):
        return "self"
    if isinstance(e, Epsilon):
        return "*"
    if isinstance(e, Old):
        return f"old({expr_text(e.arg)})"
    if isinstance(e, Card):
        return f"|{expr_text(e.arg)}|"
    if isinstance(e, Not):
        return paren(f"!{expr_text(e.arg, 8)}", 4)
    if isinstance(e, Binary):
        my = _PREC[e.op]
        # comparisons are non-associative; chain operands need parens
        lp = my if e.op not in ("eq", "seteq", "lt", "le", "in", "subset", "disjoint") else my + 1
        txt = f"{expr_text(e.left, lp)} {_OPTXT[e.op]} {expr_text(e.right, my + 1)}"
        return paren(txt, my)
    if isinstance(e, Ite):
        txt = f"if {expr_text(e.cond, 1)} then {expr_text(e.then, 1)} else {expr_text(e.els, 1)}"
        return paren(txt, 0)
    if isinstance(e, Quant):
        txt = f"{e.kind} {e.var} in {expr_text(e.dom, 6)} :: {expr_text(e.body, 1)}"
        return paren(txt, 0)
    raise SraError(f"cannot print {type(e).__name__}")


def stmt_text(s: Stmt, indent: str = "") -> str:
    if isinstance(s, Skip):
        return ""
    if isinstance(s, Seq):
        return " ".join(filter(None, (stmt_text(x, indent) for x in s.stmts)))
    if isinstance(s, Assign):
        tgt = s.field_name if s.owner is None else f"{expr_text(s.owner, 9)}.{s.field_name}"
        return f"{tgt} := {expr_text(s.value)};"
    if isinstance(s, Havoc):
        return f"{s.field_name} := *;"
    if isinstance(s, IfStmt):
        txt = f"if {expr_text(s.cond)} then {{ {stmt_text(s.then)} }}"
        if s.els is not None:
            txt += f" else {{ {stmt_text(s.els)} }}"
        return txt
    if isinstance(s, QuantAssign):
        return (f"forall {s.var} in {expr_text(s.dom, 6)} "
                f"{{ {s.var}.{s.field_name} := {expr_text(s.value)}; }}")
    if isinstance(s, Assume):
        return f"assume {expr_text(s.cond)};"
    if isinstance(s, AssertStmt):
        return f"assert {expr_text(s.cond)};"
    raise SraError(f"cannot print {type(s).__name__}")


def _type_text(ty: TypeExpr) -> str:
    return str(ty)


def model_text(m: Model) -> str:
    """Canonical source text; parsing it back yields a structurally identical
    model (spans aside)."""
    out: list[str] = []
    for e in m.enums:
        out.append(f"enum {e.name} {{ {', '.join(e.values)} }}")
    if m.enums:
        out.append("")
    for c in m.classes:
        out.append(f"class {c.name} {{")
        for mem in c.members:
            if isinstance(mem, FieldDecl):
                kw = "input" if mem.is_input else ("event" if mem.is_event else "var")
                ghost = "ghost " if mem.ghost else ""
                line = f"  {ghost}{kw} {mem.name} : {_type_text(mem.ty)}"
                if mem.init is not None:
                    line += f" = {expr_text(mem.init)}"
                out.append(line)
            elif isinstance(mem, ParamDecl):
                out.append(f"  param {mem.name} : {_type_text(mem.ty)}")
            elif isinstance(mem, SetDecl):
                ghost = "ghost " if mem.ghost else ""
                out.append(f"  {ghost}set {mem.name} : Set<{mem.elem}>")
            elif isinstance(mem, RefDecl):
                out.append(f"  ref {mem.name} : {mem.cls} grounds {mem.grounds}")
            elif isinstance(mem, Transition):
                eff = stmt_text(mem.effect)
                out.append(f"  transition {mem.name} = ({mem.start}, "
                           f"{expr_text(mem.guard)}, {mem.end}, "
                           f"{{ {eff} }}".rstrip() + f", {mem.phase})")
        out.append("}")
        out.append("")
    s = m.scheduler
    out.append("scheduler {")
    out.append(f"  phases {', '.join(s.phases)};")
    out.append(f"  initial {s.initial};")
    out.append(f"  final {s.final};")
    for t in s.transitions:
        out.append(f"  trans {t.source} -> {t.target} when {expr_text(t.guard)};")
    out.append("}")
    if m.constraints:
        out.append("")
        out.append("constraints {")
        for g in m.constraints:
            out.append(f"  {expr_text(g)};")
        out.append("}")
    return "\n".join(out) + "\n"

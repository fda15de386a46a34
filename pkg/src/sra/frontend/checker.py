"""Name resolution and static checking of parsed models.

check_model resolves every Name node (producing a new Model), applies the
language restrictions, and reports one diagnostic per violation without
failing fast."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .. import model as M
from ..model import (AllSet, Assign, AssertStmt, Assume, Binary, BoolLit, BOOL,
                     Card, ClassDecl, ClassType, Configuration, EnumType,
                     EnumVal, EventType, Expr, FieldAcc, FieldDecl, Havoc,
                     IfStmt, InactiveLit, IntLit, IntType, INT, Ite, Model,
                     Name, Not, NullLit, Old, ParamDecl, PhaseRef, PhaseVal,
                     Quant, QuantAssign, RefDecl, SetDecl, SetType, Seq, Skip,
                     Stmt, SelfField, TimerActive, TimerType, Transition,
                     TypeCtx, TypeExpr, TypeMismatch, Var, infer_type)
from .diagnostics import Diagnostic


@dataclass
class _Scope:
    cls: Optional[ClassDecl]
    env: dict[str, TypeExpr]
    allow_old: bool = False
    where: str = "source"  # source | invariant | gprime

    def child(self, var: str, ty: TypeExpr) -> "_Scope":
        env = dict(self.env)
        env[var] = ty
        return _Scope(self.cls, env, self.allow_old, self.where)


class _Bail(Exception):
    pass


class Checker:
    def __init__(self, parsed: Model):
        self.parsed = parsed
        self.diags: list[Diagnostic] = []

    # -- diagnostics ---------------------------------------------------------

    def error(self, code: str, msg: str, span) -> None:
        self.diags.append(Diagnostic("error", code, msg, span))

    def warn(self, code: str, msg: str, span) -> None:
        self.diags.append(Diagnostic("warning", code, msg, span))

    def bail(self, code: str, msg: str, span) -> None:
        self.error(code, msg, span)
        raise _Bail()

    # -- entry ---------------------------------------------------------------

    def run(self) -> tuple[Optional[Model], list[Diagnostic]]:
        m = self.parsed
        self.check_tables()
        classes = tuple(self.check_class(c) for c in m.classes)
        resolved = Model(m.enums, classes, m.scheduler, m.constraints, span=m.span)
        # guards/constraints resolve against the class-table of the new model
        self.model = resolved
        classes = tuple(self.resolve_class_exprs(c) for c in classes)
        resolved = Model(m.enums, classes, m.scheduler, m.constraints, span=m.span)
        self.model = resolved
        sched = self.check_scheduler(resolved)
        constraints = tuple(self.check_constraint(g) for g in m.constraints)
        classes = tuple(self._normalize_refs(c, constraints) for c in classes)
        final = Model(m.enums, classes, sched, constraints, span=m.span)
        if any(d.severity == "error" for d in self.diags):
            return None, self.diags
        return final, self.diags

    def _normalize_refs(self, c: ClassDecl, constraints) -> ClassDecl:
        """Grounded-field nullability is semantic: an exact |s| == 1 bound in
        the constraints makes the ref non-nullable."""
        if not c.refs:
            return c
        exact: set[str] = set()
        for g in constraints:
            if (isinstance(g, Quant) and g.kind == "forall"
                    and isinstance(g.body, Binary) and g.body.op == "eq"
                    and isinstance(g.dom, M.AllSet) and g.dom.cls == c.name):
                card, lit = g.body.left, g.body.right
                if isinstance(lit, M.Card):
                    card, lit = lit, card
                if (isinstance(card, M.Card) and isinstance(lit, M.IntLit)
                        and lit.value == 1
                        and isinstance(card.arg, M.FieldAcc)
                        and isinstance(card.arg.obj, M.Var)
                        and card.arg.obj.name == g.var):
                    exact.add(card.arg.name)
        members = tuple(
            replace(mem, nullable=(mem.grounds not in exact))
            if isinstance(mem, M.RefDecl) else mem
            for mem in c.members)
        return ClassDecl(c.name, members, span=c.span)

    # -- declaration tables ----------------------------------------------------

    def check_tables(self) -> None:
        m = self.parsed
        seen: dict[str, object] = {}
        for e in m.enums:
            if e.name in seen:
                self.error("dup-decl", f"duplicate declaration {e.name}", e.span)
            seen[e.name] = e
            if not e.values:
                self.error("enum-empty", f"enum {e.name} has no values", e.span)
            if len(set(e.values)) != len(e.values):
                self.error("dup-decl", f"enum {e.name} has duplicate values", e.span)
        for c in m.classes:
            if c.name in seen:
                self.error("dup-decl", f"duplicate declaration {c.name}", c.span)
            seen[c.name] = c
        # bare-name resolution needs enum values and phases globally unique
        values: dict[str, str] = {}
        for e in m.enums:
            for v in e.values:
                if v in values:
                    self.error("dup-decl",
                               f"enum value {v} declared in both {values[v]} and {e.name}",
                               e.span)
                values[v] = e.name
        for p in m.scheduler.phases:
            if p in values:
                self.error("dup-decl",
                           f"phase {p} collides with enum value of {values[p]}",
                           m.scheduler.span)

    # -- classes ---------------------------------------------------------------

    def check_class(self, c: ClassDecl) -> ClassDecl:
        """Structural member checks; expressions are resolved in a later pass."""
        m = self.parsed
        members: list[M.ClassMember] = []
        names: set[str] = set()
        for mem in c.members:
            if isinstance(mem, FieldDecl) and mem.name == "executed":
                # redundant sugar for the built-in flag
                if mem.ty != BOOL or mem.init is not None or mem.is_input:
                    self.error("executed-decl",
                               "executed is the built-in flag: declare it as "
                               "'var executed : Bool' or omit it", mem.span)
                continue
            if isinstance(mem, Transition):
                members.append(mem)
                continue
            if mem.name in names:
                self.error("dup-decl",
                           f"duplicate member {mem.name} in class {c.name}", mem.span)
            names.add(mem.name)
            members.append(mem)
        tnames: set[str] = set()
        for t in (mem for mem in members if isinstance(mem, Transition)):
            if t.name in tnames:
                self.error("dup-decl",
                           f"duplicate transition {t.name} in class {c.name}", t.span)
            tnames.add(t.name)

        c2 = ClassDecl(c.name, tuple(members), span=c.span)
        for mem in c2.members:
            if isinstance(mem, FieldDecl):
                self.check_field_decl(c2, mem)
            elif isinstance(mem, ParamDecl):
                if not self._scalar_kind(mem.ty):
                    self.error("bad-kind",
                               f"param {mem.name} must be Int, Bool, or an enum",
                               mem.span)
            elif isinstance(mem, SetDecl):
                if mem.elem not in m.class_map:
                    self.error("unknown-class",
                               f"set {mem.name} ranges over unknown class {mem.elem}",
                               mem.span)
            elif isinstance(mem, RefDecl):
                self.check_ref_decl(c2, mem)
        loc = c2.field_map.get("location")
        if loc is None:
            self.error("missing-location", f"class {c.name} has no location variable",
                       c.span)
        else:
            if not isinstance(loc.ty, EnumType) or loc.ty.name not in m.enum_map:
                self.error("bad-kind",
                           f"location of {c.name} must have a declared enum type",
                           loc.span)
            if loc.init is None:
                self.error("missing-init",
                           f"location of {c.name} needs an initial value", loc.span)
            if loc.is_input:
                self.error("bad-kind", "location cannot be an input", loc.span)
        return c2

    def _scalar_kind(self, ty: TypeExpr) -> bool:
        if isinstance(ty, (IntType, M.BoolType)):
            return True
        return isinstance(ty, EnumType) and ty.name in self.parsed.enum_map

    def check_field_decl(self, c: ClassDecl, f: FieldDecl) -> None:
        if f.is_input:
            if not self._scalar_kind(f.ty):
                self.error("bad-kind",
                           f"input {f.name} must be Int, Bool, or an enum", f.span)
            return
        if f.is_event:
            if f.init is not None:
                self.error("bad-init", f"event {f.name} cannot have an initial value "
                           "(events start false)", f.span)
            return
        if f.is_timer:
            if f.init is not None:
                self.error("bad-init", f"timer {f.name} cannot have an initial value "
                           "(timers start inactive)", f.span)
            return
        if isinstance(f.ty, EventType):
            self.error("bad-kind", f"declare {f.name} with the event keyword", f.span)
            return
        if not (self._scalar_kind(f.ty) or isinstance(f.ty, TimerType)):
            self.error("bad-kind",
                       f"var {f.name} must be Int, Bool, Timer, or an enum", f.span)
            return
        if f.init is None and f.name != "location":
            self.warn("missing-init",
                      f"non-input field {c.name}.{f.name} has no initial value; "
                      "simulation will reject this model", f.span)

    def check_ref_decl(self, c: ClassDecl, r: RefDecl) -> None:
        m = self.parsed
        if r.cls not in m.class_map:
            self.error("unknown-class", f"ref {r.name} has unknown class {r.cls}",
                       r.span)
            return
        src = c.set_map.get(r.grounds)
        if src is None or not src.ghost or src.elem != r.cls:
            self.error("bad-ref",
                       f"ref {r.name} must ground a ghost set of {r.cls}", r.span)

    # -- expression resolution ---------------------------------------------------

    def resolve_class_exprs(self, c: ClassDecl) -> ClassDecl:
        members: list[M.ClassMember] = []
        for mem in c.members:
            if isinstance(mem, FieldDecl) and mem.init is not None:
                init = self.resolve_checked(mem.init, _Scope(None, {}), mem.ty,
                                            code="bad-init")
                members.append(replace(mem, init=init))
            elif isinstance(mem, Transition):
                members.append(self.check_transition(c, mem))
            else:
                members.append(mem)
        return ClassDecl(c.name, tuple(members), span=c.span)

    def resolve_checked(self, e: Expr, scope: _Scope,
                        want: Optional[TypeExpr], code: str = "type") -> Expr:
        """Resolve e; on success validate its type. Returns the input tree
        unresolved if any diagnostic fired (callers only use it for printing)."""
        before = len(self.diags)
        try:
            r = self.resolve(e, scope)
        except _Bail:
            return e
        if len(self.diags) > before:
            return e
        try:
            ctx = TypeCtx(self.model, scope.cls, scope.env, scope.allow_old, True)
            ty = infer_type(r, ctx)
            if want is not None and ty != want:
                if not (want == BOOL and isinstance(ty, EventType)):
                    self.error(code, f"expected {want}, got {ty}",
                               e.span or (r.span if hasattr(r, "span") else None))
        except TypeMismatch as tm:
            self.error(code, tm.msg, getattr(tm.node, "span", None) or e.span)
        return r

    def resolve(self, e: Expr, scope: _Scope) -> Expr:
        cls, env = scope.cls, scope.env
        if isinstance(e, Name):
            return self.resolve_name(e, scope)
        if isinstance(e, FieldAcc):
            if isinstance(e.obj, Name) and e.obj.name == "self":
                if cls is None:
                    self.bail("unknown-name", "self is not available here", e.span)
                return self.resolve(SelfField(e.name, span=e.span), scope)
            obj = self.resolve(e.obj, scope)
            return FieldAcc(obj, e.name, span=e.span)
        if isinstance(e, SelfField):
            if cls is None:
                self.bail("unknown-name", f"bare name {e.name} is not available here",
                          e.span)
            if e.name != "executed" and M._class_symbol_type(self.model, cls, e.name) is None:
                self.bail("unknown-name",
                          f"class {cls.name} has no member {e.name}", e.span)
            return e
        if isinstance(e, Old):
            if not scope.allow_old:
                code = "old-in-invariant" if scope.where == "invariant" else "old-in-source"
                self.bail(code, "old(...) is only allowed in contracts", e.span)
            if isinstance(e.arg, Old):
                self.bail("old-in-source", "old(...) cannot nest", e.span)
            return Old(self.resolve(e.arg, scope), span=e.span)
        if isinstance(e, Quant):
            dom = self.resolve(e.dom, scope)
            if isinstance(dom, AllSet) and dom.cls is None:
                # forall x in All :: b  ==  conjunction over every class
                parts = []
                for cd in self.model.classes:
                    body = self.resolve(e.body,
                                        scope.child(e.var, ClassType(cd.name)))
                    parts.append(Quant(e.kind, e.var, AllSet(cd.name, span=e.dom.span),
                                       body, span=e.span))
                if e.kind == "forall":
                    return M.and_(*parts)
                return M.or_(*parts)
            elem = self.type_of(dom, scope)
            if not isinstance(elem, SetType):
                self.bail("quant-domain",
                          f"quantifier domain must be a set, got {elem}",
                          e.dom.span or e.span)
            body = self.resolve(e.body, scope.child(e.var, ClassType(elem.elem)))
            return Quant(e.kind, e.var, dom, body, span=e.span)
        if isinstance(e, Binary):
            left = self.resolve(e.left, scope)
            right = self.resolve(e.right, scope)
            op = e.op
            if op in ("add", "le", "eq"):
                lt = self.type_of(left, scope)
                if isinstance(lt, SetType):
                    op = {"add": "union", "le": "subset", "eq": "seteq"}[op]
            return Binary(op, left, right, span=e.span)
        if isinstance(e, AllSet):
            return e
        return M.map_children(e, lambda sub: self.resolve(sub, scope))

    def resolve_name(self, e: Name, scope: _Scope) -> Expr:
        n = e.name
        if n == "self":
            self.bail("unknown-name", "self can only qualify a member access", e.span)
        if n in scope.env:
            return Var(n, span=e.span)
        cls = scope.cls
        if cls is not None and (n == "executed"
                                or M._class_symbol_type(self.model, cls, n) is not None):
            return SelfField(n, span=e.span)
        if n == "All":
            return AllSet(None, span=e.span)
        if n.startswith("All_"):
            target = n[len("All_"):]
            if target in self.model.class_map:
                return AllSet(target, span=e.span)
            self.bail("unknown-class", f"unknown class {target}", e.span)
        enum = self.model.enum_of_value.get(n)
        if enum is not None:
            return EnumVal(enum, n, span=e.span)
        if n in self.model.scheduler.phases:
            return PhaseVal(n, span=e.span)
        self.bail("unknown-name", f"unknown name {n}", e.span)

    def type_of(self, e: Expr, scope: _Scope) -> TypeExpr:
        try:
            return infer_type(e, TypeCtx(self.model, scope.cls, scope.env,
                                         scope.allow_old, True))
        except TypeMismatch as tm:
            self.error("type", tm.msg, getattr(tm.node, "span", None))
            raise _Bail()

    # -- transitions ---------------------------------------------------------------

    def check_transition(self, c: ClassDecl, t: Transition) -> Transition:
        m = self.parsed
        loc = c.field_map.get("location")
        if loc is not None and isinstance(loc.ty, EnumType):
            values = m.enum_map.get(loc.ty.name)
            for which, name in (("start", t.start), ("end", t.end)):
                if values is not None and name not in values.values:
                    self.error("unknown-location",
                               f"{which} location {name} is not a value of {loc.ty.name}",
                               t.span)
        if t.phase not in m.scheduler.phases:
            self.error("unknown-phase",
                       f"transition {t.name} uses undeclared phase {t.phase}", t.span)
        scope = _Scope(c, {})
        guard = self.resolve_checked(t.guard, scope, BOOL, code="type")
        self.check_guard_shape(c, guard, t)
        effect = self.resolve_stmt(t.effect, c, {})
        return Transition(t.name, t.start, guard, t.end, effect, t.phase, span=t.span)

    def check_guard_shape(self, c: ClassDecl, guard: Expr, t: Transition) -> None:
        for conj in M.conjuncts(guard):
            if isinstance(conj, SelfField) and conj.name in c.field_map \
                    and c.field_map[conj.name].is_event:
                continue
            if self._mentions_event(conj, c, {}):
                self.error("guard-shape",
                           f"guard of {t.name} must be an event-free expression "
                           "conjoined with bare own-event names", conj.span or t.span)

    def _mentions_event(self, e: Expr, cls: Optional[ClassDecl],
                        env: dict[str, str]) -> bool:
        found = False

        def walk(e: Expr, env: dict[str, str]) -> None:
            nonlocal found
            if isinstance(e, SelfField) and cls is not None:
                fd = cls.field_map.get(e.name)
                if fd is not None and fd.is_event:
                    found = True
            elif isinstance(e, FieldAcc):
                ocls = self._obj_class(e.obj, cls, env)
                if ocls is not None:
                    fd = self.model.class_map[ocls].field_map.get(e.name)
                    if fd is not None and fd.is_event:
                        found = True
                walk(e.obj, env)
            elif isinstance(e, Quant):
                walk(e.dom, env)
                elem = self._dom_elem(e.dom, cls, env)
                env2 = dict(env)
                if elem:
                    env2[e.var] = elem
                walk(e.body, env2)
            else:
                M.map_children(e, lambda sub: (walk(sub, env), sub)[1])

        walk(e, env)
        return found

    def _obj_class(self, obj: Expr, cls: Optional[ClassDecl],
                   env: dict[str, str]) -> Optional[str]:
        if isinstance(obj, Var):
            return env.get(obj.name)
        if isinstance(obj, SelfField) and cls is not None and obj.name in cls.ref_map:
            return cls.ref_map[obj.name].cls
        if isinstance(obj, FieldAcc):
            ocls = self._obj_class(obj.obj, cls, env)
            if ocls:
                rd = self.model.class_map[ocls].ref_map.get(obj.name)
                if rd:
                    return rd.cls
        return None

    def _dom_elem(self, dom: Expr, cls: Optional[ClassDecl],
                  env: dict[str, str]) -> Optional[str]:
        if isinstance(dom, AllSet):
            return dom.cls
        if isinstance(dom, SelfField) and cls is not None and dom.name in cls.set_map:
            return cls.set_map[dom.name].elem
        if isinstance(dom, FieldAcc):
            ocls = self._obj_class(dom.obj, cls, env)
            if ocls:
                sd = self.model.class_map[ocls].set_map.get(dom.name)
                if sd:
                    return sd.elem
        if isinstance(dom, Binary) and dom.op == "union":
            return self._dom_elem(dom.left, cls, env) or self._dom_elem(dom.right, cls, env)
        return None

    # -- statements ------------------------------------------------------------------

    def resolve_stmt(self, s: Stmt, c: ClassDecl, env: dict[str, TypeExpr]) -> Stmt:
        scope = _Scope(c, env)
        if isinstance(s, (Skip,)):
            return s
        if isinstance(s, Seq):
            return Seq(tuple(self.resolve_stmt(x, c, env) for x in s.stmts),
                       span=s.span)
        if isinstance(s, Assign):
            return self.resolve_assign(s, c, env)
        if isinstance(s, Havoc):
            fd = self.check_target(c, s.field_name, s.span, havoc=True)
            return s
        if isinstance(s, IfStmt):
            cond = self.resolve_checked(s.cond, scope, BOOL)
            then = self.resolve_stmt(s.then, c, env)
            els = self.resolve_stmt(s.els, c, env) if s.els is not None else None
            return IfStmt(cond, then, els, span=s.span)
        if isinstance(s, QuantAssign):
            return self.resolve_quant_assign(s, c, env)
        if isinstance(s, Assume):
            return Assume(self.resolve_checked(s.cond, scope, BOOL), span=s.span)
        if isinstance(s, AssertStmt):
            return AssertStmt(self.resolve_checked(s.cond, scope, BOOL), span=s.span)
        raise M.SraError(f"unexpected statement {type(s).__name__}")

    def check_target(self, owner: ClassDecl, name: str, span,
                     havoc: bool = False) -> Optional[FieldDecl]:
        if name == "location":
            self.error("loc-assigned",
                       "location is not assignable: location changes happen "
                       "implicitly when transitions fire", span)
            return None
        if name == "executed":
            self.error("not-assignable", "the executed flag is scheduler-owned", span)
            return None
        fd = owner.field_map.get(name)
        if fd is None:
            if name in owner.param_map or name in owner.set_map or name in owner.ref_map:
                self.error("not-assignable", f"{name} is immutable", span)
            else:
                self.error("unknown-name",
                           f"class {owner.name} has no field {name}", span)
            return None
        if fd.is_input:
            self.error("input-assigned",
                       f"input {name} is externally controlled and cannot be assigned",
                       span)
            return None
        if fd.ghost:
            self.error("ghost-in-code", f"ghost field {name} cannot be assigned", span)
            return None
        if fd.is_event and havoc:
            self.error("event-false", f"event {name} can only be assigned true", span)
            return None
        return fd

    def _check_assign_value(self, fd: FieldDecl, value: Expr, scope: _Scope,
                            span) -> Expr:
        if fd.is_event:
            if not (isinstance(value, BoolLit) and value.value):
                self.error("event-false",
                           f"event {fd.name} can only be assigned true", span)
                return value
            return value
        want: TypeExpr = INT if fd.is_timer else fd.ty
        return self.resolve_checked(value, scope, want)

    def resolve_assign(self, s: Assign, c: ClassDecl,
                       env: dict[str, TypeExpr]) -> Stmt:
        scope = _Scope(c, env)
        owner_expr: Optional[Expr] = None
        owner_cls = c
        if s.owner is not None:
            oname = s.owner.name if isinstance(s.owner, Name) else None
            if oname == "self":
                owner_expr = None
            elif oname is not None and oname in c.ref_map:
                owner_expr = SelfField(oname, span=s.owner.span)
                owner_cls = self.model.class_map[c.ref_map[oname].cls]
            elif oname is not None and oname in env:
                self.error("qassign-shape",
                           "assignments through bound variables belong in "
                           "quantified assignments", s.span)
                return s
            else:
                self.error("unknown-name",
                           f"{oname} is not an object-valued field of {c.name}",
                           s.span)
                return s
        fd = self.check_target(owner_cls, s.field_name, s.span)
        if fd is None:
            return s
        value = self._check_assign_value(fd, s.value, scope, s.span)
        return Assign(s.field_name, value, owner_expr, span=s.span)

    def resolve_quant_assign(self, s: QuantAssign, c: ClassDecl,
                             env: dict[str, TypeExpr]) -> Stmt:
        scope = _Scope(c, env)
        before = len(self.diags)
        try:
            dom = self.resolve(s.dom, scope)
            dty = self.type_of(dom, scope)
        except _Bail:
            return s
        if len(self.diags) > before:
            return s
        if not isinstance(dty, SetType):
            self.error("quant-domain",
                       f"quantified assignment ranges over a set, got {dty}", s.span)
            return s
        elem_cls = self.model.class_map[dty.elem]
        fd = self.check_target(elem_cls, s.field_name, s.span)
        if fd is None:
            return s
        scope2 = scope.child(s.var, ClassType(dty.elem))
        value = self._check_assign_value(fd, s.value, scope2, s.span)
        return QuantAssign(s.var, dom, s.field_name, value, span=s.span)

    # -- scheduler -------------------------------------------------------------------

    def check_scheduler(self, m: Model) -> M.SchedulerDecl:
        s = m.scheduler
        if len(set(s.phases)) != len(s.phases):
            self.error("dup-decl", "duplicate phase names", s.span)
        for p in (s.initial, s.final):
            if p not in s.phases:
                self.error("unknown-phase", f"undeclared phase {p}", s.span)
        if s.initial == s.final:
            self.error("sched-shape", "initial and final phases must differ", s.span)
        transitions = []
        for t in s.transitions:
            for p in (t.source, t.target):
                if p not in s.phases:
                    self.error("unknown-phase", f"undeclared phase {p}", t.span)
            if t.source == s.final:
                self.error("sched-final-out",
                           "the final phase has only the implicit reset to the "
                           "initial phase", t.span)
            guard = self.resolve_checked(t.guard, _Scope(None, {}), BOOL)
            self.check_sched_guard_symbols(guard, t)
            transitions.append(M.SchedTransition(t.source, t.target, guard,
                                                 span=t.span))
        reachable = {s.initial}
        frontier = [s.initial]
        while frontier:
            p = frontier.pop()
            for t in s.transitions:
                if t.source == p and t.target not in reachable:
                    reachable.add(t.target)
                    frontier.append(t.target)
        for p in s.phases:
            if p not in reachable:
                self.error("sched-unreachable",
                           f"phase {p} is unreachable from {s.initial}", s.span)
        return M.SchedulerDecl(s.phases, s.initial, s.final, tuple(transitions),
                               span=s.span)

    def check_sched_guard_symbols(self, guard: Expr, t) -> None:
        """Scheduler guards reference only events, timers, and executed flags."""
        def walk(e: Expr, env: dict[str, str]) -> None:
            if isinstance(e, FieldAcc):
                ocls = self._obj_class(e.obj, None, env)
                ok = False
                if e.name == "executed":
                    ok = True
                elif ocls is not None:
                    fd = self.model.class_map[ocls].field_map.get(e.name)
                    ok = fd is not None and (fd.is_event or fd.is_timer)
                if not ok:
                    self.error("sched-guard-symbols",
                               f"scheduler guards reference only events, timers, "
                               f"and executed flags; {e.name} is not allowed",
                               e.span or t.span)
                walk(e.obj, env)
            elif isinstance(e, (SelfField, PhaseRef)):
                self.error("sched-guard-symbols",
                           "scheduler guards reference only events, timers, and "
                           "executed flags of instances", e.span or t.span)
            elif isinstance(e, Quant):
                if not isinstance(e.dom, AllSet):
                    self.error("sched-guard-symbols",
                               "scheduler guards quantify over All-sets only",
                               e.dom.span or t.span)
                env2 = dict(env)
                if isinstance(e.dom, AllSet) and e.dom.cls:
                    env2[e.var] = e.dom.cls
                walk(e.body, env2)
            else:
                M.map_children(e, lambda sub: (walk(sub, env), sub)[1])

        walk(guard, {})

    # -- constraints --------------------------------------------------------------------

    def check_constraint(self, g: Expr) -> Expr:
        resolved = self.resolve_checked(g, _Scope(None, {}), BOOL)
        for sym in M.free_symbols(resolved, self.model):
            if sym.kind in ("param", "set", "ref", "all"):
                continue
            self.error("constraint-mutable",
                       f"constraints mention only immutable symbols; "
                       f"{sym} is mutable", g.span)
        return resolved


# ---------------------------------------------------------------------------
# public entry points


def check_model(parsed: Model) -> tuple[Optional[Model], list[Diagnostic]]:
    return Checker(parsed).run()


def resolve_formula(e: Expr, m: Model, *, where: str = "invariant",
                    cls: Optional[ClassDecl] = None,
                    allow_old: bool = False) -> tuple[Optional[Expr], list[Diagnostic]]:
    """Resolve and type-check a standalone boolean formula over the model."""
    ch = Checker(m)
    ch.model = m
    scope = _Scope(cls, {}, allow_old=allow_old, where=where)
    r = ch.resolve_checked(e, scope, BOOL)
    if any(d.severity == "error" for d in ch.diags):
        return None, ch.diags
    return r, ch.diags

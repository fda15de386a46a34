"""Quantifier grounding for unit-cardinality set constraints: sets known to
hold at most one object become direct object references (nullable when the
bound is <= 1), quantifiers and set atoms over them collapse, and generated
equivalence lemmas justify every rewritten specification."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from . import model as M
from .contracts import all_contracts, exec_contract, init_contract, tick_contract
from .model import (AllSet, Assign, Binary, Card, ClassDecl, Expr, FieldAcc,
                    IfStmt, IntLit, Ite, Model, Not, NullLit, Old, Quant,
                    QuantAssign, RefDecl, SelfField, Seq, SetDecl, Skip,
                    SraError, Stmt, Transition, Var, and_, eq, implies, not_,
                    substitute)
from .vcgen import VerificationTask, make_lemma_task


class GroundingError(SraError):
    pass


@dataclass(frozen=True)
class PlanEntry:
    cls: str
    set_field: str
    ref_name: str
    elem: str
    nullable: bool  # True for |s| <= 1, False for |s| == 1


@dataclass
class GroundingPlan:
    entries: dict[tuple[str, str], PlanEntry] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)  # k >= 2 candidates

    def __bool__(self) -> bool:
        return bool(self.entries)

    def entry_for(self, cls: Optional[str], name: str) -> Optional[PlanEntry]:
        if cls is None:
            return None
        return self.entries.get((cls, name))


def _unit_pattern(g: Expr) -> Optional[tuple[str, str, int, bool]]:
    """Match forall c in All_C :: |c.s| == k  /  |c.s| <= k.
    Returns (class, set field, k, is_upper_bound)."""
    if not (isinstance(g, Quant) and g.kind == "forall"
            and isinstance(g.dom, AllSet) and g.dom.cls):
        return None
    body = g.body
    if not isinstance(body, Binary) or body.op not in ("eq", "le"):
        return None
    card, lit = body.left, body.right
    if isinstance(lit, Card):
        card, lit = lit, card
        if body.op == "le":
            return None  # k <= |s| is a lower bound
    if not (isinstance(card, Card) and isinstance(lit, IntLit)):
        return None
    acc = card.arg
    if not (isinstance(acc, FieldAcc) and isinstance(acc.obj, Var)
            and acc.obj.name == g.var):
        return None
    return (g.dom.cls, acc.name, lit.value, body.op == "le")


def _ref_name(cls: ClassDecl, set_name: str) -> str:
    base = set_name[:-1] if set_name.endswith("s") and len(set_name) > 1 \
        else set_name + "Obj"
    name = base
    taken = ({f.name for f in cls.fields} | set(cls.param_map)
             | set(cls.set_map) | set(cls.ref_map))
    while name in taken:
        name += "_1"
    return name


def plan(m: Model) -> GroundingPlan:
    """Scan the configuration constraints for unit-cardinality bounds; other
    cardinalities are ignored (k >= 2 expansion is out of scope and noted)."""
    out = GroundingPlan()
    for g in m.constraints:
        hit = _unit_pattern(g)
        if hit is None:
            continue
        cls_name, set_name, k, upper = hit
        cd = m.class_map[cls_name]
        if set_name not in cd.set_map:
            continue
        if k >= 2:
            out.skipped.append(
                f"{cls_name}.{set_name}: |...| {'<=' if upper else '=='} {k} "
                "(only k <= 1 is grounded)")
            continue
        if k == 0:
            continue  # an always-empty set is not worth a reference
        entry = PlanEntry(cls_name, set_name, _ref_name(cd, set_name),
                          cd.set_map[set_name].elem, nullable=upper)
        out.entries.setdefault((cls_name, set_name), entry)
    return out


# ---------------------------------------------------------------------------
# formula rewriting


class _Grounder:
    def __init__(self, m: Model, plan: GroundingPlan,
                 cls: Optional[ClassDecl] = None):
        self.m = m
        self.plan = plan
        self.cls = cls

    def obj_class(self, obj: Expr, env: dict[str, str]) -> Optional[str]:
        if isinstance(obj, Var):
            return env.get(obj.name)
        if isinstance(obj, M.SelfObj) and self.cls is not None:
            return self.cls.name
        if isinstance(obj, SelfField) and self.cls is not None:
            rd = self.cls.ref_map.get(obj.name)
            if rd:
                return rd.cls
        if isinstance(obj, FieldAcc):
            ocls = self.obj_class(obj.obj, env)
            if ocls:
                rd = self.m.class_map[ocls].ref_map.get(obj.name)
                if rd:
                    return rd.cls
        if isinstance(obj, Old):
            return self.obj_class(obj.arg, env)
        return None

    def grounded_set(self, e: Expr, env: dict[str, str]
                     ) -> Optional[tuple[PlanEntry, Expr]]:
        """When e reads a grounded set field: (plan entry, ref access)."""
        if isinstance(e, Old):
            inner = self.grounded_set(e.arg, env)
            return inner
        if isinstance(e, SelfField) and self.cls is not None:
            entry = self.plan.entry_for(self.cls.name, e.name)
            if entry:
                return entry, SelfField(entry.ref_name)
        if isinstance(e, FieldAcc):
            ocls = self.obj_class(e.obj, env)
            entry = self.plan.entry_for(ocls, e.name)
            if entry:
                return entry, FieldAcc(self.rewrite(e.obj, env), entry.ref_name)
        return None

    def mentions_grounded(self, e: Expr, env: dict[str, str]) -> bool:
        if self.grounded_set(e, env) is not None:
            return True
        hit = False

        def probe(sub: Expr) -> Expr:
            nonlocal hit
            if self.mentions_grounded(sub, env):
                hit = True
            return sub

        if isinstance(e, Quant):
            env = {**env, e.var: self._elem_of(e.dom, env) or ""}
        M.map_children(e, probe)
        return hit

    def _elem_of(self, dom: Expr, env: dict[str, str]) -> Optional[str]:
        g = self.grounded_set(dom, env)
        if g:
            return g[0].elem
        if isinstance(dom, AllSet):
            return dom.cls
        if isinstance(dom, Old):
            return self._elem_of(dom.arg, env)
        if isinstance(dom, SelfField) and self.cls is not None:
            sd = self.cls.set_map.get(dom.name)
            return sd.elem if sd else None
        if isinstance(dom, FieldAcc):
            ocls = self.obj_class(dom.obj, env)
            if ocls:
                sd = self.m.class_map[ocls].set_map.get(dom.name)
                if sd:
                    return sd.elem
        if isinstance(dom, Binary) and dom.op == "union":
            return self._elem_of(dom.left, env) or self._elem_of(dom.right, env)
        return None

    def member_form(self, x: Expr, sete: Expr, env: dict[str, str]) -> Expr:
        """x ∈ sete with grounded sets collapsed to object equalities."""
        g = self.grounded_set(sete, env)
        if g:
            entry, ref = g
            if entry.nullable:
                return and_(not_(eq(ref, NullLit())), eq(x, ref))
            return eq(x, ref)
        if isinstance(sete, Old):
            return self.member_form(x, sete.arg, env)
        if isinstance(sete, Binary) and sete.op == "union":
            return M.or_(self.member_form(x, sete.left, env),
                         self.member_form(x, sete.right, env))
        return Binary("in", x, self.rewrite(sete, env))

    def rewrite(self, e: Expr, env: dict[str, str]) -> Expr:
        g = self.grounded_set(e, env)
        if g is not None:
            raise GroundingError(
                f"grounded set used where a set value is required: {M.expr_text(e)}")
        if isinstance(e, Quant):
            gdom = self.grounded_set(e.dom, env)
            if gdom is not None:
                entry, ref = gdom
                env2 = {**env, e.var: entry.elem}
                body = self.rewrite(e.body, env2)
                body = substitute(body, {e.var: ref})
                if not entry.nullable:
                    return body
                null_test = eq(ref, NullLit())
                if e.kind == "forall":
                    return implies(not_(null_test), body)
                return and_(not_(null_test), body)
            env2 = {**env, e.var: self._elem_of(e.dom, env) or ""}
            if self.mentions_grounded(e.dom, env):
                elem = self._elem_of(e.dom, env)
                x = M.fresh_name(e.var)
                mem = self.member_form(Var(x), e.dom, env)
                body = substitute(self.rewrite(e.body, env2), {e.var: Var(x)})
                if e.kind == "forall":
                    return Quant("forall", x, AllSet(elem), implies(mem, body))
                return Quant("exists", x, AllSet(elem), and_(mem, body))
            return Quant(e.kind, e.var, self.rewrite(e.dom, env),
                         self.rewrite(e.body, env2), span=e.span)
        if isinstance(e, Card):
            gs = self.grounded_set(e.arg, env)
            if gs:
                entry, ref = gs
                if entry.nullable:
                    return Ite(eq(ref, NullLit()), IntLit(0), IntLit(1))
                return IntLit(1)
            return Card(self.rewrite(e.arg, env), span=e.span)
        if isinstance(e, Binary):
            if e.op == "in" and self.mentions_grounded(e.right, env):
                return self.member_form(self.rewrite(e.left, env), e.right, env)
            if e.op in ("seteq", "subset", "disjoint") and (
                    self.mentions_grounded(e.left, env)
                    or self.mentions_grounded(e.right, env)):
                elem = self._elem_of(e.left, env) or self._elem_of(e.right, env)
                x = M.fresh_name("x")
                lm = self.member_form(Var(x), e.left, env)
                rm = self.member_form(Var(x), e.right, env)
                body = {"seteq": eq(lm, rm),
                        "subset": implies(lm, rm),
                        "disjoint": not_(and_(lm, rm))}[e.op]
                return Quant("forall", x, AllSet(elem), body)
            if e.op == "union" and (self.mentions_grounded(e.left, env)
                                    or self.mentions_grounded(e.right, env)):
                raise GroundingError(
                    "a union over a grounded set escapes its atom; "
                    "rewrite the enclosing comparison instead")
            return Binary(e.op, self.rewrite(e.left, env),
                          self.rewrite(e.right, env), span=e.span)
        return M.map_children(e, lambda sub: self.rewrite(sub, env))


def ground_formula(e: Expr, pl: GroundingPlan, m: Model,
                   cls: Optional[ClassDecl] = None) -> Expr:
    """Rewrite quantifiers and set atoms over grounded sets into direct
    object-reference forms; everything else is structural."""
    if not pl:
        return e
    return _Grounder(m, pl, cls).rewrite(e, {})


# ---------------------------------------------------------------------------
# statement / model rewriting


def _ground_stmt(s: Stmt, gr: _Grounder) -> Stmt:
    if isinstance(s, Skip):
        return s
    if isinstance(s, Seq):
        return Seq(tuple(_ground_stmt(x, gr) for x in s.stmts), span=s.span)
    if isinstance(s, Assign):
        return Assign(s.field_name, gr.rewrite(s.value, {}), s.owner, span=s.span)
    if isinstance(s, M.Havoc):
        return s
    if isinstance(s, IfStmt):
        return IfStmt(gr.rewrite(s.cond, {}), _ground_stmt(s.then, gr),
                      _ground_stmt(s.els, gr) if s.els else None, span=s.span)
    if isinstance(s, (M.Assume, M.AssertStmt)):
        return type(s)(gr.rewrite(s.cond, {}), span=s.span)
    if isinstance(s, QuantAssign):
        gdom = gr.grounded_set(s.dom, {})
        if gdom is None:
            return QuantAssign(s.var, gr.rewrite(s.dom, {}), s.field_name,
                               gr.rewrite(s.value, {}), span=s.span)
        entry, ref = gdom
        value = substitute(gr.rewrite(s.value, {s.var: entry.elem}),
                           {s.var: ref})
        assign = Assign(s.field_name, value, owner=ref, span=s.span)
        if not entry.nullable:
            return assign
        return IfStmt(not_(eq(ref, NullLit())), assign, None, span=s.span)
    raise SraError(f"cannot ground {type(s).__name__}")


def ground_statements(m: Model, pl: GroundingPlan) -> Model:
    """The grounded model: planned set fields become ghost, object-valued
    ref fields are added, and code-level quantifiers/assignments over them
    collapse.  Configuration constraints stay over the ghost sets."""
    classes = []
    for c in m.classes:
        gr = _Grounder(m, pl, c)
        members: list[M.ClassMember] = []
        for mem in c.members:
            if isinstance(mem, SetDecl) and (c.name, mem.name) in pl.entries:
                entry = pl.entries[(c.name, mem.name)]
                members.append(replace(mem, ghost=True))
                members.append(RefDecl(entry.ref_name, entry.elem, mem.name,
                                       entry.nullable))
            elif isinstance(mem, Transition):
                members.append(Transition(
                    mem.name, mem.start, gr.rewrite(mem.guard, {}), mem.end,
                    _ground_stmt(mem.effect, gr), mem.phase, span=mem.span))
            else:
                members.append(mem)
        classes.append(ClassDecl(c.name, tuple(members), span=c.span))
    sched = m.scheduler
    sched = M.SchedulerDecl(
        sched.phases, sched.initial, sched.final,
        tuple(M.SchedTransition(t.source, t.target,
                                _Grounder(m, pl).rewrite(t.guard, {}),
                                span=t.span)
              for t in sched.transitions), span=sched.span)
    return Model(m.enums, tuple(classes), sched, m.constraints, span=m.span)


# ---------------------------------------------------------------------------
# equivalence lemmas


def _linking_expr(m: Model, pl: GroundingPlan) -> Expr:
    """The lemma assumptions tying each ghost set to its grounded field:
    empty ghost set means null, singleton ghost set means that member."""
    parts = []
    for (cls_name, set_name), entry in sorted(pl.entries.items()):
        o = M.fresh_name("o")
        ghost = FieldAcc(Var(o), set_name)
        ref = FieldAcc(Var(o), entry.ref_name)
        y = M.fresh_name("y")
        pointwise = Quant(
            "forall", y, AllSet(entry.elem),
            eq(Binary("in", Var(y), ghost), eq(Var(y), ref)))
        parts.append(Quant(
            "forall", o, AllSet(cls_name),
            and_(implies(eq(Card(ghost), IntLit(0)), eq(ref, NullLit())),
                 implies(eq(Card(ghost), IntLit(1)),
                         and_(not_(eq(ref, NullLit())), pointwise)))))
    return and_(*parts)


def spec_suite(m: Model, grounded: Model, inv: Optional[Expr] = None,
               prop: Optional[Expr] = None) -> list[tuple[str, Expr, Expr, dict]]:
    """(name, original, grounded, instance-constants) for all contracts,
    the invariant, the property, and the scheduler guards."""
    pl = plan(m)
    out: list[tuple[str, Expr, Expr, dict]] = []
    for c in m.classes:
        const = {"c": c.name}
        io = init_contract(m, c.name)
        ig = init_contract(grounded, c.name)
        out.append((f"init_{c.name}",
                    M.subst_self(io.formula, Var("c")),
                    M.subst_self(ig.formula, Var("c")), const))
        for phase in m.scheduler.phases:
            to = exec_contract(m, c.name, phase)
            tg = exec_contract(grounded, c.name, phase)
            out.append((f"exec_{c.name}_{phase}",
                        M.subst_self(to.formula, Var("c")),
                        M.subst_self(tg.formula, Var("c")), const))
        ko = tick_contract(m, c.name)
        kg = tick_contract(grounded, c.name)
        out.append((f"tick_{c.name}",
                    M.subst_self(ko.formula, Var("c")),
                    M.subst_self(kg.formula, Var("c")), const))
    for i, t in enumerate(m.scheduler.transitions):
        gt = grounded.scheduler.transitions[i]
        out.append((f"sched_{t.source}_{t.target}_{i}", t.guard, gt.guard, {}))
    if inv is not None:
        out.append(("invariant", inv, ground_formula(inv, pl, m), {}))
    if prop is not None:
        out.append(("property", prop, ground_formula(prop, pl, m), {}))
    return out


def equivalence_lemmas(m: Model, pl: GroundingPlan,
                       specs: Optional[list[tuple[str, Expr, Expr, dict]]] = None,
                       inv: Optional[Expr] = None, prop: Optional[Expr] = None,
                       card_bound: int = 4) -> list[VerificationTask]:
    """One task per spec: under the configuration constraints and the
    ghost/grounded linking assumptions, the grounded formula is equivalent to
    the original."""
    grounded = ground_statements(m, pl)
    if specs is None:
        specs = spec_suite(m, grounded, inv, prop)
    linking = _linking_expr(m, pl)
    tasks = []
    for name, original, ground_v, consts in specs:
        formula = implies(linking, eq(ground_v, original))
        tasks.append(make_lemma_task(
            grounded, f"lemma_{name}", formula, consts,
            {"spec": name}, card_bound))
    return tasks

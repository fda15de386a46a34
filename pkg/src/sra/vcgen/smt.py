"""SMT-LIB 2.6 encoding of models and two-state formulas.

Classes become uninterpreted sorts, All-sets and set-valued fields become
membership predicates, parameters and mutable fields become unary functions
(one pre and one post vintage), enums and timers become datatypes, and
cardinality atoms expand into distinct-witness formulas."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

from .. import model as M
from ..model import (AllSet, Binary, BoolLit, Card, ClassDecl, EnumVal, Expr,
                     FieldAcc, InactiveLit, IntLit, Ite, Model, Name, Not,
                     NullLit, Old, PhaseRef, PhaseVal, Quant, SelfField,
                     SraError, TimerActive, TimerCount, Var)


class EncodingError(SraError):
    pass


_SMT_RESERVED = {
    "assert", "check-sat", "declare-fun", "define-fun", "exists", "forall",
    "ite", "let", "not", "and", "or", "xor", "true", "false", "distinct",
    "Int", "Bool", "Real", "select", "store", "as", "is", "par", "match",
    "tm_inactive", "tm_active", "tm_count",
}

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def sanitize(name: str) -> str:
    if _IDENT.match(name) and name not in _SMT_RESERVED:
        return name
    return "s_" + re.sub(r"[^A-Za-z0-9_]", "_", name)


# A resolver maps (class name, field name, "executed"/field) to a symbol.
Resolver = Callable[[str, str], str]


def vintage_resolver(vintage: str) -> Resolver:
    return lambda cls, fname: f"{sanitize(cls)}__{sanitize(fname)}__{vintage}"


PRE = vintage_resolver("pre")
POST = vintage_resolver("post")


@dataclass
class EncEnv:
    """Bound variables and free instance constants, typed by class name."""

    vars: dict[str, str]
    fields: Resolver
    phase_sym: str

    def bind(self, var: str, cls: str) -> "EncEnv":
        out = dict(self.vars)
        out[var] = cls
        return EncEnv(out, self.fields, self.phase_sym)

    def with_fields(self, fields: Resolver, phase_sym: str) -> "EncEnv":
        return EncEnv(self.vars, fields, phase_sym)


class Encoder:
    """Stateless except for a fresh-variable counter; one per model."""

    def __init__(self, model: Model, card_bound: int = 4):
        self.m = model
        self.card_bound = card_bound
        self._fresh = 0

    # -- plumbing -----------------------------------------------------------

    def fresh(self, base: str = "x") -> str:
        self._fresh += 1
        return f"{base}!{self._fresh}"

    def env(self, consts: Optional[dict[str, str]] = None,
            vintage: str = "post") -> EncEnv:
        res = POST if vintage == "post" else PRE
        return EncEnv(dict(consts or {}), res, f"phase__{vintage}")

    def param_sym(self, cls: str, name: str) -> str:
        return f"{sanitize(cls)}__{sanitize(name)}"

    def set_sym(self, cls: str, name: str) -> str:
        return f"{sanitize(cls)}__{sanitize(name)}"

    def ref_val_sym(self, cls: str, name: str) -> str:
        return f"{sanitize(cls)}__{sanitize(name)}__val"

    def ref_null_sym(self, cls: str, name: str) -> str:
        return f"{sanitize(cls)}__{sanitize(name)}__null"

    def all_sym(self, cls: str) -> str:
        return f"All_{sanitize(cls)}"

    def sort(self, cls: str) -> str:
        return sanitize(cls)

    def type_sort(self, ty) -> str:
        if isinstance(ty, M.IntType):
            return "Int"
        if isinstance(ty, (M.BoolType, M.EventType)):
            return "Bool"
        if isinstance(ty, M.EnumType):
            return sanitize(ty.name)
        if isinstance(ty, M.TimerType):
            return "TimerVal"
        if isinstance(ty, M.ClassType):
            return self.sort(ty.name)
        raise EncodingError(f"no SMT sort for {ty}")

    # -- preamble -----------------------------------------------------------

    def preamble(self, logic: str = "ALL") -> list[str]:
        m = self.m
        out: list[str] = [f"(set-logic {logic})"]
        for e in m.enums:
            ctors = " ".join(f"({sanitize(v)})" for v in e.values)
            out.append(f"(declare-datatypes (({sanitize(e.name)} 0)) (({ctors})))")
        phases = " ".join(f"({sanitize(p)})" for p in m.scheduler.phases)
        out.append(f"(declare-datatypes ((Phase 0)) (({phases})))")
        if any(c.timers() for c in m.classes):
            out.append("(declare-datatypes ((TimerVal 0)) "
                       "(((tm_inactive) (tm_active (tm_count Int)))))")
        for c in m.classes:
            out.append(f"(declare-sort {self.sort(c.name)} 0)")
        for c in m.classes:
            out.append(f"(declare-fun {self.all_sym(c.name)} "
                       f"({self.sort(c.name)}) Bool)")
        for c in m.classes:
            for p in c.params:
                out.append(f"(declare-fun {self.param_sym(c.name, p.name)} "
                           f"({self.sort(c.name)}) {self.type_sort(p.ty)})")
            for s in c.sets:
                out.append(f"(declare-fun {self.set_sym(c.name, s.name)} "
                           f"({self.sort(c.name)} {self.sort(s.elem)}) Bool)")
            for r in c.refs:
                out.append(f"(declare-fun {self.ref_val_sym(c.name, r.name)} "
                           f"({self.sort(c.name)}) {self.sort(r.cls)})")
                out.append(f"(declare-fun {self.ref_null_sym(c.name, r.name)} "
                           f"({self.sort(c.name)}) Bool)")
            for f in c.fields:
                for v in ("pre", "post"):
                    out.append(f"(declare-fun "
                               f"{vintage_resolver(v)(c.name, f.name)} "
                               f"({self.sort(c.name)}) {self.type_sort(f.ty)})")
            for v in ("pre", "post"):
                out.append(f"(declare-fun {vintage_resolver(v)(c.name, 'executed')} "
                           f"({self.sort(c.name)}) Bool)")
        out.append("(declare-const phase__pre Phase)")
        out.append("(declare-const phase__post Phase)")
        out.extend(self.containment_axioms())
        out.extend(self.ref_axioms())
        for i, g in enumerate(self.m.constraints):
            out.append(f"; configuration constraint {i + 1}")
            out.append(f"(assert {self.encode(g, self.env())})")
        return out

    def containment_axioms(self) -> list[str]:
        out = []
        for c in self.m.classes:
            for s in c.sets:
                o, x = self.fresh("o"), self.fresh("e")
                out.append(
                    f"(assert (forall (({o} {self.sort(c.name)}) "
                    f"({x} {self.sort(s.elem)})) "
                    f"(=> ({self.set_sym(c.name, s.name)} {o} {x}) "
                    f"({self.all_sym(s.elem)} {x}))))")
        return out

    def ref_axioms(self) -> list[str]:
        """Grounded fields are derived from their ghost sets: empty ghost set
        means null, singleton ghost set means the unique member."""
        out = []
        for c in self.m.classes:
            for r in c.refs:
                o = self.fresh("o")
                x, y = self.fresh("x"), self.fresh("y")
                g = self.set_sym(c.name, r.grounds)
                val = f"({self.ref_val_sym(c.name, r.name)} {o})"
                null = f"({self.ref_null_sym(c.name, r.name)} {o})"
                D = self.sort(r.cls)
                empty = f"(forall (({x} {D})) (not ({g} {o} {x})))"
                one = (f"(and (exists (({x} {D})) ({g} {o} {x})) "
                       f"(forall (({x} {D}) ({y} {D})) "
                       f"(=> (and ({g} {o} {x}) ({g} {o} {y})) (= {x} {y}))))")
                pin = (f"(and (not {null}) "
                       f"(forall (({x} {D})) (= ({g} {o} {x}) (= {x} {val}))))")
                out.append(
                    f"(assert (forall (({o} {self.sort(c.name)})) "
                    f"(=> ({self.all_sym(c.name)} {o}) "
                    f"(and (=> {empty} {null}) (=> {one} {pin})))))")
        return out

    # -- typing helpers -------------------------------------------------------

    def obj_class(self, e: Expr, env: EncEnv) -> Optional[str]:
        if isinstance(e, Var):
            return env.vars.get(e.name)
        if isinstance(e, Old):
            return self.obj_class(e.arg, env)
        if isinstance(e, FieldAcc):
            ocls = self.obj_class(e.obj, env)
            if ocls:
                rd = self.m.class_map[ocls].ref_map.get(e.name)
                if rd:
                    return rd.cls
        if isinstance(e, Ite):
            return self.obj_class(e.then, env)
        return None

    def ref_of(self, e: Expr, env: EncEnv) -> Optional[tuple[str, str, Expr]]:
        """(owner class, ref name, owner expr) when e reads a grounded field."""
        if isinstance(e, Old):
            return self.ref_of(e.arg, env)
        if isinstance(e, FieldAcc):
            ocls = self.obj_class(e.obj, env)
            if ocls and e.name in self.m.class_map[ocls].ref_map:
                return (ocls, e.name, e.obj)
        return None

    def set_elem(self, e: Expr, env: EncEnv) -> str:
        if isinstance(e, AllSet) and e.cls:
            return e.cls
        if isinstance(e, Old):
            return self.set_elem(e.arg, env)
        if isinstance(e, FieldAcc):
            ocls = self.obj_class(e.obj, env)
            if ocls:
                sd = self.m.class_map[ocls].set_map.get(e.name)
                if sd:
                    return sd.elem
        if isinstance(e, Binary) and e.op == "union":
            return self.set_elem(e.left, env)
        raise EncodingError(f"not a set expression: {M.expr_text(e)}")

    def is_set_expr(self, e: Expr, env: EncEnv) -> bool:
        try:
            self.set_elem(e, env)
            return True
        except EncodingError:
            return False

    # -- membership --------------------------------------------------------------

    def member(self, x: str, sete: Expr, env: EncEnv) -> str:
        if isinstance(sete, Old):
            return self.member(x, sete.arg, env)  # sets are immutable
        if isinstance(sete, AllSet):
            if sete.cls is None:
                raise EncodingError("unresolved All")
            return f"({self.all_sym(sete.cls)} {x})"
        if isinstance(sete, FieldAcc):
            ocls = self.obj_class(sete.obj, env)
            if ocls and sete.name in self.m.class_map[ocls].set_map:
                o = self.encode(sete.obj, env)
                return f"({self.set_sym(ocls, sete.name)} {o} {x})"
        if isinstance(sete, Binary) and sete.op == "union":
            return (f"(or {self.member(x, sete.left, env)} "
                    f"{self.member(x, sete.right, env)})")
        raise EncodingError(f"not a set expression: {M.expr_text(sete)}")

    # -- cardinality ----------------------------------------------------------------

    def card_atom(self, op: str, left: Expr, right: Expr, env: EncEnv) -> str:
        if isinstance(left, Card) and isinstance(right, Card):
            raise EncodingError("cardinality comparisons need a constant side")
        if isinstance(left, Card):
            sete, other, flip = left.arg, right, False
        else:
            sete, other, flip = right.arg, left, True
        if not isinstance(other, IntLit):
            raise EncodingError(
                "cardinality atoms compare against integer literals only")
        k = other.value
        # normalize to |s| >= k / |s| <= k
        if op == "eq":
            return f"(and {self.card_ge(sete, k, env)} {self.card_le(sete, k, env)})"
        if op == "le":
            #  not flip: |s| <= k    flip: k <= |s|
            return self.card_ge(sete, k, env) if flip else self.card_le(sete, k, env)
        if op == "lt":
            #  not flip: |s| < k     flip: k < |s|
            return (self.card_ge(sete, k + 1, env) if flip
                    else self.card_le(sete, k - 1, env))
        raise EncodingError(f"unsupported cardinality operator {op}")

    def card_ge(self, sete: Expr, k: int, env: EncEnv) -> str:
        if k <= 0:
            return "true"
        if k > self.card_bound:
            raise EncodingError(
                f"cardinality bound {k} exceeds the expansion bound "
                f"{self.card_bound}; raise --card-bound")
        D = self.sort(self.set_elem(sete, env))
        xs = [self.fresh("w") for _ in range(k)]
        decls = " ".join(f"({x} {D})" for x in xs)
        members = " ".join(self.member(x, sete, env) for x in xs)
        if k == 1:
            return f"(exists (({xs[0]} {D})) {members})"
        return (f"(exists ({decls}) (and (distinct {' '.join(xs)}) "
                f"{members}))")

    def card_le(self, sete: Expr, k: int, env: EncEnv) -> str:
        if k < 0:
            return "false"
        if k > self.card_bound:
            raise EncodingError(
                f"cardinality bound {k} exceeds the expansion bound "
                f"{self.card_bound}; raise --card-bound")
        D = self.sort(self.set_elem(sete, env))
        xs = [self.fresh("w") for _ in range(k + 1)]
        decls = " ".join(f"({x} {D})" for x in xs)
        members = " ".join(self.member(x, sete, env) for x in xs)
        eqs = [f"(= {xs[i]} {xs[j]})"
               for i in range(k + 1) for j in range(i + 1, k + 1)]
        if not eqs:  # k == 0: the set is empty
            return f"(forall ({decls}) (not {members}))"
        return (f"(forall ({decls}) (=> (and {members}) "
                f"(or {' '.join(eqs)})))")

    # -- equality ---------------------------------------------------------------------

    def encode_eq(self, left: Expr, right: Expr, env: EncEnv) -> str:
        if isinstance(left, NullLit) and isinstance(right, NullLit):
            return "true"
        for a, b in ((left, right), (right, left)):
            if isinstance(b, NullLit):
                ref = self.ref_of(a, env)
                if ref is None:
                    return "false"  # bound instances are never null
                ocls, rname, obj = ref
                return f"({self.ref_null_sym(ocls, rname)} {self.encode(obj, env)})"
        lref, rref = self.ref_of(left, env), self.ref_of(right, env)
        if lref and rref:
            lo = f"({self.ref_null_sym(lref[0], lref[1])} {self.encode(lref[2], env)})"
            ro = f"({self.ref_null_sym(rref[0], rref[1])} {self.encode(rref[2], env)})"
            lv, rv = self.encode(left, env), self.encode(right, env)
            return (f"(or (and {lo} {ro}) "
                    f"(and (not {lo}) (not {ro}) (= {lv} {rv})))")
        for a, b in ((lref, right), (rref, left)):
            if a:
                nul = f"({self.ref_null_sym(a[0], a[1])} {self.encode(a[2], env)})"
                av = self.encode(left if a is lref else right, env)
                bv = self.encode(b, env)
                return f"(and (not {nul}) (= {av} {bv}))"
        return f"(= {self.encode(left, env)} {self.encode(right, env)})"

    # -- main encoding -------------------------------------------------------------------

    def encode(self, e: Expr, env: EncEnv) -> str:
        if isinstance(e, IntLit):
            return str(e.value) if e.value >= 0 else f"(- {-e.value})"
        if isinstance(e, BoolLit):
            return "true" if e.value else "false"
        if isinstance(e, EnumVal):
            return sanitize(e.value)
        if isinstance(e, PhaseVal):
            return sanitize(e.value)
        if isinstance(e, InactiveLit):
            return "tm_inactive"
        if isinstance(e, PhaseRef):
            return env.phase_sym
        if isinstance(e, Var):
            if e.name not in env.vars:
                raise EncodingError(f"unbound variable {e.name}")
            return sanitize(e.name)
        if isinstance(e, Old):
            return self.encode(e.arg, env.with_fields(PRE, "phase__pre"))
        if isinstance(e, FieldAcc):
            ocls = self.obj_class(e.obj, env)
            if ocls is None:
                raise EncodingError(f"cannot type object in {M.expr_text(e)}")
            cd = self.m.class_map[ocls]
            o = self.encode(e.obj, env)
            if e.name == "executed" or e.name in cd.field_map:
                return f"({env.fields(ocls, e.name)} {o})"
            if e.name in cd.param_map:
                return f"({self.param_sym(ocls, e.name)} {o})"
            if e.name in cd.ref_map:
                return f"({self.ref_val_sym(ocls, e.name)} {o})"
            raise EncodingError(f"cannot encode member access {M.expr_text(e)}")
        if isinstance(e, TimerActive):
            return f"((_ is tm_active) {self.encode(e.arg, env)})"
        if isinstance(e, TimerCount):
            return f"(tm_count {self.encode(e.arg, env)})"
        if isinstance(e, Not):
            return f"(not {self.encode(e.arg, env)})"
        if isinstance(e, Ite):
            return (f"(ite {self.encode(e.cond, env)} "
                    f"{self.encode(e.then, env)} {self.encode(e.els, env)})")
        if isinstance(e, Quant):
            elem = self.set_elem(e.dom, env)
            x = sanitize(e.var)
            inner = env.bind(e.var, elem)
            body = self.encode(e.body, inner)
            mem = self.member(x, e.dom, inner)
            if e.kind == "forall":
                return f"(forall (({x} {self.sort(elem)})) (=> {mem} {body}))"
            return f"(exists (({x} {self.sort(elem)})) (and {mem} {body}))"
        if isinstance(e, Card):
            raise EncodingError(
                "|...| may only appear in comparisons against constants")
        if isinstance(e, Binary):
            return self.encode_binary(e, env)
        if isinstance(e, SelfField):
            raise EncodingError("uninstantiated self in formula")
        if isinstance(e, Name):
            raise EncodingError(f"unresolved name {e.name}")
        raise EncodingError(f"cannot encode {type(e).__name__}")

    def encode_binary(self, e: Binary, env: EncEnv) -> str:
        op = e.op
        if op in ("eq", "le", "lt") and (isinstance(e.left, Card)
                                         or isinstance(e.right, Card)):
            return self.card_atom(op, e.left, e.right, env)
        if op == "eq":
            if self.is_set_expr(e.left, env) or self.is_set_expr(e.right, env):
                op = "seteq"
            else:
                return self.encode_eq(e.left, e.right, env)
        if op in ("seteq", "subset", "disjoint"):
            D = self.sort(self.set_elem(e.left, env))
            x = self.fresh("x")
            lm = self.member(x, e.left, env)
            rm = self.member(x, e.right, env)
            body = {"seteq": f"(= {lm} {rm})",
                    "subset": f"(=> {lm} {rm})",
                    "disjoint": f"(not (and {lm} {rm}))"}[op]
            return f"(forall (({x} {D})) {body})"
        if op == "in":
            x = self.encode(e.left, env)
            return self.member(x, e.right, env)
        l, r = self.encode(e.left, env), self.encode(e.right, env)
        table = {"add": "+", "sub": "-", "mul": "*", "lt": "<", "le": "<=",
                 "and": "and", "or": "or", "implies": "=>"}
        if op in table:
            return f"({table[op]} {l} {r})"
        raise EncodingError(f"cannot encode operator {op}")

"""Recursive-descent parser producing unresolved syntax trees.

Name resolution, operator typing (union vs +, subset vs <=), and every
language restriction live in the checker; the parser only builds shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .. import model as M
from .diagnostics import Diagnostic
from .lexer import LexError, Token, tokenize


class _ParseError(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag
        super().__init__(diag.message)


@dataclass
class RawConfig:
    universes: list[tuple[str, list[str], M.Span]]
    set_assigns: list[tuple[str, str, list[str], M.Span]]
    lit_assigns: list[tuple[str, str, M.Expr, M.Span]]


class Parser:
    def __init__(self, source: str, filename: str):
        self.toks = tokenize(source, filename)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def eat(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def accept(self, kind: str) -> Optional[Token]:
        if self.at(kind):
            return self.eat()
        return None

    def expect(self, kind: str, what: str = "") -> Token:
        if self.at(kind):
            return self.eat()
        t = self.peek()
        want = what or f"'{kind}'"
        got = t.text or t.kind
        raise _ParseError(Diagnostic("error", "syntax",
                                     f"expected {want}, got '{got}'", t.span))

    def ident(self, what: str = "identifier") -> Token:
        return self.expect("IDENT", what)

    # -- model -------------------------------------------------------------

    def model(self) -> M.Model:
        enums: list[M.EnumDecl] = []
        classes: list[M.ClassDecl] = []
        scheduler: Optional[M.SchedulerDecl] = None
        constraints: list[M.Expr] = []
        start = self.peek().span
        while not self.at("EOF"):
            t = self.peek()
            if t.kind == "enum":
                enums.append(self.enum_decl())
            elif t.kind == "class":
                classes.append(self.class_decl())
            elif t.kind == "scheduler":
                if scheduler is not None:
                    raise _ParseError(Diagnostic(
                        "error", "dup-decl", "duplicate scheduler block", t.span))
                scheduler = self.scheduler_decl()
            elif t.kind == "constraints":
                constraints.extend(self.constraints_decl())
            else:
                raise _ParseError(Diagnostic(
                    "error", "syntax",
                    f"expected a declaration, got '{t.text or t.kind}'", t.span))
        if not classes:
            raise _ParseError(Diagnostic(
                "error", "no-classes", "no class declarations", start))
        if scheduler is None:
            raise _ParseError(Diagnostic(
                "error", "no-scheduler", "missing scheduler block", start))
        return M.Model(tuple(enums), tuple(classes), scheduler,
                       tuple(constraints), span=start)

    def enum_decl(self) -> M.EnumDecl:
        kw = self.expect("enum")
        name = self.ident("enum name")
        self.expect("{")
        values = [self.ident("enum value").text]
        while self.accept(","):
            values.append(self.ident("enum value").text)
        self.expect("}")
        return M.EnumDecl(name.text, tuple(values), span=kw.span)

    def class_decl(self) -> M.ClassDecl:
        kw = self.expect("class")
        name = self.ident("class name")
        self.expect("{")
        members: list[M.ClassMember] = []
        while not self.at("}"):
            members.append(self.class_member())
        self.expect("}")
        return M.ClassDecl(name.text, tuple(members), span=kw.span)

    def class_member(self) -> M.ClassMember:
        ghost = self.accept("ghost") is not None
        t = self.peek()
        if t.kind in ("var", "input", "event"):
            return self.field_decl(ghost)
        if t.kind == "param":
            if ghost:
                raise _ParseError(Diagnostic("error", "syntax",
                                             "params cannot be ghost", t.span))
            kw = self.eat()
            name = self.ident()
            self.expect(":")
            ty = self.type_ref()
            return M.ParamDecl(name.text, ty, span=kw.span)
        if t.kind == "set":
            kw = self.eat()
            name = self.ident()
            self.expect(":")
            elem = self.set_type()
            return M.SetDecl(name.text, elem, ghost=ghost, span=kw.span)
        if t.kind == "ref":
            kw = self.eat()
            name = self.ident()
            self.expect(":")
            cls = self.ident("class name")
            self.expect("grounds")
            src = self.ident("set name")
            return M.RefDecl(name.text, cls.text, src.text, nullable=True,
                             span=kw.span)
        if t.kind == "transition":
            if ghost:
                raise _ParseError(Diagnostic("error", "syntax",
                                             "transitions cannot be ghost", t.span))
            return self.transition_decl()
        raise _ParseError(Diagnostic(
            "error", "syntax",
            f"expected a class member, got '{t.text or t.kind}'", t.span))

    def field_decl(self, ghost: bool) -> M.FieldDecl:
        kw = self.eat()  # var | input | event
        name = self.ident()
        self.expect(":")
        ty = self.type_ref()
        init = None
        if self.accept("="):
            init = self.expr()
        return M.FieldDecl(name.text, ty, init, is_input=(kw.kind == "input"),
                           ghost=ghost, span=kw.span)

    def type_ref(self) -> M.TypeExpr:
        t = self.ident("type name")
        if t.text == "Int":
            return M.INT
        if t.text == "Bool":
            return M.BOOL
        if t.text == "Timer":
            return M.TIMER
        if t.text == "Event":
            return M.EVENT
        if t.text == "Set":
            self.expect("<")
            elem = self.ident("class name")
            self.expect(">")
            return M.SetType(elem.text)
        return M.EnumType(t.text)

    def set_type(self) -> str:
        t = self.ident("Set type")
        if t.text != "Set":
            raise _ParseError(Diagnostic("error", "syntax",
                                         "set declarations need Set<...>", t.span))
        self.expect("<")
        elem = self.ident("class name")
        self.expect(">")
        return elem.text

    def transition_decl(self) -> M.Transition:
        kw = self.expect("transition")
        name = self.ident("transition name")
        self.expect("=")
        self.expect("(")
        start = self.ident("start location")
        self.expect(",")
        guard = self.expr()
        self.expect(",")
        end = self.ident("end location")
        self.expect(",")
        effect = self.stmt_block()
        self.expect(",")
        phase = self.ident("phase name")
        self.expect(")")
        return M.Transition(name.text, start.text, guard, end.text, effect,
                            phase.text, span=kw.span)

    def scheduler_decl(self) -> M.SchedulerDecl:
        kw = self.expect("scheduler")
        self.expect("{")
        self.expect("phases")
        phases = [self.ident("phase name").text]
        while self.accept(","):
            phases.append(self.ident("phase name").text)
        self.expect(";")
        self.expect("initial")
        initial = self.ident("phase name").text
        self.expect(";")
        self.expect("final")
        final = self.ident("phase name").text
        self.expect(";")
        transitions = []
        while self.at("trans"):
            tkw = self.eat()
            src = self.ident("phase name").text
            self.expect("->")
            tgt = self.ident("phase name").text
            self.expect("when")
            guard = self.expr()
            self.expect(";")
            transitions.append(M.SchedTransition(src, tgt, guard, span=tkw.span))
        self.expect("}")
        return M.SchedulerDecl(tuple(phases), initial, final,
                               tuple(transitions), span=kw.span)

    def constraints_decl(self) -> list[M.Expr]:
        self.expect("constraints")
        self.expect("{")
        out = []
        while not self.at("}"):
            out.append(self.expr())
            self.expect(";")
        self.expect("}")
        return out

    # -- statements ----------------------------------------------------------

    def stmt_block(self) -> M.Stmt:
        lb = self.expect("{")
        stmts = []
        while not self.at("}"):
            stmts.append(self.stmt())
        self.expect("}")
        if not stmts:
            return M.Skip(span=lb.span)
        if len(stmts) == 1:
            return stmts[0]
        return M.Seq(tuple(stmts), span=lb.span)

    def stmt(self) -> M.Stmt:
        t = self.peek()
        if t.kind == "if":
            self.eat()
            cond = self.expr()
            self.expect("then")
            then = self.stmt_block()
            els = None
            if self.accept("else"):
                els = self.stmt_block()
            return M.IfStmt(cond, then, els, span=t.span)
        if t.kind == "forall":
            self.eat()
            var = self.ident("bound variable").text
            self.expect("in")
            dom = self.additive()
            self.expect("{")
            obj = self.ident("bound variable")
            self.expect(".")
            fieldname = self.ident("field name").text
            self.expect(":=")
            value = self.expr()
            self.expect(";")
            self.expect("}")
            if obj.text != var:
                raise _ParseError(Diagnostic(
                    "error", "qassign-shape",
                    "quantified assignment must assign through its bound variable",
                    obj.span))
            return M.QuantAssign(var, dom, fieldname, value, span=t.span)
        if t.kind == "assume":
            self.eat()
            cond = self.expr()
            self.expect(";")
            return M.Assume(cond, span=t.span)
        if t.kind == "assert":
            self.eat()
            cond = self.expr()
            self.expect(";")
            return M.AssertStmt(cond, span=t.span)
        if t.kind == "IDENT":
            name = self.eat()
            owner: Optional[M.Expr] = None
            fieldname = name.text
            if self.accept("."):
                fld = self.ident("field name")
                owner = M.Name(name.text, span=name.span)
                fieldname = fld.text
            self.expect(":=")
            if self.accept("*"):
                self.expect(";")
                if owner is not None:
                    raise _ParseError(Diagnostic(
                        "error", "syntax",
                        "havoc applies to own fields only", name.span))
                return M.Havoc(fieldname, span=name.span)
            value = self.expr()
            self.expect(";")
            return M.Assign(fieldname, value, owner, span=name.span)
        raise _ParseError(Diagnostic(
            "error", "syntax",
            f"expected a statement, got '{t.text or t.kind}'", t.span))

    # -- expressions ---------------------------------------------------------

    def expr(self) -> M.Expr:
        return self.implies_expr()

    def implies_expr(self) -> M.Expr:
        left = self.or_expr()
        if self.at("==>"):
            op = self.eat()
            right = self.implies_expr()  # right-associative
            return M.Binary("implies", left, right, span=op.span)
        return left

    def or_expr(self) -> M.Expr:
        left = self.and_expr()
        while self.at("||"):
            op = self.eat()
            left = M.Binary("or", left, self.and_expr(), span=op.span)
        return left

    def and_expr(self) -> M.Expr:
        left = self.cmp_expr()
        while self.at("&&"):
            op = self.eat()
            left = M.Binary("and", left, self.cmp_expr(), span=op.span)
        return left

    _CMP = {"==": "eq", "!=": "ne", "<": "lt", "<=": "le",
            ">": "gt", ">=": "ge", "in": "in", "!!": "disjoint", "=": None}

    def cmp_expr(self) -> M.Expr:
        left = self.additive()
        t = self.peek()
        if t.kind == "=":
            raise _ParseError(Diagnostic(
                "error", "syntax", "use '==' for comparison", t.span))
        if t.kind in self._CMP and t.kind != "=":
            self.eat()
            right = self.additive()
            op = self._CMP[t.kind]
            if op == "ne":
                return M.Not(M.Binary("eq", left, right, span=t.span), span=t.span)
            if op == "gt":
                return M.Binary("lt", right, left, span=t.span)
            if op == "ge":
                return M.Binary("le", right, left, span=t.span)
            return M.Binary(op, left, right, span=t.span)
        return left

    def additive(self) -> M.Expr:
        left = self.mult()
        while self.peek().kind in ("+", "-"):
            op = self.eat()
            tag = "add" if op.kind == "+" else "sub"
            left = M.Binary(tag, left, self.mult(), span=op.span)
        return left

    def mult(self) -> M.Expr:
        left = self.unary()
        while self.at("*"):
            op = self.eat()
            left = M.Binary("mul", left, self.unary(), span=op.span)
        return left

    def unary(self) -> M.Expr:
        if self.at("!"):
            op = self.eat()
            return M.Not(self.unary(), span=op.span)
        return self.postfix()

    def postfix(self) -> M.Expr:
        e = self.primary()
        while self.at("."):
            dot = self.eat()
            name = self.ident("member name")
            if name.text == "active":
                e = M.TimerActive(e, span=dot.span)
            else:
                e = M.FieldAcc(e, name.text, span=dot.span)
        return e

    def primary(self) -> M.Expr:
        t = self.peek()
        if t.kind == "INT":
            self.eat()
            return M.IntLit(int(t.text), span=t.span)
        if t.kind == "true":
            self.eat()
            return M.BoolLit(True, span=t.span)
        if t.kind == "false":
            self.eat()
            return M.BoolLit(False, span=t.span)
        if t.kind == "inactive":
            self.eat()
            return M.InactiveLit(span=t.span)
        if t.kind == "null":
            self.eat()
            return M.NullLit(span=t.span)
        if t.kind == "phase":
            self.eat()
            return M.PhaseRef(span=t.span)
        if t.kind == "self":
            self.eat()
            return M.Name("self", span=t.span)
        if t.kind == "old":
            self.eat()
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return M.Old(inner, span=t.span)
        if t.kind == "|":
            self.eat()
            inner = self.expr()
            self.expect("|")
            return M.Card(inner, span=t.span)
        if t.kind == "(":
            self.eat()
            inner = self.expr()
            self.expect(")")
            return inner
        if t.kind == "if":
            self.eat()
            cond = self.expr()
            self.expect("then")
            then = self.expr()
            self.expect("else")
            els = self.expr()
            return M.Ite(cond, then, els, span=t.span)
        if t.kind in ("forall", "exists"):
            self.eat()
            var = self.ident("bound variable").text
            self.expect("in")
            dom = self.additive()
            self.expect("::")
            body = self.expr()
            return M.Quant(t.kind, var, dom, body, span=t.span)
        if t.kind == "IDENT":
            self.eat()
            return M.Name(t.text, span=t.span)
        raise _ParseError(Diagnostic(
            "error", "syntax",
            f"expected an expression, got '{t.text or t.kind}'", t.span))

    # -- configurations -------------------------------------------------------

    def config(self) -> RawConfig:
        self.expect("config")
        self.expect("{")
        raw = RawConfig([], [], [])
        while not self.at("}"):
            first = self.ident("class or instance name")
            if self.accept(":"):
                ids = []
                if self.at("IDENT"):
                    ids.append(self.ident().text)
                    while self.accept(","):
                        ids.append(self.ident().text)
                self.expect(";")
                raw.universes.append((first.text, ids, first.span))
            else:
                self.expect(".")
                fld = self.ident("field name")
                self.expect("=")
                if self.at("{"):
                    self.eat()
                    ids = []
                    if self.at("IDENT"):
                        ids.append(self.ident().text)
                        while self.accept(","):
                            ids.append(self.ident().text)
                    self.expect("}")
                    raw.set_assigns.append((first.text, fld.text, ids, first.span))
                else:
                    lit = self.primary()
                    raw.lit_assigns.append((first.text, fld.text, lit, first.span))
                self.expect(";")
        self.expect("}")
        self.expect("EOF")
        return raw

    # -- g' files ---------------------------------------------------------------

    def gprime(self) -> list[tuple[str, Optional[str], M.Expr, M.Span]]:
        self.expect("gprime")
        self.expect("{")
        out = []
        while not self.at("}"):
            ph = self.ident("phase name")
            cls = None
            if self.accept("for"):
                cls = self.ident("class name").text
            self.expect(":")
            e = self.expr()
            self.expect(";")
            out.append((ph.text, cls, e, ph.span))
        self.expect("}")
        self.expect("EOF")
        return out

    def single_expr(self) -> M.Expr:
        e = self.expr()
        self.expect("EOF")
        return e


def _run(source: str, filename: str, production):
    try:
        p = Parser(source, filename)
        return production(p), []
    except LexError as e:
        return None, [Diagnostic("error", "syntax", e.msg, e.span)]
    except _ParseError as e:
        return None, [e.diag]


def parse_model_text(source: str, filename: str = "<input>"):
    return _run(source, filename, Parser.model)


def parse_expr_text(source: str, filename: str = "<input>"):
    return _run(source, filename, Parser.single_expr)


def parse_config_text(source: str, filename: str = "<input>"):
    return _run(source, filename, Parser.config)


def parse_gprime_text(source: str, filename: str = "<input>"):
    return _run(source, filename, Parser.gprime)

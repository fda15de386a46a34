"""Concrete-syntax frontend: parsing, static checking, and the auxiliary
file formats (.sracfg configurations, .srainv invariants, g' files)."""

from __future__ import annotations

from typing import Optional

from .. import model as M
from ..model import Configuration, Expr, Model, Not, SelfField
from .checker import check_model, resolve_formula
from .diagnostics import Diagnostic, DiagnosticError, errors, raise_on_error
from .parser import (parse_config_text, parse_expr_text, parse_gprime_text,
                     parse_model_text)

__all__ = [
    "Diagnostic", "DiagnosticError", "errors", "raise_on_error",
    "parse_model", "check_model", "load_model",
    "parse_invariant", "load_invariant",
    "parse_configuration", "load_configuration",
    "parse_gprime", "load_gprime", "gprime_for", "GPrimeMap",
]

GPrimeMap = dict[tuple[str, Optional[str]], Expr]


def parse_model(source: str, filename: str = "<input>"):
    """Syntax-only parse; names stay unresolved until check_model."""
    return parse_model_text(source, filename)


def load_model(source: str, filename: str = "<input>") -> Model:
    parsed, diags = parse_model(source, filename)
    raise_on_error(diags)
    resolved, diags = check_model(parsed)
    raise_on_error(diags)
    assert resolved is not None
    return resolved


def parse_invariant(source: str, m: Model, filename: str = "<input>"):
    """A closed boolean formula over the scheduler signature; old() rejected."""
    e, diags = parse_expr_text(source, filename)
    if e is None:
        return None, diags
    resolved, rdiags = resolve_formula(e, m, where="invariant")
    return resolved, diags + rdiags


def load_invariant(source: str, m: Model, filename: str = "<input>") -> Expr:
    e, diags = parse_invariant(source, m, filename)
    raise_on_error(diags)
    assert e is not None
    return e


def parse_configuration(source: str, m: Model, filename: str = "<input>"):
    """Returns (Configuration | None, diagnostics, gamma_report) where
    gamma_report lists each constraint with its truth value on the
    configuration (the C |= Gamma check)."""
    raw, diags = parse_config_text(source, filename)
    if raw is None:
        return None, diags, []
    diags = list(diags)

    universes: dict[str, tuple[str, ...]] = {c.name: () for c in m.classes}
    seen_cls: set[str] = set()
    owner: dict[str, str] = {}
    for cls, ids, span in raw.universes:
        if cls not in m.class_map:
            diags.append(Diagnostic("error", "unknown-class",
                                    f"unknown class {cls}", span))
            continue
        if cls in seen_cls:
            diags.append(Diagnostic("error", "dup-decl",
                                    f"universe of {cls} listed twice", span))
            continue
        seen_cls.add(cls)
        for i in ids:
            if i in owner:
                diags.append(Diagnostic("error", "dup-decl",
                                        f"instance {i} listed twice", span))
            owner[i] = cls
        universes[cls] = tuple(dict.fromkeys(ids))

    set_fields: dict[tuple[str, str], frozenset[str]] = {}
    params: dict[tuple[str, str], object] = {}

    for inst, fname, ids, span in raw.set_assigns:
        cls = owner.get(inst)
        if cls is None:
            diags.append(Diagnostic("error", "unknown-name",
                                    f"unknown instance {inst}", span))
            continue
        sd = m.class_map[cls].set_map.get(fname)
        if sd is None:
            diags.append(Diagnostic("error", "unknown-name",
                                    f"class {cls} has no set field {fname}", span))
            continue
        members = []
        for i in ids:
            icls = owner.get(i)
            if icls is None:
                diags.append(Diagnostic("error", "unknown-name",
                                        f"unknown instance {i}", span))
            elif icls != sd.elem:
                diags.append(Diagnostic(
                    "error", "wrong-class",
                    f"{i} is a {icls}; {fname} holds {sd.elem} instances", span))
            else:
                members.append(i)
        set_fields[(inst, fname)] = frozenset(members)

    for inst, fname, lit, span in raw.lit_assigns:
        cls = owner.get(inst)
        if cls is None:
            diags.append(Diagnostic("error", "unknown-name",
                                    f"unknown instance {inst}", span))
            continue
        cd = m.class_map[cls]
        pd = cd.param_map.get(fname)
        if pd is None:
            kind = "set field" if fname in cd.set_map else None
            msg = (f"{fname} is a set field; use {{...}}" if kind
                   else f"class {cls} has no parameter {fname}")
            diags.append(Diagnostic("error", "unknown-name", msg, span))
            continue
        value = _literal_value(lit, pd.ty, m)
        if value is None:
            diags.append(Diagnostic("error", "type",
                                    f"parameter {fname} expects {pd.ty}", span))
            continue
        params[(inst, fname)] = value

    # default missing sets to empty, reject missing params
    for cls, insts in universes.items():
        cd = m.class_map[cls]
        for inst in insts:
            for sd in cd.sets:
                set_fields.setdefault((inst, sd.name), frozenset())
            for pd in cd.params:
                if (inst, pd.name) not in params:
                    diags.append(Diagnostic(
                        "error", "missing-param",
                        f"no value for parameter {inst}.{pd.name}", None))

    if errors(diags):
        return None, diags, []

    cfg = Configuration(universes, set_fields, params)
    from ..simulator import evaluate  # local import: simulator builds on frontend types
    gamma_report = []
    for g in m.constraints:
        gamma_report.append((M.expr_text(g), bool(evaluate(g, m, cfg, None))))
    return cfg, diags, gamma_report


def load_configuration(source: str, m: Model, filename: str = "<input>"):
    cfg, diags, report = parse_configuration(source, m, filename)
    raise_on_error(diags)
    assert cfg is not None
    return cfg, report


def _literal_value(lit: Expr, ty, m: Model):
    if isinstance(lit, M.IntLit) and isinstance(ty, M.IntType):
        return lit.value
    if isinstance(lit, M.BoolLit) and isinstance(ty, M.BoolType):
        return lit.value
    if isinstance(lit, M.Name) and isinstance(ty, M.EnumType):
        if m.enum_of_value.get(lit.name) == ty.name:
            return lit.name
    return None


def parse_gprime(source: str, m: Model, filename: str = "<input>"):
    """Per-phase (optionally per-class) local conditions over `self`."""
    entries, diags = parse_gprime_text(source, filename)
    if entries is None:
        return None, diags
    diags = list(diags)
    out: GPrimeMap = {}
    for phase, clsname, e, span in entries:
        if phase not in m.scheduler.phases:
            diags.append(Diagnostic("error", "unknown-phase",
                                    f"unknown phase {phase}", span))
            continue
        targets = [clsname] if clsname else [c.name for c in m.classes]
        if clsname and clsname not in m.class_map:
            diags.append(Diagnostic("error", "unknown-class",
                                    f"unknown class {clsname}", span))
            continue
        for t in targets:
            resolved, rdiags = resolve_formula(
                e, m, where="gprime", cls=m.class_map[t], allow_old=False)
            if clsname or t == targets[0]:
                diags.extend(rdiags)
            if resolved is None:
                break
            out.setdefault((phase, clsname), resolved)
    if errors(diags):
        return None, diags
    return out, diags


def load_gprime(source: str, m: Model, filename: str = "<input>") -> GPrimeMap:
    gp, diags = parse_gprime(source, m, filename)
    raise_on_error(diags)
    assert gp is not None
    return gp


def gprime_for(gp: Optional[GPrimeMap], phase: str, cls: str) -> Expr:
    """Lookup with (phase, class) > (phase, *) > default not self.executed."""
    if gp:
        for key in ((phase, cls), (phase, None)):
            if key in gp:
                return gp[key]
    return Not(SelfField("executed"))

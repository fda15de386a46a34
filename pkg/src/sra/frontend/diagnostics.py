"""Diagnostics shared by the parser and the static checker."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..model import Span


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    span: Optional[Span] = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.severity}[{self.code}]: {self.message}"


class DiagnosticError(Exception):
    """Raised by the load_* convenience wrappers when errors were reported."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


def errors(diags: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


def raise_on_error(diags: list[Diagnostic]) -> None:
    errs = errors(diags)
    if errs:
        raise DiagnosticError(errs)

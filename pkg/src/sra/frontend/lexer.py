"""Tokenizer for .sra / .sracfg / .srainv sources."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..model import Span

KEYWORDS = {
    "class", "var", "input", "event", "param", "set", "ref", "ghost",
    "transition", "scheduler", "phases", "initial", "final", "trans", "when",
    "constraints", "enum", "config", "forall", "exists", "in", "if", "then",
    "else", "assume", "assert", "true", "false", "inactive", "null", "old",
    "self", "phase", "grounds", "gprime", "for",
}

# longest first so that maximal munch works
SYMBOLS = [
    "==>", "::", ":=", "==", "!=", "<=", ">=", "&&", "||", "->", "!!",
    "{", "}", "(", ")", "<", ">", ",", ";", ":", ".", "|", "+", "-", "*",
    "=", "!",
]


@dataclass(frozen=True)
class Token:
    kind: str   # IDENT | INT | EOF | keyword text | symbol text
    text: str
    span: Span


class LexError(Exception):
    def __init__(self, msg: str, span: Span):
        super().__init__(msg)
        self.msg = msg
        self.span = span


def tokenize(source: str, filename: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def span(start: int, end: int, l: int, c: int) -> Span:
        return Span(filename, start, end, l, c)

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            start, l, c = i, line, col
            while i < n and source[i].isdigit():
                i += 1
                col += 1
            toks.append(Token("INT", source[start:i], span(start, i, l, c)))
            continue
        if ch.isalpha() or ch == "_":
            start, l, c = i, line, col
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
                col += 1
            text = source[start:i]
            kind = text if text in KEYWORDS else "IDENT"
            toks.append(Token(kind, text, span(start, i, l, c)))
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                toks.append(Token(sym, sym, span(i, i + len(sym), line, col)))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise LexError(f"unexpected character {ch!r}",
                           span(i, i + 1, line, col))
    toks.append(Token("EOF", "", span(n, n, line, col)))
    return toks

"""Parser for the function and interval mini-grammars.

Functions::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' unary)?
    atom  := number | 't' | 'pi' | 'e' | 'inf' | name '(' expr ')' | '(' expr ')'

with ``name`` one of ``exp log tan sqrt``.  Intervals are written
``(lo, hi)``, ``[lo, hi)`` and so on, where the endpoints are constant
expressions (``pi/2``, ``-inf``).
"""

from __future__ import annotations

import math
import re

from . import fncore as fc
from .fncore import Expr, Interval

__all__ = ["ParseError", "parse_function", "parse_interval"]


class ParseError(ValueError):
    def __init__(self, message: str, pos: int, text: str):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos
        self.text = text


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(\S))")
_FUNCS = {"exp": fc.exp, "log": fc.log, "tan": fc.tan, "sqrt": fc.sqrt}
_CONSTS = {"pi": math.pi, "e": math.e, "inf": math.inf, "oo": math.inf}


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        if m.group(1):
            out.append(("num", m.group(1), m.start(1)))
        elif m.group(2):
            out.append(("name", m.group(2), m.start(2)))
        elif m.group(3):
            out.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok[2], self.text)

    def expect(self, op):
        tok = self.take()
        if tok[1] != op:
            self.error(f"expected {op!r}", tok)

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.error("unexpected token")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            if op == "*":
                e = e * rhs
            else:
                try:
                    e = e / rhs
                except fc.DomainError as err:
                    self.error(str(err))
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return fc.neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            tok = self.take()
            expo = self.unary()
            try:
                if expo.is_const:
                    return fc.pow_(base, expo.value)
                if base.is_const and base.value > 0:
                    return fc.exp(fc.mul(math.log(base.value), expo))
            except fc.DomainError as err:
                self.error(str(err), tok)
            self.error("exponent must be a constant", tok)
        return base

    def atom(self):
        kind, val, pos = tok = self.take()
        if kind == "num":
            return fc.const(float(val))
        if kind == "name":
            if val == "t":
                return fc.T
            if val in _CONSTS:
                return fc.const(_CONSTS[val])
            if val in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                try:
                    return _FUNCS[val](arg)
                except fc.DomainError as err:
                    self.error(str(err), tok)
            self.error(f"unknown name {val!r}", tok)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        self.error("unexpected token" if kind != "end" else "unexpected end of input", tok)


def parse_function(text: str) -> Expr:
    """Parse a function of ``t``; raises :class:`ParseError` with a position."""
    return _Parser(text).parse()


def _parse_constant(text: str, offset: int, whole: str) -> float:
    try:
        e = _Parser(text).parse()
    except ParseError as err:
        raise ParseError("bad interval endpoint", offset + err.pos, whole) from None
    if not e.is_const:
        raise ParseError("interval endpoint must be constant", offset, whole)
    return e.value


def parse_interval(text: str) -> Interval:
    """Parse ``(lo, hi)``, ``[lo, hi]``, ``(lo, hi]`` or ``[lo, hi)``."""
    s = text.strip()
    if len(s) < 5 or s[0] not in "([" or s[-1] not in ")]" or "," not in s:
        raise ParseError("interval must look like (lo, hi)", 0, text)
    inner = s[1:-1]
    comma = inner.index(",")
    lo = _parse_constant(inner[:comma], 1, text)
    hi = _parse_constant(inner[comma + 1:], comma + 2, text)
    try:
        return Interval(lo, hi, s[0] == "[", s[-1] == "]")
    except ValueError as err:
        raise ParseError(str(err), 0, text) from None

"""Tiny arithmetic language for objective and constraint functions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | ('x' | 'u') '[' INT ']' | FUNC '(' expr (',' expr)* ')' | '(' expr ')'
    FUNC   := exp | log | min | max

``^`` is right associative and binds tighter than unary minus, so
``-x[0]^2`` is ``-(x[0]^2)`` and ``2^-1`` is ``0.5``.  Parsed expressions
compile to plain closures ``f(x, u) -> float``.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass, field

from .errors import SpecError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()\[\],]))"
)

_FUNCS = {"exp": (math.exp, 1), "log": (math.log, 1), "min": (min, 2), "max": (max, 2)}
_BINOPS = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": operator.truediv, "^": math.pow}


def _tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if mt is None or mt.end() == pos:
            raise SpecError(f"unexpected character {text[pos:].strip()[:1]!r} at position {pos} in {text!r}")
        kind = mt.lastgroup
        out.append((kind, mt.group(kind), mt.start(kind)))
        pos = mt.end()
    out.append(("end", "", len(text)))
    return out


@dataclass
class Expression:
    """Compiled expression with its source text and the highest indices used."""

    source: str
    fn: object = field(repr=False)
    max_x: int = -1
    max_u: int = -1

    def __call__(self, x, u):
        return float(self.fn(x, u))


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.max_idx = {"x": -1, "u": -1}

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            found = tok[1] or "end of input"
            raise SpecError(f"expected {value!r} at position {tok[2]} in {self.text!r}, found {found!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise SpecError(f"unexpected {val!r} at position {pos} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            node = self._bin(self.take()[1], node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            node = self._bin(self.take()[1], node, self.unary())
        return node

    def unary(self):
        op = self.peek()[1]
        if op in ("-", "+") and self.peek()[0] == "op":
            self.take()
            inner = self.unary()
            if op == "+":
                return inner
            return lambda x, u: -inner(x, u)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return self._bin("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            c = float(val)
            return lambda x, u: c
        if kind == "name":
            if val in ("x", "u"):
                self.take("[")
                k, idx, ipos = self.take()
                if k != "num" or not idx.isdigit():
                    raise SpecError(f"index of {val} must be a non-negative integer at position {ipos} in {self.text!r}")
                self.take("]")
                j = int(idx)
                self.max_idx[val] = max(self.max_idx[val], j)
                if val == "x":
                    return lambda x, u: x[j]
                return lambda x, u: u[j]
            if val in _FUNCS:
                fn, arity = _FUNCS[val]
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if arity == 1 and len(args) != 1:
                    raise SpecError(f"{val} takes one argument in {self.text!r}")
                if arity == 2 and len(args) < 2:
                    raise SpecError(f"{val} takes at least two arguments in {self.text!r}")
                if arity == 1:
                    a = args[0]
                    return lambda x, u: fn(a(x, u))
                return lambda x, u: fn(a(x, u) for a in args)
            raise SpecError(f"unknown name {val!r} at position {pos} in {self.text!r}")
        if val == "(":
            node = self.expr()
            self.take(")")
            return node
        raise SpecError(f"unexpected {val or 'end of input'!r} at position {pos} in {self.text!r}")

    @staticmethod
    def _bin(op, a, b):
        f = _BINOPS[op]
        return lambda x, u: f(a(x, u), b(x, u))


def parse(text, n=None, m=None):
    """Compile ``text`` into an :class:`Expression`.

    ``n`` and ``m`` bound the admissible indices of ``x`` and ``u``.
    """
    if not isinstance(text, str) or not text.strip():
        raise SpecError("expression must be a nonempty string")
    p = _Parser(text)
    fn = p.parse()
    for var, bound in (("x", n), ("u", m)):
        if bound is not None and p.max_idx[var] >= bound:
            raise SpecError(f"{var}[{p.max_idx[var]}] out of range in {text!r} (dimension {bound})")
    return Expression(text, fn, p.max_idx["x"], p.max_idx["u"])

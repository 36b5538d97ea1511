"""Small arithmetic grammar for potentials.

::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("-" | "+") unary | power
    power := atom ("^" unary)?          # right-associative, binds tighter than unary minus
    atom  := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Names are ``x``, ``y`` and ``pi``; functions are ``exp``, ``cos``, ``sin`` and
``abs``.  Expressions compile to a tree of closures evaluated with numpy, so
they apply elementwise to whole node arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError

FUNCTIONS = {"exp": np.exp, "cos": np.cos, "sin": np.sin, "abs": np.abs}
CONSTANTS = {"pi": np.pi}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    col: int  # 1-based


def _tokenize(src: str) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ConfigError(f"unexpected character {src[col - 1]!r} at column {col}")
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    toks.append(_Tok("end", "", len(src) + 1))
    return toks


class _Parser:
    def __init__(self, src: str, variables: tuple[str, ...]):
        self.toks = _tokenize(src)
        self.i = 0
        self.variables = variables

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str):
        t = self.take()
        if t.text != text:
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ConfigError(f"expected {text!r} at column {t.col}, found {found}")

    def parse(self):
        node = self.expr()
        t = self.peek()
        if t.kind != "end":
            raise ConfigError(f"unexpected {t.text!r} at column {t.col}")
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            rhs = self.term()
            node = _bin(np.add if op == "+" else np.subtract, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            rhs = self.unary()
            node = _bin(np.multiply if op == "*" else np.divide, node, rhs)
        return node

    def unary(self):
        if self.peek().text == "-":
            self.take()
            inner = self.unary()
            return lambda env: -inner(env)
        if self.peek().text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            return _bin(np.power, base, self.unary())
        return base

    def atom(self):
        t = self.take()
        if t.kind == "num":
            val = float(t.text)
            return lambda env: val
        if t.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "name":
            if t.text in FUNCTIONS:
                fn = FUNCTIONS[t.text]
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return lambda env: fn(arg(env))
            if t.text in CONSTANTS:
                val = CONSTANTS[t.text]
                return lambda env: val
            if t.text in self.variables:
                name = t.text
                return lambda env: env[name]
            raise ConfigError(f"unknown name {t.text!r} at column {t.col}")
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ConfigError(f"expected a value at column {t.col}, found {found}")


def _bin(fn, lhs, rhs):
    return lambda env: fn(lhs(env), rhs(env))


@dataclass(frozen=True)
class Expression:
    """A parsed expression; call it with keyword arrays (``x=...``, ``y=...``)."""

    source: str
    variables: tuple[str, ...]
    _fn: Callable = None

    def __call__(self, **env) -> np.ndarray:
        missing = [v for v in self.variables if v not in env]
        if missing:
            raise TypeError(f"missing variables: {', '.join(missing)}")
        shape = np.broadcast_shapes(*(np.shape(env[v]) for v in self.variables)) if env else ()
        with np.errstate(all="ignore"):
            out = np.asarray(self._fn({k: np.asarray(v, dtype=float) for k, v in env.items()}), dtype=float)
        return np.broadcast_to(out, shape).copy() if out.shape != shape else out


def parse_expression(src: str, variables: tuple[str, ...] = ("x",)) -> Expression:
    """Parse ``src``; raises :class:`ConfigError` naming the column of the problem."""
    if not isinstance(src, str) or not src.strip():
        raise ConfigError("empty expression")
    fn = _Parser(src, tuple(variables)).parse()
    return Expression(src, tuple(variables), fn)

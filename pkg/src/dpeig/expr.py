"""A small arithmetic expression language for exponent fields.

Grammar (EBNF)::

    expr    = term , { ( "+" | "-" ) , term } ;
    term    = unary , { ( "*" | "/" ) , unary } ;
    unary   = ( "+" | "-" ) , unary | primary ;
    primary = number | "x" | "y" | "pi"
            | func , "(" , expr , { "," , expr } , ")"
            | "(" , expr , ")" ;
    func    = "sin" | "cos" | "exp" | "min" | "max" ;
    number  = digits , [ "." , digits ] , [ ( "e" | "E" ) , [ "+" | "-" ] , digits ]
            | "." , digits , [ exponent ] ;

``sin``, ``cos`` and ``exp`` take one argument, ``min`` and ``max`` two or
more.  Whitespace is ignored.  There is no power operator.
"""
from __future__ import annotations

import re

import numpy as np

from .errors import ExpressionError

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")

_UNARY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_NARY_FUNCS = {"min": np.minimum, "max": np.maximum}
VARIABLES = ("x", "y")


def _tokenize(src: str):
    toks = []
    i = 0
    while i < len(src):
        c = src[i]
        if c.isspace():
            i += 1
            continue
        m = _NUMBER.match(src, i)
        if m:
            toks.append(("num", float(m.group(0)), i))
            i = m.end()
            continue
        m = _NAME.match(src, i)
        if m:
            toks.append(("name", m.group(0), i))
            i = m.end()
            continue
        if c in "+-*/(),":
            toks.append((c, c, i))
            i += 1
            continue
        raise ExpressionError(f"unexpected character {c!r}", i, src)
    toks.append(("end", None, len(src)))
    return toks


class _Parser:
    def __init__(self, src):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.names = {}  # variable -> first position

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExpressionError(f"expected {kind!r}, found {found}", tok[2], self.src)
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(f"unexpected {tok[1]!r}", tok[2], self.src)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            node = _binary(op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            rhs = self.unary()
            node = _binary(op, node, rhs)
        return node

    def unary(self):
        kind = self.peek()[0]
        if kind == "-":
            self.take()
            inner = self.unary()
            return lambda env: -inner(env)
        if kind == "+":
            self.take()
            return self.unary()
        return self.primary()

    def primary(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return lambda env: val
        if kind == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if kind == "name":
            self.take()
            if val in VARIABLES:
                self.names.setdefault(val, pos)
                return lambda env: env[val]
            if val == "pi":
                return lambda env: np.pi
            if val in _UNARY_FUNCS or val in _NARY_FUNCS:
                return self.call(val, pos)
            raise ExpressionError(f"unknown name {val!r}", pos, self.src)
        found = "end of input" if kind == "end" else repr(val)
        raise ExpressionError(f"expected a value, found {found}", pos, self.src)

    def call(self, name, pos):
        self.take("(")
        args = [self.expr()]
        while self.peek()[0] == ",":
            self.take()
            args.append(self.expr())
        self.take(")")
        if name in _UNARY_FUNCS:
            if len(args) != 1:
                raise ExpressionError(f"{name} takes 1 argument, got {len(args)}", pos, self.src)
            fn, (a,) = _UNARY_FUNCS[name], args
            return lambda env: fn(a(env))
        if len(args) < 2:
            raise ExpressionError(f"{name} takes at least 2 arguments", pos, self.src)
        fn = _NARY_FUNCS[name]

        def reduce(env):
            out = args[0](env)
            for a in args[1:]:
                out = fn(out, a(env))
            return out

        return reduce


def _binary(op, a, b):
    if op == "+":
        return lambda env: a(env) + b(env)
    if op == "-":
        return lambda env: a(env) - b(env)
    if op == "*":
        return lambda env: a(env) * b(env)
    return lambda env: a(env) / b(env)


class Expression:
    """Compiled expression; call with coordinate arrays ``x`` (and ``y``)."""

    def __init__(self, source: str):
        if not isinstance(source, str) or not source.strip():
            raise ExpressionError("empty expression", 0, str(source))
        self.source = source
        parser = _Parser(source)
        self._fn = parser.parse()
        self.variables = dict(parser.names)

    def __call__(self, x, y=None):
        x = np.asarray(x, dtype=float)
        if y is None and "y" in self.variables:
            raise ExpressionError("expression uses y but only x coordinates were given",
                                  self.variables["y"], self.source)
        env = {"x": x, "y": np.zeros_like(x) if y is None else np.asarray(y, dtype=float)}
        with np.errstate(all="ignore"):
            out = self._fn(env)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()

    def __repr__(self):
        return f"Expression({self.source!r})"


def compile_expression(source: str) -> Expression:
    return Expression(source)

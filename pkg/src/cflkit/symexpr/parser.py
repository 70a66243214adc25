"""Recursive-descent parser for the expression language.

Accepted syntax (integers only; rationals are written as quotients):

    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := '-' factor | atom ('^' exponent)?
    exponent := INT | '(' '-'? INT ')'
    atom     := INT
              | IDENT                          chart variable
              | FNAME '(' expr ')'             sin cos tan arctan exp ln sqrt
              | IDENT PRIME* '(' 't' ')'       opaque symbol f(t), f'(t), ...
              | IDENT '^' '(' INT ')' '(' 't' ')'   opaque order >= 4
              | '(' expr ')'

Opaque symbols take the literal argument t and nothing else.  Printing a
normalized expression and parsing the result reproduces the same tree.
"""

from __future__ import annotations

import re

from .expr import (
    FUNCTIONS,
    Add,
    Div,
    Expr,
    Func,
    Mul,
    Opaque,
    Pow,
    Rat,
    Var,
    _add_flat,
    _mul_flat,
)


class ParseError(Exception):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()'])|(?P<bad>\S))"
)


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            break
        if m.group("bad") is not None:
            raise ParseError(f"unexpected character {m.group('bad')!r}", m.start("bad"))
        if m.group("int") is not None:
            tokens.append(("int", m.group("int"), m.start("int")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}, found {val!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", pos)
        return e

    def expr(self) -> Expr:
        out = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                if val == "-":
                    rhs = _negate(rhs)
                out = _add_flat(out, rhs)
            else:
                return out

    def term(self) -> Expr:
        out = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.next()
                out = _mul_flat(out, self.factor())
            elif kind == "op" and val == "/":
                self.next()
                rhs = self.factor()
                if isinstance(out, Rat) and isinstance(rhs, Rat):
                    if rhs.value == 0:
                        raise ParseError("division by zero literal", self.peek()[2])
                    out = Rat(out.value / rhs.value)
                else:
                    out = Div(out, rhs)
            else:
                return out

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return _negate(self.factor())
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            save = self.i
            self.next()
            exp = self._exponent()
            if exp is None:
                self.i = save
                return base
            return Pow(base, exp)
        return base

    def _exponent(self):
        kind, val, pos = self.peek()
        if kind == "int":
            self.next()
            return int(val)
        if kind == "op" and val == "(":
            save = self.i
            self.next()
            sign = 1
            kind, val, _ = self.peek()
            if kind == "op" and val == "-":
                self.next()
                sign = -1
            kind, val, _ = self.peek()
            if kind != "int":
                self.i = save
                return None
            self.next()
            n = sign * int(val)
            kind, val, pos2 = self.peek()
            if kind == "op" and val == ")":
                self.next()
                return n
            self.i = save
            return None
        raise ParseError("expected integer exponent", pos)

    def atom(self) -> Expr:
        kind, val, pos = self.next()
        if kind == "int":
            return Rat(int(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "ident":
            return self._ident_atom(val, pos)
        raise ParseError(f"unexpected token {val!r}", pos)

    def _ident_atom(self, name: str, pos: int) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "'":
            order = 0
            while self.peek()[:2] == ("op", "'"):
                self.next()
                order += 1
            self._expect_opaque_arg(name)
            return Opaque(name, order)
        if kind == "op" and val == "^":
            # f^(4)(t): try the high-order opaque shape, else fall back to power
            save = self.i
            self.next()
            if self.peek()[:2] == ("op", "("):
                self.next()
                k2, v2, _ = self.peek()
                if k2 == "int":
                    self.next()
                    if self.peek()[:2] == ("op", ")"):
                        self.next()
                        if self.peek()[:2] == ("op", "("):
                            self.next()
                            k3, v3, _ = self.peek()
                            if k3 == "ident" and v3 == "t":
                                self.next()
                                self.expect_op(")")
                                return Opaque(name, int(v2))
            self.i = save
            return Var(name)
        if kind == "op" and val == "(":
            if name in FUNCTIONS:
                self.next()
                arg = self.expr()
                self.expect_op(")")
                return Func(name, arg)
            self.next()
            k2, v2, _ = self.peek()
            if k2 == "ident" and v2 == "t":
                self.next()
                if self.peek()[:2] == ("op", ")"):
                    self.next()
                    return Opaque(name, 0)
            raise ParseError(f"unknown function {name!r}", pos)
        return Var(name)

    def _expect_opaque_arg(self, name: str):
        kind, val, pos = self.next()
        if kind != "op" or val != "(":
            raise ParseError(f"opaque symbol {name!r} needs argument (t)", pos)
        kind, val, pos = self.next()
        if kind != "ident" or val != "t":
            raise ParseError(f"opaque symbol {name!r} takes the literal argument t", pos)
        self.expect_op(")")


def _negate(e: Expr) -> Expr:
    if isinstance(e, Rat):
        return Rat(-e.value)
    if isinstance(e, Mul) and isinstance(e.factors[0], Rat):
        c = -e.factors[0].value
        rest = e.factors[1:]
        if c == 1 and len(rest) == 1:
            return rest[0]
        if c == 1:
            return Mul(rest)
        return Mul((Rat(c),) + rest)
    if isinstance(e, Mul):
        return Mul((Rat(-1),) + e.factors)
    return _mul_flat(Rat(-1), e)


def parse(text: str) -> Expr:
    """Parse an expression string to a raw tree (not normalized)."""
    return _Parser(text).parse()

"""Recursive-descent parser for the Lagrangian DSL.

Grammar (ASCII only)::

    expr   := term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := ['-'] atom ('^' ['-'] int)?
    atom   := number | ident | 'conj(' expr ')' | 'mean(' expr ')'
            | 'd(' ident ',' int ')' | '(' expr ')'

Numbers are decimal literals, optionally with an ``i`` suffix for a
pure-imaginary constant. ``a - b`` parses as ``a + (-1)*b``; a unary minus
in front of a number literal folds into the constant. Identifiers must be
declared field or parameter names; ``x0``, ``x1``, ... are reserved for
coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .nodes import (
    Coord,
    Const,
    Expr,
    Field,
    FieldDeriv,
    Mean,
    MINUS_ONE,
    Param,
    Power,
    Product,
    Sum,
    contains_mean,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class _Token:
    kind: str  # NUMBER IDENT OP END
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"(?P<NUMBER>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?i?)"
    r"|(?P<IDENT>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<OP>[-+*^(),])"
    r"|(?P<WS>\s+)"
)

_COORD_RE = re.compile(r"^x(\d+)$")


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "WS":
            tokens.append(_Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(_Token("END", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], fields: frozenset, params: frozenset):
        self.tokens = tokens
        self.pos = 0
        self.fields = fields
        self.params = params

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> _Token:
        tok = self.peek()
        if tok.kind != "OP" or tok.text != op:
            found = repr(tok.text) if tok.text else "end of input"
            raise ParseError(f"expected {op!r}, found {found}", tok.line, tok.column)
        return self.next()

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.text in ops

    def parse_expr(self) -> Expr:
        terms = [self.parse_term()]
        while self.at_op("+", "-"):
            op = self.next().text
            term = self.parse_term()
            terms.append(self._negate(term) if op == "-" else term)
        if len(terms) == 1:
            return terms[0]
        return Sum(tuple(terms))

    @staticmethod
    def _negate(e: Expr) -> Expr:
        if isinstance(e, Const):
            return Const(-e.value)
        if isinstance(e, Product):
            return Product((MINUS_ONE,) + e.factors)
        return Product((MINUS_ONE, e))

    def parse_term(self) -> Expr:
        factors = [self.parse_factor()]
        while self.at_op("*"):
            self.next()
            factors.append(self.parse_factor())
        if len(factors) == 1:
            return factors[0]
        return Product(tuple(factors))

    def parse_factor(self) -> Expr:
        if self.at_op("-"):
            self.next()
            return self._negate(self.parse_factor())
        base = self.parse_atom()
        if self.at_op("^"):
            caret = self.next()
            sign = 1
            if self.at_op("-"):
                self.next()
                sign = -1
            tok = self.peek()
            if tok.kind != "NUMBER" or not tok.text.isdigit():
                raise ParseError("exponent must be an integer", tok.line, tok.column)
            self.next()
            exponent = sign * int(tok.text)
            if exponent == 0:
                raise ParseError("exponent must be nonzero", caret.line, caret.column)
            return Power(base, exponent)
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.next()
            return Const(self._number_value(tok))
        if tok.kind == "IDENT":
            if tok.text == "conj":
                return self._parse_call_conj()
            if tok.text == "mean":
                return self._parse_call_mean()
            if tok.text == "d":
                return self._parse_call_deriv()
            self.next()
            return self._resolve_ident(tok)
        if self.at_op("("):
            self.next()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        found = repr(tok.text) if tok.text else "end of input"
        raise ParseError(f"expected a value, found {found}", tok.line, tok.column)

    @staticmethod
    def _number_value(tok: _Token) -> complex:
        text = tok.text
        if text.endswith("i"):
            return complex(0.0, float(text[:-1]))
        return complex(float(text), 0.0)

    def _resolve_ident(self, tok: _Token) -> Expr:
        name = tok.text
        if name in self.fields:
            return Field(name)
        if name in self.params:
            return Param(name)
        m = _COORD_RE.match(name)
        if m:
            return Coord(int(m.group(1)))
        raise ParseError(f"unknown identifier {name!r}", tok.line, tok.column)

    def _parse_call_conj(self) -> Expr:
        self.next()
        self.expect_op("(")
        inner = self.parse_expr()
        self.expect_op(")")
        from .nodes import conj_of

        return conj_of(inner)

    def _parse_call_mean(self) -> Expr:
        tok = self.next()
        self.expect_op("(")
        inner = self.parse_expr()
        self.expect_op(")")
        if contains_mean(inner):
            raise ParseError("mean() may not contain another mean()", tok.line, tok.column)
        return Mean(inner)

    def _parse_call_deriv(self) -> Expr:
        tok = self.next()
        self.expect_op("(")
        ident = self.peek()
        if ident.kind != "IDENT":
            raise ParseError("d() expects a field name", ident.line, ident.column)
        self.next()
        if ident.text not in self.fields:
            raise ParseError(f"d() expects a declared field, got {ident.text!r}", ident.line, ident.column)
        self.expect_op(",")
        axis_tok = self.peek()
        if axis_tok.kind != "NUMBER" or not axis_tok.text.isdigit():
            raise ParseError("d() expects an integer axis", axis_tok.line, axis_tok.column)
        self.next()
        self.expect_op(")")
        _ = tok
        return FieldDeriv(ident.text, int(axis_tok.text))


def parse(text: str, fields: Iterable[str] = ("phi",), params: Iterable[str] = ()) -> Expr:
    """Parse DSL source into an expression tree.

    `fields` and `params` declare the identifiers the source may use; any
    other identifier (except coordinates x0, x1, ...) is an error.
    """
    parser = _Parser(_tokenize(text), frozenset(fields), frozenset(params))
    expr = parser.parse_expr()
    end = parser.peek()
    if end.kind != "END":
        raise ParseError(f"unexpected trailing input {end.text!r}", end.line, end.column)
    return expr

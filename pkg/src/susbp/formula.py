"""Small arithmetic DSL for measurement formulas.

Grammar (standard precedence, left associative):

    expr   := term   (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

Identifiers bind to scalars or numeric series; arithmetic over series is
elementwise, aggregate calls reduce a series to a scalar.  Only the
functions in FUNCTIONS are callable; anything else is a parse error.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .errors import DomainError

Number = float
Series = list[float]
Value = Union[Number, Series]

#: callable name -> arity
FUNCTIONS = {"mean": 1, "sum": 1, "count": 1, "min": 1, "max": 1, "norm": 2}

DIV_EPSILON = 1e-12


class FormulaError(DomainError):
    pass


class ParseError(FormulaError):
    def __init__(self, position: int, expected: set[str], found: str):
        self.position = position
        self.expected = expected
        self.found = found
        super().__init__(
            f"at position {position}: expected {' or '.join(sorted(expected))},"
            f" found {found!r}"
        )


class EvaluationError(FormulaError):
    pass


class UnboundIdentifier(EvaluationError):
    pass


class DivisionByZero(EvaluationError):
    pass


class EmptySeriesAggregate(EvaluationError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Ident, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            at = len(src) - len(stripped)
            raise ParseError(at, {"number", "identifier", "operator"}, stripped[0])
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, value, pos = self.peek()
        if value != text:
            raise ParseError(pos, {text}, value or "end of input")
        self.advance()

    def parse(self) -> Expr:
        expr = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ParseError(pos, {"operator", "end of input"}, value)
        return expr

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        kind, value, pos = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(value))
        if kind == "ident":
            self.advance()
            if self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    raise ParseError(pos, set(FUNCTIONS), value)
                self.advance()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[value]:
                    raise ParseError(
                        pos,
                        {f"{value}/{FUNCTIONS[value]}"},
                        f"{value}/{len(args)}",
                    )
                return Call(value, tuple(args))
            return Ident(value)
        if value == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(pos, {"number", "identifier", "("}, value or "end of input")


def parse_formula(src: str) -> Expr:
    """Parse a formula into its AST; raises ParseError on bad input."""
    return _Parser(src).parse()


def _as_series(value: Value) -> Series:
    if isinstance(value, list):
        return value
    return [value]


def _elementwise(op: str, left: Value, right: Value) -> Value:
    def apply(a: float, b: float) -> float:
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if abs(b) < DIV_EPSILON:
            raise DivisionByZero(f"division by {b!r}")
        return a / b

    if isinstance(left, list) or isinstance(right, list):
        ls, rs = _as_series(left), _as_series(right)
        if len(ls) == 1:
            ls = ls * len(rs)
        if len(rs) == 1:
            rs = rs * len(ls)
        if len(ls) != len(rs):
            raise EvaluationError(
                f"series length mismatch: {len(ls)} vs {len(rs)}"
            )
        return [apply(a, b) for a, b in zip(ls, rs)]
    return apply(left, right)


def _aggregate(func: str, value: Value) -> float:
    series = _as_series(value)
    if not series:
        raise EmptySeriesAggregate(f"{func}() over an empty series")
    if func == "mean":
        return math.fsum(series) / len(series)
    if func == "sum":
        return math.fsum(series)
    if func == "count":
        return float(len(series))
    if func == "min":
        return min(series)
    return max(series)


def evaluate(expr: Expr, bindings: dict[str, Value]) -> float:
    """Evaluate an AST against bindings; the result must be a finite scalar."""
    result = _eval(expr, bindings)
    if isinstance(result, list):
        raise EvaluationError("formula result is a series, not a number")
    if not math.isfinite(result):
        raise EvaluationError(f"formula result is not finite: {result!r}")
    return result


def _eval(expr: Expr, bindings: dict[str, Value]) -> Value:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Ident):
        if expr.name not in bindings:
            raise UnboundIdentifier(f"unbound identifier {expr.name!r}")
        value = bindings[expr.name]
        return [float(v) for v in value] if isinstance(value, (list, tuple)) else float(value)
    if isinstance(expr, BinOp):
        return _elementwise(expr.op, _eval(expr.left, bindings), _eval(expr.right, bindings))
    if expr.func == "norm":
        return _elementwise("/", _eval(expr.args[0], bindings), _eval(expr.args[1], bindings))
    return _aggregate(expr.func, _eval(expr.args[0], bindings))

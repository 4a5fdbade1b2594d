"""Scalar expressions in one time variable and matrices built from them.

Grammar (whitespace is ignored)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' ['-'] INTEGER)*
    primary := NUMBER | 's' | 't' | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := 'exp' | 'sin' | 'cos' | 'abs'

Evaluation accepts a float or a numpy array of times and is vectorized.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "ExprSyntaxError",
    "ExprEvalError",
    "parse",
    "evaluate",
    "MatrixExpr",
    "eval_matrix",
]

FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "abs": np.abs}
VARIABLES = ("s", "t")

_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5


class ExprSyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ExprEvalError(ArithmeticError):
    pass


class Expr:
    """Base class of expression nodes."""

    level = _ATOM

    def __call__(self, s):
        return evaluate(self, s)

    def __str__(self):
        return self.render()

    def _wrap(self, min_level):
        text = self.render()
        return f"({text})" if self.level < min_level else text


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def render(self):
        v = self.value
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(v)

    def eval(self, s):
        return self.value

    def reflect(self):
        return self

    @property
    def is_constant(self):
        return True


@dataclass(frozen=True)
class Var(Expr):
    name: str = "s"

    def render(self):
        return self.name

    def eval(self, s):
        return s

    def reflect(self):
        return Neg(self)

    @property
    def is_constant(self):
        return False


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    level = _NEG

    def render(self):
        return "-" + self.operand._wrap(_NEG)

    def eval(self, s):
        return -self.operand.eval(s)

    def reflect(self):
        return Neg(self.operand.reflect())

    @property
    def is_constant(self):
        return self.operand.is_constant


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def level(self):
        return _ADD if self.op in "+-" else _MUL

    def render(self):
        lvl = self.level
        return f"{self.left._wrap(lvl)}{self._sep()}{self.right._wrap(lvl + 1)}"

    def _sep(self):
        return f" {self.op} " if self.op in "+-" else self.op

    def eval(self, s):
        a, b = self.left.eval(s), self.right.eval(s)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0):
            raise ExprEvalError("division by zero")
        return a / b

    def reflect(self):
        return BinOp(self.op, self.left.reflect(), self.right.reflect())

    @property
    def is_constant(self):
        return self.left.is_constant and self.right.is_constant


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int
    level = _POW

    def render(self):
        return f"{self.base._wrap(_ATOM)}^{self.exponent}"

    def eval(self, s):
        b = self.base.eval(s)
        if self.exponent < 0:
            if np.any(np.asarray(b) == 0):
                raise ExprEvalError("division by zero")
            return 1.0 / np.power(np.asarray(b, dtype=float), -self.exponent)
        return np.power(np.asarray(b, dtype=float), self.exponent)

    def reflect(self):
        return Pow(self.base.reflect(), self.exponent)

    @property
    def is_constant(self):
        return self.base.is_constant


@dataclass(frozen=True)
class Call(Expr):
    name: str
    arg: Expr

    def render(self):
        return f"{self.name}({self.arg.render()})"

    def eval(self, s):
        return FUNCTIONS[self.name](self.arg.eval(s))

    def reflect(self):
        return Call(self.name, self.arg.reflect())

    @property
    def is_constant(self):
        return self.arg.is_constant


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            while text[pos].isspace():
                pos += 1
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        node = self.primary()
        while self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", pos)
            node = Pow(node, sign * int(val))
        return node

    def primary(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in VARIABLES:
                return Var(val)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ExprSyntaxError(f"unknown identifier {val!r}", pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos)


def parse(text) -> Expr:
    """Parse an expression string (numbers are accepted as well)."""
    if isinstance(text, Expr):
        return text
    if isinstance(text, (int, float, np.number)) and not isinstance(text, bool):
        value = float(text)
        if not np.isfinite(value):
            raise ValueError(f"non-finite constant {value!r}")
        text = repr(value) if not value.is_integer() else str(int(value))
    return _Parser(str(text)).parse()


def evaluate(e: Expr, s):
    """Evaluate at a float or an array of times (IEEE double precision)."""
    if isinstance(s, np.ndarray):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.broadcast_to(np.asarray(e.eval(s), dtype=float), s.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        return float(e.eval(float(s)))


class MatrixExpr:
    """Rectangular matrix of expressions.

    Parameters
    ----------
    entries : nested sequence
        Rows of expression strings, numbers or :class:`Expr` nodes.  A numpy
        array is accepted and turned into constant expressions.
    """

    def __init__(self, entries):
        if isinstance(entries, MatrixExpr):
            entries = entries.entries
        if isinstance(entries, np.ndarray):
            entries = np.atleast_2d(entries).tolist()
        rows = [list(r) for r in entries]
        if not rows or not rows[0]:
            raise ValueError("matrix expression needs at least one entry")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("matrix expression rows differ in length")
        self.entries = tuple(tuple(parse(x) for x in r) for r in rows)

    @classmethod
    def zeros(cls, rows, cols):
        return cls([[0] * cols for _ in range(rows)])

    @property
    def shape(self):
        return len(self.entries), len(self.entries[0])

    @property
    def is_constant(self):
        return all(e.is_constant for row in self.entries for e in row)

    def __call__(self, s):
        return eval_matrix(self, s)

    def reflected(self) -> MatrixExpr:
        """Entries with the time variable replaced by its negation."""
        return MatrixExpr([[e.reflect() for e in r] for r in self.entries])

    def negated(self) -> MatrixExpr:
        return MatrixExpr([[Neg(e) for e in r] for r in self.entries])

    def to_strings(self) -> list[list[str]]:
        return [[e.render() for e in r] for r in self.entries]

    def __eq__(self, other):
        return isinstance(other, MatrixExpr) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"MatrixExpr({self.to_strings()!r})"


def eval_matrix(m: MatrixExpr, s) -> np.ndarray:
    """Entrywise evaluation; shape ``(r, c)`` for a float, ``(N, r, c)`` for an array."""
    if isinstance(s, np.ndarray):
        out = np.empty(s.shape + m.shape)
        for i, row in enumerate(m.entries):
            for j, e in enumerate(row):
                out[..., i, j] = evaluate(e, s)
        return out
    return np.array([[evaluate(e, s) for e in row] for row in m.entries])

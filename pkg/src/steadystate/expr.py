"""A small arithmetic language for rate functions in configuration files.

Grammar (``^`` binds tighter than unary minus and associates to the right,
everything else associates to the left)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Evaluation is vectorised: bindings may be numpy arrays and broadcast.
Error positions are 1-based character columns; end of input is reported as
``len(text) + 1``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError, ParseError, UnboundVariable

FUNCTIONS = {"exp": 1, "log": 1, "sqrt": 1, "abs": 1, "min": -2, "max": -2, "indicator": 3}

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))")


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


class Node:
    prec = 5

    def evaluate(self, env: Mapping[str, object]):
        raise NotImplementedError

    def variables(self) -> set[str]:
        return set()

    def __str__(self) -> str:
        return unparse(self)


@dataclass(frozen=True, eq=True)
class Num(Node):
    value: float

    def evaluate(self, env):
        return self.value


@dataclass(frozen=True, eq=True)
class Var(Node):
    name: str

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnboundVariable(f"variable {self.name!r} is not bound "
                                  f"(available: {', '.join(sorted(env)) or 'none'})") from None

    def variables(self):
        return {self.name}


@dataclass(frozen=True, eq=True)
class Neg(Node):
    operand: Node
    prec = 3

    def evaluate(self, env):
        return -np.asarray(self.operand.evaluate(env), dtype=float)

    def variables(self):
        return self.operand.variables()


@dataclass(frozen=True, eq=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    @property
    def prec(self):
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[self.op]

    def evaluate(self, env):
        a = np.asarray(self.left.evaluate(env), dtype=float)
        b = np.asarray(self.right.evaluate(env), dtype=float)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if np.any(b == 0):
                raise DomainError(f"division by zero in {unparse(self)}")
            return a / b
        with np.errstate(all="ignore"):
            out = np.power(a, b)
        if not np.all(np.isfinite(out)):
            raise DomainError(f"{unparse(self)} is undefined or overflows")
        return out

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True, eq=True)
class Call(Node):
    name: str
    args: tuple

    def evaluate(self, env):
        vals = [np.asarray(a.evaluate(env), dtype=float) for a in self.args]
        if self.name == "exp":
            with np.errstate(over="ignore"):
                out = np.exp(vals[0])
            if not np.all(np.isfinite(out)):
                raise DomainError(f"overflow in {unparse(self)}")
            return out
        if self.name == "log":
            if np.any(vals[0] <= 0):
                raise DomainError(f"log of a nonpositive value in {unparse(self)}")
            return np.log(vals[0])
        if self.name == "sqrt":
            if np.any(vals[0] < 0):
                raise DomainError(f"sqrt of a negative value in {unparse(self)}")
            return np.sqrt(vals[0])
        if self.name == "abs":
            return np.abs(vals[0])
        if self.name == "min":
            return np.minimum.reduce(np.broadcast_arrays(*vals))
        if self.name == "max":
            return np.maximum.reduce(np.broadcast_arrays(*vals))
        lo, hi, x = vals
        return np.where((x >= lo) & (x <= hi), 1.0, 0.0)

    def variables(self):
        out: set[str] = set()
        for a in self.args:
            out |= a.variables()
        return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []
        pos = 0
        stripped_end = len(text.rstrip())
        while pos < stripped_end:
            m = _TOKEN.match(text, pos)
            if not m:
                col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
                raise ParseError(f"unexpected character {text[col - 1]!r}", col, "a number, name or operator")
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind) + 1))
            pos = m.end()
        self.i = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return ("eof", "", len(self.text) + 1)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "eof":
            found = "end of input" if kind == "eof" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos, value)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected {val!r}", pos, "operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            operand = self.unary()
            return Neg(operand) if val == "-" else operand
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", pos, "one of " + ", ".join(FUNCTIONS))
                self.take()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[val]
                if (arity > 0 and len(args) != arity) or (arity < 0 and len(args) < -arity):
                    raise ParseError(f"{val} takes {abs(arity)}{'+' if arity < 0 else ''} arguments, "
                                     f"got {len(args)}", pos)
                return Call(val, tuple(args))
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "eof" else repr(val)
        raise ParseError(f"unexpected {found}", pos, "a number, name or '('")


def parse_rate_expression(text: str) -> Node:
    return _Parser(text).parse()


def eval_rate(expr: Node | str, bindings: Mapping[str, object]):
    if isinstance(expr, str):
        expr = parse_rate_expression(expr)
    return expr.evaluate(bindings)


def unparse(node: Node) -> str:
    """Canonical text with the minimum parentheses needed to re-parse the same tree."""
    if isinstance(node, Num):
        return _fmt(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(unparse(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = unparse(node.operand)
        return f"-({inner})" if node.operand.prec <= 2 else f"-{inner}"
    left, right = unparse(node.left), unparse(node.right)
    p = node.prec
    if node.op == "^":
        if node.left.prec <= 4:
            left = f"({left})"
        if node.right.prec <= 2:
            right = f"({right})"
        return f"{left}^{right}"
    if node.left.prec < p:
        left = f"({left})"
    if node.right.prec <= p and not isinstance(node.right, Neg):
        right = f"({right})"
    sep = f" {node.op} " if p == 1 else node.op
    return f"{left}{sep}{right}"

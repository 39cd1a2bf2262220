"""Scalar expression DSL: parsing, evaluation, symbolic differentiation.

Expressions are small arithmetic trees over indexed variables
(``x0``, ``u1``, ``w0``, ``p2`` for states, actions, noises and policy
parameters), constants, ``+ - * / ^`` and the functions ``exp``, ``log``,
``sqrt``.  Evaluation broadcasts over numpy arrays, so a compiled
expression can be applied to a whole batch of points at once.

Precedence: ``^`` (right associative) > unary minus > ``* /`` > ``+ -``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

_FUNCTIONS = ("exp", "log", "sqrt")
_VAR_RE = re.compile(r"^[xuwp]\d+$")


class ExprError(ValueError):
    """Syntax or semantic error in a DSL expression."""

    def __init__(self, message, pos=None):
        if pos is not None:
            message = f"{message} (at offset {pos})"
        super().__init__(message)
        self.pos = pos


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Node:
    def eval(self, env):
        raise NotImplementedError

    def diff(self, var):
        raise NotImplementedError

    def variables(self):
        out = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add(node.name)
            stack.extend(_children(node))
        return out


@dataclass(frozen=True)
class Const(Node):
    value: float

    def eval(self, env):
        return self.value

    def diff(self, var):
        return Const(0.0)


@dataclass(frozen=True)
class Var(Node):
    name: str

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise ExprError(f"variable {self.name!r} is not bound")

    def diff(self, var):
        return Const(1.0) if self.name == var else Const(0.0)


@dataclass(frozen=True)
class Neg(Node):
    a: Node

    def eval(self, env):
        return -self.a.eval(env)

    def diff(self, var):
        return neg(self.a.diff(var))


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    a: Node
    b: Node

    def eval(self, env):
        a = self.a.eval(env)
        b = self.b.eval(env)
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            if self.op == "+":
                return a + b
            if self.op == "-":
                return a - b
            if self.op == "*":
                return a * b
            if self.op == "/":
                return a / b
            # power; exponent is a plain scalar in every supported expression
            return np.power(a, b)

    def diff(self, var):
        da = self.a.diff(var)
        db = self.b.diff(var)
        if self.op == "+":
            return add(da, db)
        if self.op == "-":
            return sub(da, db)
        if self.op == "*":
            return add(mul(da, self.b), mul(self.a, db))
        if self.op == "/":
            return div(sub(mul(da, self.b), mul(self.a, db)), mul(self.b, self.b))
        if not isinstance(self.b, Const):
            raise ExprError("cannot differentiate a power with non-constant exponent")
        e = self.b.value
        return mul(mul(Const(e), powc(self.a, e - 1.0)), da)


@dataclass(frozen=True)
class Call(Node):
    fn: str
    a: Node

    def eval(self, env):
        a = self.a.eval(env)
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            if self.fn == "exp":
                return np.exp(a)
            if self.fn == "log":
                return np.log(a)
            return np.sqrt(a)

    def diff(self, var):
        da = self.a.diff(var)
        if self.fn == "exp":
            return mul(Call("exp", self.a), da)
        if self.fn == "log":
            return div(da, self.a)
        return div(da, mul(Const(2.0), Call("sqrt", self.a)))


def _children(node):
    if isinstance(node, Neg):
        return (node.a,)
    if isinstance(node, BinOp):
        return (node.a, node.b)
    if isinstance(node, Call):
        return (node.a,)
    return ()


# ---------------------------------------------------------------------------
# simplifying constructors (keep derivative trees from exploding)


def _const(node, value):
    return isinstance(node, Const) and node.value == value


def add(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _const(a, 0.0):
        return b
    if _const(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _const(b, 0.0):
        return a
    if _const(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a, b):
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _const(a, 0.0) or _const(b, 0.0):
        return Const(0.0)
    if _const(a, 1.0):
        return b
    if _const(b, 1.0):
        return a
    return BinOp("*", a, b)


def div(a, b):
    if _const(a, 0.0):
        return Const(0.0)
    if _const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    return BinOp("/", a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def powc(a, e):
    if e == 0.0:
        return Const(1.0)
    if e == 1.0:
        return a
    if isinstance(a, Const):
        return Const(a.value ** e)
    return BinOp("^", a, Const(float(e)))


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped)
            raise ExprError(f"unexpected character {text[at]!r}", at)
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExprError(f"expected {op!r}", pos)

    def parse(self):
        node = self.additive()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ExprError("trailing input", pos)
        return node

    def additive(self):
        node = self.multiplicative()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.multiplicative()
                node = BinOp(val, node, rhs)
            else:
                return node

    def multiplicative(self):
        node = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.unary()
                node = BinOp(val, node, rhs)
            else:
                return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            # right associative; unary binds looser than ^ so 2^-3 works
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Const(val)
        if kind == "name":
            pk, pv, _ = self.peek()
            if pk == "op" and pv == "(":
                if val not in _FUNCTIONS:
                    raise ExprError(f"unknown function {val!r}", pos)
                self.next()
                arg = self.additive()
                self.expect_op(")")
                return Call(val, arg)
            if not _VAR_RE.match(val):
                raise ExprError(f"unknown identifier {val!r}", pos)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.additive()
            self.expect_op(")")
            return node
        raise ExprError("expected a value", pos)


def parse(text):
    """Parse an expression string into an AST."""
    if not text or not text.strip():
        raise ExprError("empty expression", 0)
    return _Parser(text).parse()


parse_expression = parse


# ---------------------------------------------------------------------------
# pretty printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node):
    if isinstance(node, (Const, Var, Call)):
        return 5
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC[node.op]


def _fmt_const(v):
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def pretty(node):
    """Deterministic canonical rendering; ``parse(pretty(t))`` equals ``t``
    structurally except that negative constants come back as ``Neg(Const)``
    which prints identically, so printing is a fixed point."""
    if isinstance(node, Const):
        if node.value < 0:
            return "-" + _fmt_const(-node.value)
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({pretty(node.a)})"
    if isinstance(node, Neg):
        inner = pretty(node.a)
        if _prec(node.a) < _PREC["neg"]:
            inner = f"({inner})"
        return "-" + inner
    p = _PREC[node.op]
    left = pretty(node.a)
    if _prec(node.a) < p or (node.op == "^" and _prec(node.a) <= p):
        left = f"({left})"
    right = pretty(node.b)
    # +,-,*,/ are left associative: parenthesize same-precedence right child.
    # Negations on the right are parenthesized for readability.
    if node.op == "^":
        if _prec(node.b) < _PREC["neg"]:
            right = f"({right})"
    elif _prec(node.b) <= p or isinstance(node.b, Neg):
        right = f"({right})"
    return f"{left}{node.op}{right}"


def additive_terms(node, sign=1.0):
    """Flatten ``node`` into a list of (sign, term) over top-level + and -."""
    if isinstance(node, BinOp) and node.op == "+":
        return additive_terms(node.a, sign) + additive_terms(node.b, sign)
    if isinstance(node, BinOp) and node.op == "-":
        return additive_terms(node.a, sign) + additive_terms(node.b, -sign)
    if isinstance(node, Neg):
        return additive_terms(node.a, -sign)
    return [(sign, node)]


def split_by_variables(node, prefix):
    """Split into (dependent, constant) parts relative to variables whose
    name starts with ``prefix`` (e.g. 'u').  Useful for dropping additive
    action-independent terms when minimizing a stage cost over the action."""
    dep = Const(0.0)
    const = Const(0.0)
    for sign, term in additive_terms(node):
        target = dep if any(v.startswith(prefix) for v in term.variables()) else const
        signed = term if sign > 0 else neg(term)
        if target is dep:
            dep = add(dep, signed)
        else:
            const = add(const, signed)
    return dep, const

"""Scalar expressions of (t, x1..xn) with forward-mode gradients in x.

Grammar (standard precedence, ``^`` binds tighter than unary minus)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom (('^' | '**') unary)?
    atom  := NUMBER | 't' | 'x' DIGITS | FUNC '(' expr ')' | '(' expr ')'

Exponents must be constant; they are folded to a float at parse time.
Expressions are evaluated through compiled closures that work on floats,
numpy arrays (vectorized over sample points) and :class:`Dual` numbers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .errors import ExpressionError

__all__ = [
    "Const", "Time", "StateVar", "BinOp", "Neg", "Pow", "Call",
    "Expression", "Dual", "parse", "to_text", "evaluate", "grad_x",
]


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class StateVar:
    index: int  # 1-based


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Time, StateVar, BinOp, Neg, Pow, Call]

FUNCTIONS = ("exp", "sin", "cos")


# ------------------------------------------------------------------ dual numbers


class Dual:
    """Value plus its gradient with respect to the state vector.

    ``value`` may be a float or an array of shape ``(K,)``; ``partials`` then
    has shape ``(n,)`` or ``(n, K)``.
    """

    __slots__ = ("value", "partials")
    # keep ndarray operands from swallowing Dual into object arrays
    __array_ufunc__ = None

    def __init__(self, value, partials):
        self.value = value
        self.partials = partials

    @classmethod
    def variable(cls, value, index, n):
        """Seed for the ``index``-th (0-based) state component."""
        unit = np.zeros((n,) + np.shape(value))
        unit[index] = 1.0
        return cls(value, unit)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.partials + other.partials)
        return Dual(self.value + other, self.partials)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.partials - other.partials)
        return Dual(self.value - other, self.partials)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.partials)

    def __neg__(self):
        return Dual(-self.value, -self.partials)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.value * other.partials + other.value * self.partials,
            )
        return Dual(self.value * other, self.partials * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            _check_denominator(other.value)
            q = self.value / other.value
            return Dual(q, (self.partials - q * other.partials) / other.value)
        _check_denominator(other)
        return Dual(self.value / other, self.partials / other)

    def __rtruediv__(self, other):
        _check_denominator(self.value)
        q = other / self.value
        return Dual(q, -q * self.partials / self.value)

    def power(self, k: float) -> "Dual":
        v = _pow_value(self.value, k)
        if k == 0.0:
            return Dual(v, self.partials * 0.0)
        dv = k * _pow_value(self.value, k - 1.0)
        return Dual(v, dv * self.partials)

    def exp(self) -> "Dual":
        v = _exp(self.value)
        return Dual(v, v * self.partials)

    def sin(self) -> "Dual":
        return Dual(_sin(self.value), _cos(self.value) * self.partials)

    def cos(self) -> "Dual":
        return Dual(_cos(self.value), -_sin(self.value) * self.partials)

    def __repr__(self):
        return f"Dual({self.value!r}, {self.partials!r})"


def _check_denominator(b):
    if isinstance(b, float) or isinstance(b, int):
        if b == 0:
            raise ExpressionError("division by zero")
    elif np.any(np.asarray(b) == 0):
        raise ExpressionError("division by zero")


def _pow_value(a, k):
    if isinstance(a, np.ndarray):
        if not float(k).is_integer() and np.any(a < 0):
            raise ExpressionError("non-integer power of a negative number")
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.power(a, k)
    if a < 0 and not float(k).is_integer():
        raise ExpressionError("non-integer power of a negative number")
    if a == 0 and k < 0:
        raise ExpressionError("division by zero")
    try:
        return float(a) ** (int(k) if float(k).is_integer() else k)
    except OverflowError:
        return math.inf


def _exp(a):
    if isinstance(a, np.ndarray):
        with np.errstate(over="ignore"):
            return np.exp(a)
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _sin(a):
    return np.sin(a) if isinstance(a, np.ndarray) else math.sin(a)


def _cos(a):
    return np.cos(a) if isinstance(a, np.ndarray) else math.cos(a)


def _div(a, b):
    if isinstance(a, Dual) or isinstance(b, Dual):
        return a / b
    _check_denominator(b)
    return a / b


def _power(a, k):
    if isinstance(a, Dual):
        return a.power(k)
    return _pow_value(a, k)


def _apply(name, a):
    if isinstance(a, Dual):
        return getattr(a, name)()
    return {"exp": _exp, "sin": _sin, "cos": _cos}[name](a)


# ------------------------------------------------------------------------ parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text) - len(text[pos:].lstrip())
            raise ExpressionError(f"unexpected character {text[bad]!r}", _byte_offset(text, bad))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExpressionError(message, _byte_offset(self.text, tok[2]))

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            self.fail(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("^", "**"):
            self.advance()
            exp_tok = self.peek()
            exponent = self.unary()
            if _depends_on_vars(exponent):
                self.fail("exponent must be constant", exp_tok)
            return Pow(base, float(_fold(exponent)))
        return base

    def atom(self):
        tok = self.advance()
        kind, value, _ = tok
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value == "t":
                return Time()
            m = re.fullmatch(r"x(\d+)", value)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.n:
                    self.fail(f"variable index {value} out of range 1..{self.n}", tok)
                return StateVar(idx)
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            self.fail(f"unknown identifier {value!r}", tok)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected token {value or 'end of input'!r}", tok)


def _depends_on_vars(node: Node) -> bool:
    return _any_node(node, lambda nd: isinstance(nd, (Time, StateVar)))


def _depends_on_x(node: Node) -> bool:
    return _any_node(node, lambda nd: isinstance(nd, StateVar))


def _any_node(node: Node, pred) -> bool:
    if pred(node):
        return True
    if isinstance(node, BinOp):
        return _any_node(node.left, pred) or _any_node(node.right, pred)
    if isinstance(node, (Neg,)):
        return _any_node(node.operand, pred)
    if isinstance(node, Pow):
        return _any_node(node.base, pred)
    if isinstance(node, Call):
        return _any_node(node.arg, pred)
    return False


def _fold(node: Node) -> float:
    value = _compile(node)(0.0, ())
    if not math.isfinite(value):
        raise ExpressionError("constant exponent is not finite")
    return value


# ---------------------------------------------------------------------- compiler


def _compile(node: Node) -> Callable:
    if isinstance(node, Const):
        v = node.value
        return lambda t, xs: v
    if isinstance(node, Time):
        return lambda t, xs: t
    if isinstance(node, StateVar):
        i = node.index - 1
        return lambda t, xs: xs[i]
    if isinstance(node, Neg):
        f = _compile(node.operand)
        return lambda t, xs: -f(t, xs)
    if isinstance(node, Pow):
        f = _compile(node.base)
        k = node.exponent
        return lambda t, xs: _power(f(t, xs), k)
    if isinstance(node, Call):
        f = _compile(node.arg)
        name = node.func
        return lambda t, xs: _apply(name, f(t, xs))
    if isinstance(node, BinOp):
        f = _compile(node.left)
        g = _compile(node.right)
        if node.op == "+":
            return lambda t, xs: f(t, xs) + g(t, xs)
        if node.op == "-":
            return lambda t, xs: f(t, xs) - g(t, xs)
        if node.op == "*":
            return lambda t, xs: f(t, xs) * g(t, xs)
        if node.op == "/":
            return lambda t, xs: _div(f(t, xs), g(t, xs))
    raise TypeError(f"not an expression node: {node!r}")


@dataclass(frozen=True)
class Expression:
    """Parsed expression over time ``t`` and state components ``x1..xn``."""

    root: Node
    n: int
    _fn: Callable = field(default=None, compare=False, repr=False)
    depends_on_x: bool = field(default=False, compare=False)
    depends_on_t: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.root))
        object.__setattr__(self, "depends_on_x", _depends_on_x(self.root))
        object.__setattr__(
            self, "depends_on_t", _any_node(self.root, lambda nd: isinstance(nd, Time))
        )

    @property
    def is_constant(self) -> bool:
        return not (self.depends_on_x or self.depends_on_t)

    def __call__(self, t, x):
        return evaluate(self, t, x)

    def raw(self, t, xs):
        """Evaluate without finiteness checks; ``xs`` is a sequence of components."""
        try:
            return self._fn(t, xs)
        except OverflowError:
            raise ExpressionError("non-finite result") from None

    def values(self, t, x) -> np.ndarray:
        """Vectorized evaluation: ``t`` shape (K,), ``x`` shape (n, K)."""
        t = np.asarray(t, dtype=float)
        out = self.raw(t, x)
        out = np.broadcast_to(np.asarray(out, dtype=float), t.shape)
        if not np.all(np.isfinite(out)):
            raise ExpressionError(f"non-finite result in {to_text(self)!r}")
        return out

    def gradients(self, t, x) -> np.ndarray:
        """Vectorized gradient in x: returns shape (n, K)."""
        t = np.asarray(t, dtype=float)
        if not self.depends_on_x:
            return np.zeros((self.n,) + t.shape)
        xs = [Dual.variable(np.asarray(x[i], dtype=float), i, self.n) for i in range(self.n)]
        out = self.raw(t, xs)
        partials = np.broadcast_to(out.partials, (self.n,) + t.shape)
        if not np.all(np.isfinite(partials)):
            raise ExpressionError(f"non-finite gradient in {to_text(self)!r}")
        return np.array(partials)

    def __str__(self):
        return to_text(self)


def parse(text: str, n: int) -> Expression:
    """Parse ``text`` into an expression over ``t`` and ``x1..xn``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", 0)
    if n < 0:
        raise ExpressionError("state dimension must be non-negative")
    return Expression(_Parser(text, n).parse(), n)


def _check_point(e: Expression, x) -> list:
    xs = [float(v) for v in np.ravel(x)]
    if len(xs) != e.n:
        raise ExpressionError(f"state vector has length {len(xs)}, expected {e.n}")
    return xs


def evaluate(e: Expression, t: float, x) -> float:
    """Value of ``e`` at a single point ``(t, x)``."""
    value = e.raw(float(t), _check_point(e, x))
    value = float(value)
    if not math.isfinite(value):
        raise ExpressionError(f"non-finite result in {to_text(e)!r}")
    return value


def grad_x(e: Expression, t: float, x) -> np.ndarray:
    """Exact gradient of ``e`` in x at ``(t, x)`` via dual arithmetic."""
    xs = _check_point(e, x)
    duals = [Dual.variable(v, i, e.n) for i, v in enumerate(xs)]
    out = e.raw(float(t), duals)
    if not isinstance(out, Dual):
        return np.zeros(e.n)
    grad = np.asarray(out.partials, dtype=float)
    if not (math.isfinite(float(out.value)) and np.all(np.isfinite(grad))):
        raise ExpressionError(f"non-finite result in {to_text(e)!r}")
    return grad


# ----------------------------------------------------------------------- printer


def to_text(e) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    node = e.root if isinstance(e, Expression) else e
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Time):
        return "t"
    if isinstance(node, StateVar):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Pow):
        k = node.exponent
        k_text = repr(k) if k >= 0 else f"(-{repr(-k)})"
        return f"({to_text(node.base)}^{k_text})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    raise TypeError(f"not an expression node: {node!r}")

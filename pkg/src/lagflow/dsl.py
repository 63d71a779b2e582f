"""Expression DSL for scalar functions on a fibred space.

Grammar (UTF-8 source, no implicit multiplication)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right associative
    atom   := NUMBER | "pi" | VAR | FUNC "(" expr ")" | "(" expr ")"

Variables are ``x1..xn`` (base) and ``y1..ym`` (fiber).  Functions:
sin, cos, exp, log, sqrt, sinh, cosh, tanh.  Exponents must fold to a
constant.  Numeric literals are decimal with an optional exponent.

Expressions are immutable and interned: structurally identical subtrees are
the same Python object, so ``id()``-keyed caches are sound and repeated
differentiation of shared subtrees stays cheap.  Construction folds constant
subtrees; nothing else is simplified.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "LagrangianSpec",
    "ParseError",
    "EvaluationError",
    "const",
    "var",
    "neg",
    "add",
    "sub",
    "mul",
    "div",
    "powc",
    "call",
    "differentiate",
    "evaluate",
    "to_string",
    "parse",
    "parse_scalar",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "sinh", "cosh", "tanh")

_FUNC_EVAL = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
}


class Expr:
    """Immutable, interned AST node."""

    __slots__ = ()

    def __repr__(self):
        return f"<expr {to_string(self)}>"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value


class Var(Expr):
    __slots__ = ("kind", "index")

    def __init__(self, kind, index):
        self.kind = kind
        self.index = index


class Unary(Expr):
    __slots__ = ("op", "arg")

    def __init__(self, op, arg):
        self.op = op
        self.arg = arg


class Binary(Expr):
    __slots__ = ("op", "left", "right")

    def __init__(self, op, left, right):
        self.op = op
        self.left = left
        self.right = right


# Interning pool.  Keys hold the child nodes themselves (identity hashing),
# so entries pin their children and no id can ever be recycled underneath a
# cache key.
_POOL: dict = {}


def _intern(key, factory):
    node = _POOL.get(key)
    if node is None:
        node = factory()
        _POOL[key] = node
    return node


def const(value) -> Const:
    v = float(value)
    if v == 0.0:
        v = 0.0  # normalize -0.0
    return _intern(("c", v), lambda: Const(v))


def var(kind: str, index: int) -> Var:
    if kind not in ("x", "y"):
        raise ValueError(f"variable kind must be 'x' or 'y', got {kind!r}")
    if index < 1:
        raise ValueError("variable indices are 1-based")
    return _intern(("v", kind, index), lambda: Var(kind, index))


def neg(e: Expr) -> Expr:
    if isinstance(e, Const):
        return const(-e.value)
    if isinstance(e, Unary) and e.op == "neg":
        return e.arg
    return _intern(("u", "neg", e), lambda: Unary("neg", e))


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return const(a.value + b.value)
    if isinstance(a, Const) and a.value == 0.0:
        return b
    if isinstance(b, Const) and b.value == 0.0:
        return a
    return _intern(("b", "add", a, b), lambda: Binary("add", a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if a is b:
        return const(0.0)
    if isinstance(a, Const) and isinstance(b, Const):
        return const(a.value - b.value)
    if isinstance(b, Const) and b.value == 0.0:
        return a
    if isinstance(a, Const) and a.value == 0.0:
        return neg(b)
    return _intern(("b", "sub", a, b), lambda: Binary("sub", a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return const(a.value * b.value)
    if isinstance(a, Const):
        if a.value == 0.0:
            return const(0.0)
        if a.value == 1.0:
            return b
    if isinstance(b, Const):
        if b.value == 0.0:
            return const(0.0)
        if b.value == 1.0:
            return a
    return _intern(("b", "mul", a, b), lambda: Binary("mul", a, b))


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and a.value == 0.0:
        return const(0.0)
    if isinstance(b, Const):
        if b.value == 1.0:
            return a
        if isinstance(a, Const) and b.value != 0.0:
            return const(a.value / b.value)
    return _intern(("b", "div", a, b), lambda: Binary("div", a, b))


def powc(base: Expr, exponent: float) -> Expr:
    """Power with a constant exponent."""
    c = float(exponent)
    if c == 0.0:
        return const(1.0)
    if c == 1.0:
        return base
    if isinstance(base, Const):
        try:
            return const(base.value**c)
        except (ValueError, OverflowError, ZeroDivisionError):
            pass  # leave the node; evaluation reports the domain error
    e = const(c)
    return _intern(("b", "pow", base, e), lambda: Binary("pow", base, e))


def call(name: str, arg: Expr) -> Expr:
    if name not in _FUNC_EVAL:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(arg, Const):
        try:
            return const(_FUNC_EVAL[name](arg.value))
        except (ValueError, OverflowError):
            pass
    return _intern(("u", name, arg), lambda: Unary(name, arg))


# --- differentiation ---------------------------------------------------------

_DIFF_CACHE: dict = {}


def differentiate(e: Expr, kind: str, index: int) -> Expr:
    """Exact symbolic partial derivative of ``e`` w.r.t. x<index> or y<index>.

    The result is a valid input for further differentiation (any order).
    Constant subtrees fold on the way out.
    """
    key = (e, kind, index)
    got = _DIFF_CACHE.get(key)
    if got is not None:
        return got
    d = _diff(e, kind, index)
    _DIFF_CACHE[key] = d
    return d


def _diff(e, kind, index):
    if isinstance(e, Const):
        return const(0.0)
    if isinstance(e, Var):
        return const(1.0 if (e.kind == kind and e.index == index) else 0.0)
    if isinstance(e, Unary):
        u = e.arg
        du = differentiate(u, kind, index)
        op = e.op
        if op == "neg":
            return neg(du)
        if op == "sin":
            return mul(call("cos", u), du)
        if op == "cos":
            return neg(mul(call("sin", u), du))
        if op == "exp":
            return mul(e, du)
        if op == "log":
            return div(du, u)
        if op == "sqrt":
            return div(du, mul(const(2.0), e))
        if op == "sinh":
            return mul(call("cosh", u), du)
        if op == "cosh":
            return mul(call("sinh", u), du)
        if op == "tanh":
            return mul(sub(const(1.0), powc(e, 2.0)), du)
        raise AssertionError(op)
    # Binary
    a, b = e.left, e.right
    da = differentiate(a, kind, index)
    op = e.op
    if op == "add":
        return add(da, differentiate(b, kind, index))
    if op == "sub":
        return sub(da, differentiate(b, kind, index))
    if op == "mul":
        return add(mul(da, b), mul(a, differentiate(b, kind, index)))
    if op == "div":
        db = differentiate(b, kind, index)
        return div(sub(mul(da, b), mul(a, db)), powc(b, 2.0))
    if op == "pow":
        c = b.value  # exponent is Const by construction
        return mul(mul(b, powc(a, c - 1.0)), da)
    raise AssertionError(op)


# --- evaluation --------------------------------------------------------------


class EvaluationError(ValueError):
    """Domain error during evaluation, naming the offending node."""

    def __init__(self, message, node):
        self.node = node
        super().__init__(f"{message} in '{to_string(node)}'")


def evaluate(e: Expr, x=(), y=(), _memo=None) -> float:
    """IEEE-double evaluation at the point (x, y); indices are 1-based
    into the supplied sequences.  Pass a shared ``_memo`` dict to reuse work
    when evaluating many expressions at the same point.
    """
    memo = {} if _memo is None else _memo
    return _eval(e, x, y, memo)


def _eval(e, x, y, memo):
    got = memo.get(id(e))
    if got is not None:
        return got
    if isinstance(e, Const):
        v = e.value
    elif isinstance(e, Var):
        seq = x if e.kind == "x" else y
        try:
            v = float(seq[e.index - 1])
        except IndexError:
            raise EvaluationError(
                f"point has no {e.kind}-coordinate {e.index}", e
            ) from None
    elif isinstance(e, Unary):
        u = _eval(e.arg, x, y, memo)
        if e.op == "neg":
            v = -u
        elif e.op == "log":
            if u <= 0.0:
                raise EvaluationError(f"log of non-positive value {u!r}", e)
            v = math.log(u)
        elif e.op == "sqrt":
            if u < 0.0:
                raise EvaluationError(f"sqrt of negative value {u!r}", e)
            v = math.sqrt(u)
        else:
            try:
                v = _FUNC_EVAL[e.op](u)
            except OverflowError:
                raise EvaluationError("overflow", e) from None
    else:  # Binary
        a = _eval(e.left, x, y, memo)
        b = _eval(e.right, x, y, memo)
        op = e.op
        if op == "add":
            v = a + b
        elif op == "sub":
            v = a - b
        elif op == "mul":
            v = a * b
        elif op == "div":
            if b == 0.0:
                raise EvaluationError("division by zero", e)
            v = a / b
        else:  # pow
            try:
                v = math.pow(a, b)
            except (ValueError, OverflowError):
                raise EvaluationError(
                    f"pow domain error for base {a!r}, exponent {b!r}", e
                ) from None
    memo[id(e)] = v
    return v


# --- printing ----------------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 2, "pow": 3}


def to_string(e: Expr) -> str:
    """Render with minimal parentheses; parse(to_string(e)) is semantically e."""
    s, _ = _fmt(e)
    return s


def _fmt(e):
    if isinstance(e, Const):
        v = e.value
        if v == int(v) and abs(v) < 1e15:
            s = str(int(v))
        else:
            s = repr(v)
        return (s, 2 if v < 0 else 4)
    if isinstance(e, Var):
        return (f"{e.kind}{e.index}", 4)
    if isinstance(e, Unary):
        if e.op == "neg":
            s, p = _fmt(e.arg)
            if p < 2:
                s = f"({s})"
            return (f"-{s}", 2)
        s, _ = _fmt(e.arg)
        return (f"{e.op}({s})", 4)
    op = e.op
    prec = _PREC[op]
    ls, lp = _fmt(e.left)
    rs, rp = _fmt(e.right)
    if op == "pow":
        if lp <= 3:
            ls = f"({ls})"
        return (f"{ls}^{rs}", 3)
    sym = {"add": " + ", "sub": " - ", "mul": "*", "div": "/"}[op]
    if lp < prec:
        ls = f"({ls})"
    # subtraction and division need parens on equal-precedence right operands
    if rp < prec or (op in ("sub", "div") and rp == prec):
        rs = f"({rs})"
    return (f"{ls}{sym}{rs}", prec)


# --- parsing -----------------------------------------------------------------


class ParseError(ValueError):
    """Syntax or resolution error, carrying the byte offset in the source."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (offset {offset})")


@dataclass(frozen=True)
class LagrangianSpec:
    """A parsed scalar generator L(x, y) with its bundle dimensions."""

    n: int
    m: int
    body: Expr


_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)
_VAR_RE = re.compile(r"^([xy])([0-9]+)$")


def _tokenize(source):
    tokens = []
    pos = 0
    size = len(source)
    while pos < size:
        ch = source[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {ch!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", size))
    return tokens


class _Parser:
    def __init__(self, source, n, m, extra_names=None):
        self.tokens = _tokenize(source)
        self.i = 0
        self.n = n
        self.m = m
        self.extra = extra_names or {}

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect_op(self, text):
        kind, val, pos = self.peek()
        if kind != "op" or val != text:
            raise ParseError(f"expected '{text}'", pos)
        return self.next()

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected input {val!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.next()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else sub(e, rhs)
            else:
                return e

    def term(self):
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("*", "/"):
                self.next()
                rhs = self.unary()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.next()
            exponent = self.unary()  # right associative
            if not isinstance(exponent, Const):
                raise ParseError("exponent must be a constant expression", pos)
            return powc(base, exponent.value)
        return base

    def atom(self):
        kind, val, pos = self.next()
        if kind == "num":
            return const(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "ident":
            if val in _FUNC_EVAL:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return call(val, arg)
            if val == "pi":
                return const(math.pi)
            if val in self.extra:
                return self.extra[val]
            vm = _VAR_RE.match(val)
            if vm:
                vk, idx = vm.group(1), int(vm.group(2))
                limit = self.n if vk == "x" else self.m
                if idx < 1 or idx > limit:
                    raise ParseError(
                        f"variable index out of range: {val} (valid {vk}1..{vk}{limit})",
                        pos,
                    )
                return var(vk, idx)
            raise ParseError(f"unknown identifier {val!r}", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


def parse(source: str, n: int, m: int) -> LagrangianSpec:
    """Parse a generator expression over x1..xn, y1..ym.

    Raises ParseError (with byte offset) on syntax errors, unknown
    identifiers, and variable indices out of range.
    """
    if not isinstance(source, str) or not source.strip():
        raise ValueError("source must be a nonempty string")
    if n < 2:
        raise ValueError("base dimension n must be at least 2")
    if m < n:
        raise ValueError("fiber dimension m must be at least n")
    body = _Parser(source, n, m).parse()
    return LagrangianSpec(n=n, m=m, body=body)


def parse_scalar(source: str, n: int, m: int, extra_names=None) -> Expr:
    """Parse a bare expression (internal; no dimension floor).

    ``extra_names`` maps extra identifiers to expressions, e.g. an arclength
    alias {"l": var("x", 1)} for flow profiles.
    """
    if not isinstance(source, str) or not source.strip():
        raise ValueError("source must be a nonempty string")
    return _Parser(source, n, m, extra_names).parse()

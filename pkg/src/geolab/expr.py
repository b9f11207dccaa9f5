"""Scalar expressions in named coordinates.

Expressions are immutable trees built from numeric literals, coordinate
variables, the four arithmetic operators, unary minus, powers and a fixed set
of elementary functions.  They can be parsed from the infix grammar used in
spec files, printed back, differentiated exactly and evaluated in IEEE double
precision.

Grammar (``^`` binds tighter than unary minus and is right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

``NAME`` is a declared coordinate or the constant ``pi``; function names are
``exp ln sqrt sin cos sinh cosh tanh``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    DomainError,
    ExprSyntaxError,
    UnknownFunctionError,
    UnknownIdentifierError,
)

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Call",
    "FUNCTIONS",
    "parse",
    "to_string",
    "differentiate",
    "evaluate",
    "substitute",
    "free_vars",
    "is_zero",
    "is_const",
    "compile_exprs",
    "num",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "call",
]

FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos", "sinh", "cosh", "tanh")

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)

    # Operator sugar for building expressions in code.
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, other):
        return power(self, _coerce(other))

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Call(Expr):
    fn: str
    arg: Expr


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Num(float(value))
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


# ---------------------------------------------------------------------------
# Smart constructors: constant folding and the trivial identities only.


def _fold(fn: Callable[[], float]) -> Num | None:
    try:
        value = fn()
    except (ArithmeticError, ValueError, DomainError):
        return None
    if isinstance(value, complex) or not math.isfinite(value):
        return None
    return Num(float(value))


def num(value: float) -> Num:
    return Num(float(value))


def var(name: str) -> Var:
    return Var(name)


def _is_num(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold(lambda: a.value + b.value) or Add(a, b)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold(lambda: a.value - b.value) or Sub(a, b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold(lambda: a.value * b.value) or Mul(a, b)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold(lambda: _div(a.value, b.value)) or Div(a, b)
    return Div(a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold(lambda: _pow(a.value, b.value)) or Pow(a, b)
    return Pow(a, b)


def call(fn: str, a: Expr) -> Expr:
    if fn not in FUNCTIONS:
        raise ValueError(f"unknown function {fn!r}")
    if isinstance(a, Num):
        return _fold(lambda: _FN_SCALAR[fn](a.value)) or Call(fn, a)
    return Call(fn, a)


# ---------------------------------------------------------------------------
# Scalar primitives.  Every real-domain violation raises instead of
# producing NaN or a complex number.


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise ZeroDivisionError("division by zero")
    return a / b


def _is_integral(x: float) -> bool:
    return x == x and math.isfinite(x) and float(x).is_integer()


def _pow(a: float, b: float) -> float:
    if _is_integral(b):
        if a == 0.0 and b < 0:
            raise ZeroDivisionError("zero raised to a negative power")
        return a ** int(b)
    if a <= 0.0:
        raise ValueError("non-integer power of a non-positive base")
    return a**b


def _ln(a: float) -> float:
    if a <= 0.0:
        raise ValueError("logarithm of a non-positive number")
    return math.log(a)


def _sqrt(a: float) -> float:
    if a < 0.0:
        raise ValueError("square root of a negative number")
    return math.sqrt(a)


_FN_SCALAR: dict[str, Callable[[float], float]] = {
    "exp": math.exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
}


# ---------------------------------------------------------------------------
# Parsing.

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\*\*|[-+*/^(),])
    """,
    re.VERBOSE,
)


class _Parser:
    def __init__(self, text: str, coords: Iterable[str] | None):
        self.text = text
        self.coords = None if coords is None else set(coords)
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ExprSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos), text)
            kind = m.lastgroup
            if kind != "ws":
                value = m.group()
                if value == "**":
                    value = "^"
                self.tokens.append((kind, value, pos))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, pos: int, cls=ExprSyntaxError):
        raise cls(message, _byte_offset(self.text, pos), self.text)

    def expect(self, value: str) -> None:
        kind, tok, pos = self.take()
        if tok != value or kind == "end":
            found = "end of input" if kind == "end" else repr(tok)
            self.error(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            self.error("empty expression", 0)
        e = self.expr()
        kind, tok, pos = self.peek()
        if kind != "end":
            self.error(f"unexpected token {tok!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self) -> Expr:
        kind, tok, _ = self.peek()
        if kind == "op" and tok == "-":
            self.take()
            return neg(self.unary())
        if kind == "op" and tok == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return power(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, tok, pos = self.take()
        if kind == "number":
            return Num(float(tok))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if tok not in FUNCTIONS:
                    self.error(f"unknown function {tok!r}", pos, UnknownFunctionError)
                self.take()
                arg = self.expr()
                self.expect(")")
                return call(tok, arg)
            if self.coords is not None and tok in self.coords:
                return Var(tok)
            if tok == "pi":
                return Num(math.pi)
            if tok in FUNCTIONS:
                self.error(f"function {tok!r} needs an argument list", pos)
            if self.coords is None:
                return Var(tok)
            self.error(f"unknown identifier {tok!r}", pos, UnknownIdentifierError)
        if kind == "op" and tok == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(tok)
        self.error(f"unexpected {found}", pos)


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def parse(text: str, coords: Iterable[str] | None = None) -> Expr:
    """Parse ``text`` into an expression.

    When ``coords`` is given, any other identifier (besides ``pi``) is an
    error; without it every bare name becomes a variable.
    """
    return _Parser(text, coords).parse()


# ---------------------------------------------------------------------------
# Printing.


def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Num) and (e.value < 0 or (e.value == 0 and math.copysign(1, e.value) < 0)):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _fmt_num(x: float) -> str:
    if _is_integral(x) and abs(x) < 1e15:
        s = str(int(x))
        if x == 0 and math.copysign(1, x) < 0:
            s = "-0"
        return s
    return repr(x)


def to_string(e: Expr) -> str:
    """Print ``e`` in the parse grammar with the minimal parentheses that
    reproduce the same tree."""

    def wrap(sub_e: Expr, min_prec: int) -> str:
        s = to_string(sub_e)
        return f"({s})" if _prec(sub_e) < min_prec else s

    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, _PREC_NEG)
    if isinstance(e, (Add, Sub)):
        op = " + " if isinstance(e, Add) else " - "
        return wrap(e.left, _PREC_ADD) + op + wrap(e.right, _PREC_ADD + 1)
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        return wrap(e.left, _PREC_MUL) + op + wrap(e.right, _PREC_MUL + 1)
    if isinstance(e, Pow):
        return wrap(e.base, _PREC_POW + 1) + "^" + wrap(e.exponent, _PREC_NEG)
    if isinstance(e, Call):
        return f"{e.fn}({to_string(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Structure queries and rewriting.


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return free_vars(e.arg)
    if isinstance(e, Pow):
        return free_vars(e.base) | free_vars(e.exponent)
    return free_vars(e.left) | free_vars(e.right)


def is_const(e: Expr, value: float | None = None) -> bool:
    """True when ``e`` is a literal (optionally equal to ``value``)."""
    if isinstance(e, Neg) and isinstance(e.arg, Num):
        e = Num(-e.arg.value)
    return isinstance(e, Num) and (value is None or e.value == value)


def is_zero(e: Expr) -> bool:
    return is_const(e, 0.0)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, re-simplifying on the way up."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return neg(substitute(e.arg, mapping))
    if isinstance(e, Call):
        return call(e.fn, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return power(substitute(e.base, mapping), substitute(e.exponent, mapping))
    ctor = {Add: add, Sub: sub, Mul: mul, Div: div}[type(e)]
    return ctor(substitute(e.left, mapping), substitute(e.right, mapping))


# ---------------------------------------------------------------------------
# Differentiation.


def differentiate(e: Expr, name: str) -> Expr:
    """Exact derivative of ``e`` with respect to the variable ``name``."""
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0 if e.name == name else 0.0)
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, name))
    if isinstance(e, Add):
        return add(differentiate(e.left, name), differentiate(e.right, name))
    if isinstance(e, Sub):
        return sub(differentiate(e.left, name), differentiate(e.right, name))
    if isinstance(e, Mul):
        a, b = e.left, e.right
        return add(mul(differentiate(a, name), b), mul(a, differentiate(b, name)))
    if isinstance(e, Div):
        a, b = e.left, e.right
        da, db = differentiate(a, name), differentiate(b, name)
        if is_zero(db):
            return Num(0.0) if is_zero(da) else div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))
    if isinstance(e, Pow):
        b, x = e.base, e.exponent
        db = differentiate(b, name)
        if name not in free_vars(x):
            # d(b^c) = c b^(c-1) b'
            return mul(mul(x, power(b, sub(x, Num(1.0)))), db)
        dx = differentiate(x, name)
        inner = add(mul(dx, call("ln", b)), div(mul(x, db), b))
        return mul(e, inner)
    if isinstance(e, Call):
        a = e.arg
        da = differentiate(a, name)
        if is_zero(da):
            return Num(0.0)
        fn = e.fn
        if fn == "exp":
            outer = e
        elif fn == "ln":
            return div(da, a)
        elif fn == "sqrt":
            return div(da, mul(Num(2.0), e))
        elif fn == "sin":
            outer = call("cos", a)
        elif fn == "cos":
            outer = neg(call("sin", a))
        elif fn == "sinh":
            outer = call("cosh", a)
        elif fn == "cosh":
            outer = call("sinh", a)
        elif fn == "tanh":
            outer = sub(Num(1.0), power(e, Num(2.0)))
        else:  # pragma: no cover - guarded by call()
            raise ValueError(fn)
        return mul(outer, da)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation.


def _eval(e: Expr, p: Mapping[str, float]) -> float:
    try:
        if isinstance(e, Num):
            return e.value
        if isinstance(e, Var):
            return float(p[e.name])
        if isinstance(e, Neg):
            return -_eval(e.arg, p)
        if isinstance(e, Add):
            return _eval(e.left, p) + _eval(e.right, p)
        if isinstance(e, Sub):
            return _eval(e.left, p) - _eval(e.right, p)
        if isinstance(e, Mul):
            return _eval(e.left, p) * _eval(e.right, p)
        if isinstance(e, Div):
            return _div(_eval(e.left, p), _eval(e.right, p))
        if isinstance(e, Pow):
            return _pow(_eval(e.base, p), _eval(e.exponent, p))
        if isinstance(e, Call):
            return _FN_SCALAR[e.fn](_eval(e.arg, p))
    except DomainError:
        raise
    except KeyError as exc:
        raise DomainError(f"point has no value for coordinate {exc.args[0]!r}") from None
    except (ArithmeticError, ValueError) as exc:
        raise DomainError(str(exc) or type(exc).__name__, to_string(e)) from None
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, p: Mapping[str, float]) -> float:
    """Evaluate ``e`` at the point ``p`` (a coordinate -> value mapping).

    Raises :class:`DomainError` naming the innermost failing subexpression.
    """
    value = _eval(e, p)
    if not math.isfinite(value):
        raise DomainError("non-finite value", to_string(e))
    return value


# ---------------------------------------------------------------------------
# Compilation to Python callables (hot path of the tensor engine).

_COMPILE_NS = {
    "_div": _div,
    "_pow": _pow,
    **{f"_f_{k}": v for k, v in _FN_SCALAR.items()},
}


def _codegen(e: Expr, index: Mapping[str, int]) -> str:
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"a{index[e.name]}"
    if isinstance(e, Neg):
        return f"(-{_codegen(e.arg, index)})"
    if isinstance(e, Add):
        return f"({_codegen(e.left, index)} + {_codegen(e.right, index)})"
    if isinstance(e, Sub):
        return f"({_codegen(e.left, index)} - {_codegen(e.right, index)})"
    if isinstance(e, Mul):
        return f"({_codegen(e.left, index)} * {_codegen(e.right, index)})"
    if isinstance(e, Div):
        return f"_div({_codegen(e.left, index)}, {_codegen(e.right, index)})"
    if isinstance(e, Pow):
        return f"_pow({_codegen(e.base, index)}, {_codegen(e.exponent, index)})"
    if isinstance(e, Call):
        return f"_f_{e.fn}({_codegen(e.arg, index)})"
    raise TypeError(f"not an expression: {e!r}")


class CompiledExprs:
    """A batch of expressions compiled into one Python function.

    Calling with coordinate values (in ``coords`` order) returns a tuple of
    floats.  Results are bit-identical to :func:`evaluate`; on any domain
    violation the tree evaluator is rerun to name the failing subexpression.
    """

    def __init__(self, exprs: Sequence[Expr], coords: Sequence[str]):
        self.exprs = tuple(exprs)
        self.coords = tuple(coords)
        index = {c: i for i, c in enumerate(self.coords)}
        missing = set().union(*(free_vars(x) for x in self.exprs)) - set(index) if self.exprs else set()
        if missing:
            raise ValueError(f"expressions use undeclared coordinates {sorted(missing)}")
        args = ", ".join(f"a{i}" for i in range(len(self.coords)))
        body = ", ".join(_codegen(x, index) for x in self.exprs)
        src = f"def _compiled({args}):\n    return ({body}{',' if len(self.exprs) == 1 else ''})\n"
        ns = dict(_COMPILE_NS)
        exec(compile(src, "<geolab-expr>", "exec"), ns)  # noqa: S102 - generated from our own AST
        self._fn = ns["_compiled"]

    def __call__(self, *values: float) -> tuple[float, ...]:
        try:
            out = self._fn(*values)
        except (ArithmeticError, ValueError):
            self._locate(values)
            raise
        if not all(math.isfinite(v) for v in out):
            self._locate(values)
        return out

    def _locate(self, values: Sequence[float]) -> None:
        point = dict(zip(self.coords, values))
        for e in self.exprs:
            evaluate(e, point)
        raise DomainError("non-finite value during evaluation")


def compile_exprs(exprs: Sequence[Expr], coords: Sequence[str]) -> CompiledExprs:
    return CompiledExprs(exprs, coords)

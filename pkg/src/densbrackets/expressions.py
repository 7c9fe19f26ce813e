"""Math expression language: immutable trees with parse, eval, diff, rewrite.

The grammar is plain infix arithmetic over real numbers::

    expr    :=  term  (('+' | '-') term)*
    term    :=  unary (('*' | '/') unary)*
    unary   :=  '-' unary | power
    power   :=  atom ['^' unary]          # right associative
    atom    :=  NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, which binds tighter than ``*``/``/``.
Unary minus is represented as ``0 - x``.  ``pi`` and ``e`` are named
constants, not variables.  Decimal and scientific literals are accepted, and
identifiers match ``[a-zA-Z][a-zA-Z0-9_]*``.

Supported functions: sin, cos, tan, exp, ln, sqrt, abs, arcsin, arccos,
arctan, erf, besseli0.  Two more names, ``besseli1`` and ``sign``, exist only
so that derivatives of ``besseli0`` and ``abs`` stay inside the language;
they are accepted when re-parsing printed expressions but are not part of the
documented surface grammar.

Everything here is real-valued and strict: evaluating ``sqrt``, ``ln``,
``arcsin``/``arccos`` or a division outside its domain raises
:class:`DomainError` instead of returning NaN or infinity.  All trees are
immutable and all operations are pure, so expressions can be shared freely
between threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from . import _specials

__all__ = [
    "Expr",
    "Const",
    "NamedConst",
    "Var",
    "Call",
    "BinOp",
    "ExpressionError",
    "ParseError",
    "UnboundVariableError",
    "DomainError",
    "parse",
    "evaluate",
    "diff",
    "substitute",
    "simplify",
    "free_vars",
    "to_text",
    "compile_expr",
    "var",
    "num",
    "func",
    "PI",
    "E",
]

Numeric = Union[int, float]

# -- errors -----------------------------------------------------------------


class ExpressionError(Exception):
    """Base class for all expression-language errors."""


class ParseError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnboundVariableError(ExpressionError):
    def __init__(self, name: str):
        super().__init__(f"variable '{name}' is not bound")
        self.name = name


class DomainError(ExpressionError):
    """A subexpression was evaluated outside its real domain.

    ``kind`` is one of: division-by-zero, sqrt-negative, log-nonpositive,
    arcsin-range, arccos-range, pow-negative-base, overflow.
    """

    def __init__(self, kind: str, subexpr: "Expr", value: float):
        self.kind = kind
        self.subexpr = subexpr
        self.value = value
        super().__init__(
            f"{kind} in '{to_text(subexpr)}' (offending argument {value!r})"
        )


# -- tree -------------------------------------------------------------------


class Expr:
    """Base class of expression nodes; supports operator-overloaded building."""

    __slots__ = ()

    def __add__(self, other):
        return BinOp("+", self, _coerce(other))

    def __radd__(self, other):
        return BinOp("+", _coerce(other), self)

    def __sub__(self, other):
        return BinOp("-", self, _coerce(other))

    def __rsub__(self, other):
        return BinOp("-", _coerce(other), self)

    def __mul__(self, other):
        return BinOp("*", self, _coerce(other))

    def __rmul__(self, other):
        return BinOp("*", _coerce(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, _coerce(other))

    def __rtruediv__(self, other):
        return BinOp("/", _coerce(other), self)

    def __pow__(self, other):
        return BinOp("^", self, _coerce(other))

    def __rpow__(self, other):
        return BinOp("^", _coerce(other), self)

    def __neg__(self):
        return BinOp("-", Const(0.0), self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, slots=True)
class NamedConst(Expr):
    name: str  # "pi" | "e"


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Call(Expr):
    fn: str
    arg: Expr


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


PI = NamedConst("pi")
E = NamedConst("e")

_NAMED_VALUES = {"pi": math.pi, "e": math.e}

# Functions available in the surface grammar.
FUNCTIONS = (
    "sin",
    "cos",
    "tan",
    "exp",
    "ln",
    "sqrt",
    "abs",
    "arcsin",
    "arccos",
    "arctan",
    "erf",
    "besseli0",
)
# Names reachable only through differentiation; parsed for round-trips.
_INTERNAL_FUNCTIONS = ("besseli1", "sign")
_ALL_FUNCTIONS = frozenset(FUNCTIONS) | frozenset(_INTERNAL_FUNCTIONS)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    raise TypeError(f"cannot use {value!r} as an expression operand")


def var(name: str) -> Var:
    return Var(name)


def num(value: Numeric) -> Const:
    return Const(float(value))


def func(name: str, arg) -> Call:
    if name not in _ALL_FUNCTIONS:
        raise ValueError(f"unknown function '{name}'")
    return Call(name, _coerce(arg))


# -- parser -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<name>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []
        self._lex()
        self.index = 0

    def _lex(self):
        pos = 0
        text = self.text
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}", pos)
            if m.lastgroup != "ws":
                self.tokens.append((m.lastgroup, m.group(), pos))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.index]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.index]
        if tok[0] != "end":
            self.index += 1
        return tok


def parse(text: str) -> Expr:
    """Parse an expression string into a tree.

    Raises :class:`ParseError` with the offending position on syntax errors
    and on unknown function names.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    toks = _Tokenizer(text)
    expr = _parse_expr(toks)
    kind, value, pos = toks.peek()
    if kind != "end":
        raise ParseError(f"unexpected trailing input {value!r}", pos)
    return expr


def _parse_expr(toks: _Tokenizer) -> Expr:
    node = _parse_term(toks)
    while True:
        kind, value, _ = toks.peek()
        if kind == "op" and value in "+-":
            toks.next()
            rhs = _parse_term(toks)
            node = BinOp(value, node, rhs)
        else:
            return node


def _parse_term(toks: _Tokenizer) -> Expr:
    node = _parse_unary(toks)
    while True:
        kind, value, _ = toks.peek()
        if kind == "op" and value in "*/":
            toks.next()
            rhs = _parse_unary(toks)
            node = BinOp(value, node, rhs)
        else:
            return node


def _parse_unary(toks: _Tokenizer) -> Expr:
    kind, value, _ = toks.peek()
    if kind == "op" and value == "-":
        toks.next()
        return BinOp("-", Const(0.0), _parse_unary(toks))
    return _parse_power(toks)


def _parse_power(toks: _Tokenizer) -> Expr:
    base = _parse_atom(toks)
    kind, value, _ = toks.peek()
    if kind == "op" and value == "^":
        toks.next()
        exponent = _parse_unary(toks)  # right associative, may carry a sign
        return BinOp("^", base, exponent)
    return base


def _parse_atom(toks: _Tokenizer) -> Expr:
    kind, value, pos = toks.next()
    if kind == "number":
        return Const(float(value))
    if kind == "name":
        nk, nv, _ = toks.peek()
        if nk == "op" and nv == "(":
            if value not in _ALL_FUNCTIONS:
                raise ParseError(f"unknown function '{value}'", pos)
            toks.next()
            arg = _parse_expr(toks)
            ck, cv, cpos = toks.next()
            if not (ck == "op" and cv == ")"):
                raise ParseError("expected ')'", cpos)
            return Call(value, arg)
        if value in _NAMED_VALUES:
            return NamedConst(value)
        if value in _ALL_FUNCTIONS:
            raise ParseError(f"function '{value}' used without arguments", pos)
        return Var(value)
    if kind == "op" and value == "(":
        inner = _parse_expr(toks)
        ck, cv, cpos = toks.next()
        if not (ck == "op" and cv == ")"):
            raise ParseError("expected ')'", cpos)
        return inner
    raise ParseError(
        "expected a number, name or '('" if kind != "end" else "unexpected end of input",
        pos,
    )


# -- evaluation --------------------------------------------------------------

Bindings = Mapping[str, float]


def evaluate(expr: Expr, bindings: Bindings) -> float:
    """Evaluate with all free variables bound; strict about domains.

    Bindings of variables that do not occur are ignored.  Out-of-domain
    arguments (including division by zero and overflow) raise
    :class:`DomainError`; an unbound variable raises
    :class:`UnboundVariableError`.  The result is always a finite float.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, NamedConst):
        return _NAMED_VALUES[expr.name]
    if isinstance(expr, Var):
        try:
            return float(bindings[expr.name])
        except KeyError:
            raise UnboundVariableError(expr.name) from None
    if isinstance(expr, Call):
        return _apply_function(expr, evaluate(expr.arg, bindings))
    if isinstance(expr, BinOp):
        a = evaluate(expr.left, bindings)
        b = evaluate(expr.right, bindings)
        return _apply_binop(expr, a, b)
    raise TypeError(f"not an expression node: {expr!r}")


def _apply_binop(node: BinOp, a: float, b: float) -> float:
    op = node.op
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        if b == 0.0:
            raise DomainError("division-by-zero", node, b)
        r = a / b
    elif op == "^":
        r = _apply_pow(node, a, b)
    else:
        raise TypeError(f"unknown operator {op!r}")
    if not math.isfinite(r):
        raise DomainError("overflow", node, r)
    return r


def _apply_pow(node: BinOp, a: float, b: float) -> float:
    if a < 0.0 and not float(b).is_integer():
        raise DomainError("pow-negative-base", node, a)
    if a == 0.0 and b < 0.0:
        raise DomainError("division-by-zero", node, a)
    try:
        return a**b
    except OverflowError:
        raise DomainError("overflow", node, a) from None


def _apply_function(node: Call, x: float) -> float:
    fn = node.fn
    try:
        if fn == "sin":
            return math.sin(x)
        if fn == "cos":
            return math.cos(x)
        if fn == "tan":
            return math.tan(x)
        if fn == "exp":
            if x > 709.78:
                raise DomainError("overflow", node, x)
            return math.exp(x)
        if fn == "ln":
            if x <= 0.0:
                raise DomainError("log-nonpositive", node, x)
            return math.log(x)
        if fn == "sqrt":
            if x < 0.0:
                raise DomainError("sqrt-negative", node, x)
            return math.sqrt(x)
        if fn == "abs":
            return abs(x)
        if fn == "arcsin":
            if not -1.0 <= x <= 1.0:
                raise DomainError("arcsin-range", node, x)
            return math.asin(x)
        if fn == "arccos":
            if not -1.0 <= x <= 1.0:
                raise DomainError("arccos-range", node, x)
            return math.acos(x)
        if fn == "arctan":
            return math.atan(x)
        if fn == "erf":
            return _specials.erf(x)
        if fn == "besseli0":
            return _specials.besseli0(x)
        if fn == "besseli1":
            return _specials.besseli1(x)
        if fn == "sign":
            return math.copysign(1.0, x) if x != 0.0 else 0.0
    except OverflowError:
        raise DomainError("overflow", node, x) from None
    raise TypeError(f"unknown function {fn!r}")


# -- differentiation ---------------------------------------------------------


def diff(expr: Expr, variable: str) -> Expr:
    """Exact symbolic partial derivative with respect to ``variable``.

    The result is not simplified; pass it through :func:`simplify` if a
    compact tree is wanted.  Conventions: d|u|/du is ``sign(u)`` with
    ``sign(0) = 0``, and d besseli0(u)/du = besseli1(u).
    """
    if isinstance(expr, (Const, NamedConst)):
        return Const(0.0)
    if isinstance(expr, Var):
        return Const(1.0 if expr.name == variable else 0.0)
    if isinstance(expr, BinOp):
        u, v = expr.left, expr.right
        du = diff(u, variable)
        dv = diff(v, variable)
        op = expr.op
        if op == "+":
            return BinOp("+", du, dv)
        if op == "-":
            return BinOp("-", du, dv)
        if op == "*":
            return BinOp("+", BinOp("*", du, v), BinOp("*", u, dv))
        if op == "/":
            num_ = BinOp("-", BinOp("*", du, v), BinOp("*", u, dv))
            return BinOp("/", num_, BinOp("^", v, Const(2.0)))
        if op == "^":
            if isinstance(v, Const):
                # power rule: n u^(n-1) u'
                return BinOp(
                    "*",
                    BinOp("*", v, BinOp("^", u, Const(v.value - 1.0))),
                    du,
                )
            # general: u^v (v' ln u + v u'/u)
            bracket = BinOp(
                "+",
                BinOp("*", dv, Call("ln", u)),
                BinOp("*", v, BinOp("/", du, u)),
            )
            return BinOp("*", expr, bracket)
    if isinstance(expr, Call):
        u = expr.arg
        du = diff(u, variable)
        outer = _function_derivative(expr.fn, u)
        return BinOp("*", outer, du)
    raise TypeError(f"not an expression node: {expr!r}")


def _function_derivative(fn: str, u: Expr) -> Expr:
    if fn == "sin":
        return Call("cos", u)
    if fn == "cos":
        return BinOp("-", Const(0.0), Call("sin", u))
    if fn == "tan":
        return BinOp("/", Const(1.0), BinOp("^", Call("cos", u), Const(2.0)))
    if fn == "exp":
        return Call("exp", u)
    if fn == "ln":
        return BinOp("/", Const(1.0), u)
    if fn == "sqrt":
        return BinOp("/", Const(1.0), BinOp("*", Const(2.0), Call("sqrt", u)))
    if fn == "abs":
        return Call("sign", u)
    if fn == "sign":
        return Const(0.0)  # derivative almost everywhere
    if fn == "arcsin":
        return BinOp(
            "/",
            Const(1.0),
            Call("sqrt", BinOp("-", Const(1.0), BinOp("^", u, Const(2.0)))),
        )
    if fn == "arccos":
        return BinOp(
            "-",
            Const(0.0),
            BinOp(
                "/",
                Const(1.0),
                Call("sqrt", BinOp("-", Const(1.0), BinOp("^", u, Const(2.0)))),
            ),
        )
    if fn == "arctan":
        return BinOp(
            "/", Const(1.0), BinOp("+", Const(1.0), BinOp("^", u, Const(2.0)))
        )
    if fn == "erf":
        # (2/sqrt(pi)) e^(-u^2)
        coeff = BinOp("/", Const(2.0), Call("sqrt", PI))
        gauss = Call("exp", BinOp("-", Const(0.0), BinOp("^", u, Const(2.0))))
        return BinOp("*", coeff, gauss)
    if fn == "besseli0":
        return Call("besseli1", u)
    if fn == "besseli1":
        # I1'(u) = I0(u) - I1(u)/u; evaluating this at u = 0 raises a
        # division error even though the limit (1/2) exists.
        return BinOp("-", Call("besseli0", u), BinOp("/", Call("besseli1", u), u))
    raise TypeError(f"unknown function {fn!r}")


# -- substitution, free variables, printing ----------------------------------


def substitute(expr: Expr, variable: str, replacement: Expr) -> Expr:
    """Replace every occurrence of ``variable`` by ``replacement``.

    The language has no binders, so substitution is capture-free by
    construction.
    """
    if isinstance(expr, Var):
        return replacement if expr.name == variable else expr
    if isinstance(expr, (Const, NamedConst)):
        return expr
    if isinstance(expr, Call):
        arg = substitute(expr.arg, variable, replacement)
        return expr if arg is expr.arg else Call(expr.fn, arg)
    if isinstance(expr, BinOp):
        left = substitute(expr.left, variable, replacement)
        right = substitute(expr.right, variable, replacement)
        if left is expr.left and right is expr.right:
            return expr
        return BinOp(expr.op, left, right)
    raise TypeError(f"not an expression node: {expr!r}")


def free_vars(expr: Expr) -> frozenset[str]:
    """Exactly the variable identifiers occurring in the tree."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Call):
            stack.append(node.arg)
        elif isinstance(node, BinOp):
            stack.append(node.left)
            stack.append(node.right)
    return frozenset(out)


# Printing precedence levels; parenthesisation keeps round-trips value-exact.
_PREC_ADD = 1
_PREC_MUL = 3
_PREC_NEG = 4
_PREC_POW = 5
_PREC_ATOM = 10


def _format_const(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _prec(expr: Expr) -> int:
    if isinstance(expr, Const):
        return _PREC_NEG if expr.value < 0 else _PREC_ATOM
    if isinstance(expr, (NamedConst, Var, Call)):
        return _PREC_ATOM
    if isinstance(expr, BinOp):
        if expr.op in "+-":
            if expr.op == "-" and expr.left == Const(0.0):
                return _PREC_NEG
            return _PREC_ADD
        if expr.op in "*/":
            return _PREC_MUL
        return _PREC_POW
    raise TypeError(f"not an expression node: {expr!r}")


def to_text(expr: Expr) -> str:
    """Render to the surface grammar, preserving association exactly.

    Right operands of equal precedence are parenthesised (``a + (b - c)``,
    ``a*(b/c)``), so re-parsing reproduces the original evaluation order and
    the round-trip is exact to the last bit, not merely value-close.
    """
    if isinstance(expr, Const):
        v = expr.value
        if v < 0:
            return "-" + _format_const(-v)
        return _format_const(v)
    if isinstance(expr, NamedConst):
        return expr.name
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.fn}({to_text(expr.arg)})"
    if isinstance(expr, BinOp):
        op = expr.op
        if op == "-" and expr.left == Const(0.0):
            child = to_text(expr.right)
            if _prec(expr.right) < _PREC_NEG:
                child = f"({child})"
            return "-" + child
        mine = _prec(expr)
        lt = to_text(expr.left)
        rt = to_text(expr.right)
        if op == "^":
            # left operand of ^ must be atomic; right side accepts unary level
            if _prec(expr.left) < _PREC_ATOM:
                lt = f"({lt})"
            if _prec(expr.right) < _PREC_NEG:
                rt = f"({rt})"
            return f"{lt}{op}{rt}"
        if _prec(expr.left) < mine:
            lt = f"({lt})"
        # +,-,*,/ parse left associative: an equal-precedence right child
        # would re-associate, so it keeps its parentheses
        if _prec(expr.right) <= mine:
            rt = f"({rt})"
        return f"{lt} {op} {rt}" if op in "+-" else f"{lt}{op}{rt}"
    raise TypeError(f"not an expression node: {expr!r}")


# -- simplification ----------------------------------------------------------

_MAX_SIMPLIFY_PASSES = 60
_MAX_DISTRIBUTED_POWER = 64


def simplify(expr: Expr) -> Expr:
    """Apply a fixed, terminating rewrite set; value-equal on the common domain.

    The rules, applied bottom-up to a fixed point:

    * constant folding of operators and function calls with constant,
      in-domain arguments (``pi``/``e`` stay symbolic);
    * ``x*0 -> 0``, ``x*1 -> x``, ``x+0 -> x``, ``x-0 -> x``, ``x/1 -> x``,
      ``x^1 -> x``, ``x^0 -> 1`` (and mirrored variants);
    * ``cos(arccos(u)) -> u`` and ``sin(arccos(u)) -> sqrt(1 - u^2)``;
    * ``sin(u)^(2k) -> (1 - cos(u)^2)^k`` when ``u`` is an ``arccos``
      application (the case in which the rewrite removes a radical);
    * ``sqrt(u)^(2k) -> u^k`` for integer k >= 1;
    * ``(a*b)^n -> a^n * b^n`` and ``(a/b)^n -> a^n / b^n`` for integer
      ``2 <= n <= 64`` when the base contains a ``sqrt``, so that even powers
      of radicals can rationalise.

    Rewrites may extend the domain (e.g. ``cos(arccos(u)) -> u`` is defined
    for all ``u``); on points where the input is defined the value is
    preserved exactly up to floating-point evaluation order.
    """
    current = expr
    for _ in range(_MAX_SIMPLIFY_PASSES):
        rewritten = _simplify_pass(current)
        if rewritten == current:
            return rewritten
        current = rewritten
    return current


def _simplify_pass(expr: Expr) -> Expr:
    if isinstance(expr, (Const, NamedConst, Var)):
        return expr
    if isinstance(expr, Call):
        arg = _simplify_pass(expr.arg)
        return _rewrite_call(expr.fn, arg)
    if isinstance(expr, BinOp):
        left = _simplify_pass(expr.left)
        right = _simplify_pass(expr.right)
        return _rewrite_binop(expr.op, left, right)
    raise TypeError(f"not an expression node: {expr!r}")


def _const_value(expr: Expr) -> float | None:
    return expr.value if isinstance(expr, Const) else None


def _is_zero(expr: Expr) -> bool:
    return isinstance(expr, Const) and expr.value == 0.0


def _is_one(expr: Expr) -> bool:
    return isinstance(expr, Const) and expr.value == 1.0


def _positive_int_exponent(expr: Expr, minimum: int = 1) -> int | None:
    v = _const_value(expr)
    if v is None or not v.is_integer():
        return None
    n = int(v)
    return n if n >= minimum else None


def _contains_sqrt(expr: Expr) -> bool:
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Call):
            if node.fn == "sqrt":
                return True
            stack.append(node.arg)
        elif isinstance(node, BinOp):
            stack.append(node.left)
            stack.append(node.right)
    return False


def _rewrite_call(fn: str, arg: Expr) -> Expr:
    if isinstance(arg, Const):
        try:
            return Const(_apply_function(Call(fn, arg), arg.value))
        except ExpressionError:
            pass  # out of domain: keep symbolic, evaluation will report it
    if fn == "cos" and isinstance(arg, Call) and arg.fn == "arccos":
        return arg.arg
    if fn == "sin" and isinstance(arg, Call) and arg.fn == "arccos":
        u = arg.arg
        return Call("sqrt", BinOp("-", Const(1.0), BinOp("^", u, Const(2.0))))
    return Call(fn, arg)


def _rewrite_binop(op: str, left: Expr, right: Expr) -> Expr:
    node = BinOp(op, left, right)
    lv, rv = _const_value(left), _const_value(right)
    if lv is not None and rv is not None:
        try:
            return Const(_apply_binop(node, lv, rv))
        except ExpressionError:
            return node  # undefined constant (e.g. 1/0): leave for evaluation
    if op == "*":
        if _is_zero(left) or _is_zero(right):
            return Const(0.0)
        if _is_one(left):
            return right
        if _is_one(right):
            return left
    elif op == "+":
        if _is_zero(left):
            return right
        if _is_zero(right):
            return left
    elif op == "-":
        if _is_zero(right):
            return left
    elif op == "/":
        if _is_one(right):
            return left
    elif op == "^":
        return _rewrite_pow(left, right)
    return node


def _rewrite_pow(base: Expr, exponent: Expr) -> Expr:
    if _is_one(exponent):
        return base
    if _is_zero(exponent):
        return Const(1.0)
    n = _positive_int_exponent(exponent, minimum=2)
    if n is not None:
        # sqrt(u)^(2k) -> u^k
        if isinstance(base, Call) and base.fn == "sqrt" and n % 2 == 0:
            k = n // 2
            return base.arg if k == 1 else BinOp("^", base.arg, Const(float(k)))
        # sin(arccos(v))^(2k) -> (1 - v^2)^k  (redundant with the sin/sqrt
        # rules, kept so the pair of rewrites composes in a single pass)
        if (
            isinstance(base, Call)
            and base.fn == "sin"
            and isinstance(base.arg, Call)
            and base.arg.fn == "arccos"
            and n % 2 == 0
        ):
            k = n // 2
            inner = BinOp("-", Const(1.0), BinOp("^", base.arg.arg, Const(2.0)))
            return inner if k == 1 else BinOp("^", inner, Const(float(k)))
        # distribute integer powers over * and / to expose radicals
        if (
            isinstance(base, BinOp)
            and base.op in "*/"
            and n <= _MAX_DISTRIBUTED_POWER
            and _contains_sqrt(base)
        ):
            e = Const(float(n))
            return BinOp(
                base.op,
                BinOp("^", base.left, e),
                BinOp("^", base.right, e),
            )
    return BinOp("^", base, exponent)


# -- compilation to vectorised callables --------------------------------------

_NUMPY_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "ln": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "arcsin": np.arcsin,
    "arccos": np.arccos,
    "arctan": np.arctan,
    "sign": np.sign,
    "erf": _specials.erf_array,
    "besseli0": _specials.besseli0_array,
    "besseli1": _specials.besseli1_array,
}


def compile_expr(
    expr: Expr, variables: Sequence[str]
) -> Callable[..., np.ndarray]:
    """Compile to a numpy-broadcasting callable ``f(*arrays) -> ndarray``.

    The compiled function performs no domain checking: out-of-domain points
    yield NaN/inf entries under suppressed floating-point warnings, and the
    caller decides how to police them (see :func:`locate_domain_error`).
    Unknown free variables raise immediately at compile time.
    """
    index = {name: i for i, name in enumerate(variables)}
    missing = free_vars(expr) - set(index)
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    body = _compile_node(expr, index)

    def compiled(*args: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.asarray(body(args), dtype=float)

    return compiled


def _compile_node(expr: Expr, index: Mapping[str, int]):
    if isinstance(expr, Const):
        v = expr.value
        return lambda args: v
    if isinstance(expr, NamedConst):
        v = _NAMED_VALUES[expr.name]
        return lambda args: v
    if isinstance(expr, Var):
        i = index[expr.name]
        return lambda args: args[i]
    if isinstance(expr, Call):
        inner = _compile_node(expr.arg, index)
        fn = _NUMPY_FUNCTIONS[expr.fn]
        return lambda args: fn(inner(args))
    if isinstance(expr, BinOp):
        lf = _compile_node(expr.left, index)
        rf = _compile_node(expr.right, index)
        op = expr.op
        if op == "+":
            return lambda args: lf(args) + rf(args)
        if op == "-":
            return lambda args: lf(args) - rf(args)
        if op == "*":
            return lambda args: lf(args) * rf(args)
        if op == "/":
            return lambda args: lf(args) / rf(args)
        if op == "^":
            return lambda args: np.power(lf(args), rf(args))
    raise TypeError(f"not an expression node: {expr!r}")


def locate_domain_error(
    expr: Expr,
    variables: Sequence[str],
    point: Iterable[float],
) -> ExpressionError:
    """Re-evaluate strictly at one point to recover the precise domain error.

    Used by vectorised callers after spotting a non-finite entry.  If the
    strict evaluation unexpectedly succeeds, a generic error is returned.
    """
    bindings = dict(zip(variables, point))
    try:
        evaluate(expr, bindings)
    except ExpressionError as exc:
        return exc
    return DomainError("overflow", expr, math.nan)

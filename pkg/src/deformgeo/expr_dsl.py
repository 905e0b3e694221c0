"""A small arithmetic expression language.

Grammar (lowest to highest precedence, binary operators left-associative)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' ['-' | '+'] INT)*
    atom  := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``**`` is accepted as a synonym for ``^``. Expressions evaluate either on
floats (:func:`eval_scalar`) or on :class:`~deformgeo.jets.Jet` objects
(:func:`eval_jet`), which yields exact partial derivatives.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Union

import numpy as np

from . import jets
from .errors import DomainError, ExprSyntaxError, OrderTooHigh, UnknownFunction, UnknownVariable
from .jets import Jet, jet_space

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")

Scalar = Union[float, Jet]
Binding = Mapping[str, Scalar]


# AST ------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


# lexer ----------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, name, op, end
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(
                f"unexpected character {source[pos]!r}", line, pos - line_start + 1,
                {"number", "name", "operator"},
            )
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, "^" if text == "**" else text, line, pos - line_start + 1))
        for k, ch in enumerate(text):
            if ch == "\n":
                line += 1
                line_start = pos + k + 1
        pos = m.end()
    tokens.append(_Token("end", "", line, pos - line_start + 1))
    return tokens


# parser ---------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected, message=None):
        tok = self.tok
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(message or f"unexpected {what}", tok.line, tok.column, expected)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind != "op":
            self.fail({repr(text)})
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail({"operator", "end of input"})
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            sign = 1
            if self.tok.kind == "op" and self.tok.text in "+-":
                sign = -1 if self.advance().text == "-" else 1
            if self.tok.kind != "num" or not self.tok.text.isdigit():
                self.fail({"integer exponent"})
            node = Pow(node, sign * int(self.advance().text))
        return node

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                self.fail({"finite number"}, f"number {tok.text} overflows")
            return Num(value)
        if tok.kind == "name":
            self.advance()
            is_call = self.tok.kind == "op" and self.tok.text == "("
            if is_call:
                if tok.text not in FUNCTIONS:
                    raise UnknownFunction(
                        f"unknown function {tok.text!r} at line {tok.line}, column {tok.column}"
                    )
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                self.fail({"'('"})
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail({"number", "name", "'('", "'-'"})


def parse(source: str) -> Expr:
    """Parse expression text into an AST."""
    return _Parser(source).parse()


# printer --------------------------------------------------------------------

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2}


def _level(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _LEVEL[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def to_source(e: Expr) -> str:
    """Render an AST as text that parses back to an equal AST."""

    def wrap(sub: Expr, min_level: int) -> str:
        text = to_source(sub)
        return f"({text})" if _level(sub) < min_level else text

    if isinstance(e, Num):
        if e.value < 0 or not math.isfinite(e.value):
            raise ValueError("literals are finite and nonnegative; use Neg")
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.operand, 3)
    if isinstance(e, Pow):
        return f"{wrap(e.base, 4)}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    lvl = _LEVEL[e.op]
    return f"{wrap(e.left, lvl)} {e.op} {wrap(e.right, lvl + 1)}"


def variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, (Neg,)):
        return variables(e.operand)
    if isinstance(e, Pow):
        return variables(e.base)
    if isinstance(e, Call):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


# evaluation -----------------------------------------------------------------

def _check(cond, message):
    if cond:
        raise DomainError(message)


def _f_log(x):
    _check(x <= 0.0, "log of a nonpositive value")
    return math.log(x)


def _f_sqrt(x):
    _check(x < 0.0, "sqrt of a negative value")
    return math.sqrt(x)


def _f_exp(x):
    try:
        return math.exp(x)
    except OverflowError as exc:
        raise DomainError("exp overflow") from exc


def _f_tan(x):
    _check(math.cos(x) == 0.0, "tan at a pole")
    return math.tan(x)


def _f_cosh(x):
    try:
        return math.cosh(x)
    except OverflowError as exc:
        raise DomainError("cosh overflow") from exc


def _f_sinh(x):
    try:
        return math.sinh(x)
    except OverflowError as exc:
        raise DomainError("sinh overflow") from exc


_SCALAR_FUNCS = {
    "sin": math.sin, "cos": math.cos, "tan": _f_tan, "exp": _f_exp, "log": _f_log,
    "sqrt": _f_sqrt, "sinh": _f_sinh, "cosh": _f_cosh, "tanh": math.tanh,
}

_JET_FUNCS = {
    "sin": jets.jet_sin, "cos": jets.jet_cos, "tan": jets.jet_tan, "exp": jets.jet_exp,
    "log": jets.jet_log, "sqrt": jets.jet_sqrt, "sinh": jets.jet_sinh,
    "cosh": jets.jet_cosh, "tanh": jets.jet_tanh,
}


def _call(name: str, x):
    if isinstance(x, Jet):
        return _JET_FUNCS[name](x)
    return _SCALAR_FUNCS[name](float(x))


def _div(a, b):
    if not isinstance(b, Jet):
        _check(b == 0.0, "division by zero")
    return a / b


def _pow(a, n):
    if isinstance(a, Jet):
        return a**n
    if n < 0:
        _check(a == 0.0, "zero to a negative power")
    try:
        return float(a) ** n
    except OverflowError as exc:
        raise DomainError("power overflow") from exc


_BINOPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
}


@lru_cache(maxsize=4096)
def compile_expr(e: Expr) -> Callable[[Binding], Scalar]:
    """Compile an AST to a closure taking a binding; works on floats and jets."""
    if isinstance(e, Num):
        v = e.value
        return lambda env: v
    if isinstance(e, Var):
        name = e.name

        def lookup(env):
            try:
                return env[name]
            except KeyError:
                raise UnknownVariable(f"variable {name!r} is not bound") from None

        return lookup
    if isinstance(e, Neg):
        f = compile_expr(e.operand)
        return lambda env: -f(env)
    if isinstance(e, Pow):
        f, n = compile_expr(e.base), e.exponent
        return lambda env: _pow(f(env), n)
    if isinstance(e, Call):
        f, name = compile_expr(e.arg), e.func
        return lambda env: _call(name, f(env))
    op = _BINOPS[e.op]
    f, g = compile_expr(e.left), compile_expr(e.right)
    return lambda env: op(f(env), g(env))


def evaluate(e: Expr, binding: Binding) -> Scalar:
    """Evaluate on whatever the binding holds (floats, jets or a mix)."""
    return compile_expr(e)(binding)


def eval_scalar(e: Expr, binding: Binding) -> float:
    """IEEE double evaluation; every variable must be bound to a real."""
    for name, v in binding.items():
        if isinstance(v, Jet):
            raise TypeError(f"variable {name!r} bound to a jet in scalar evaluation")
    out = compile_expr(e)(binding)
    if isinstance(out, float) and not math.isfinite(out):
        raise DomainError("non-finite result")
    return float(out)


def eval_jet(e: Expr, binding: Mapping[str, float], seeds, order: int) -> Jet:
    """Evaluate with exact partials up to ``order`` in the ``seeds`` variables."""
    if order not in (1, 2, 3):
        raise OrderTooHigh(f"jet order must be 1, 2 or 3 (got {order})")
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise ValueError("duplicate seed variables")
    missing = [s for s in seeds if s not in binding]
    if missing:
        raise UnknownVariable(f"seed variables not bound: {missing}")
    space = jet_space(len(seeds), order)
    env = dict(binding)
    for i, name in enumerate(seeds):
        env[name] = Jet.variable(space, i, float(binding[name]))
    out = compile_expr(e)(env)
    if not isinstance(out, Jet):
        out = Jet.constant(space, out)
    if not np.all(np.isfinite(out.coeffs)):
        raise DomainError("non-finite jet coefficients")
    return out

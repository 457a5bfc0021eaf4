"""Closed-form profile functions f(s): parsing, evaluation, symbolic derivative.

Grammar (whitespace insignificant, no implicit multiplication):

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := ("-")? power
    power  := atom ("^" factor)?
    atom   := number | "s" | "pi" | "e" | ident "(" expr ")" | "(" expr ")"

"^" is right-associative and binds tighter than unary minus, so
"-s^2" is -(s^2) and "2^-3" is 2^(-3).  Numbers are decimal with an
optional exponent part.  Function application requires parentheses.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass


class ParseError(ValueError):
    """Syntax error with the byte offset at which it was detected."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at offset {pos})")
        self.pos = pos


class EvalDomainError(ArithmeticError):
    """Evaluation left the domain (log of non-positive, division by zero, ...)."""


class DomainWarning(UserWarning):
    """Evaluation touched a non-differentiable point (kink of abs)."""


# ---------------------------------------------------------------------------
# AST nodes.  Frozen: expressions are immutable and safe to share.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    """The single independent variable s."""


@dataclass(frozen=True)
class Const:
    name: str  # "pi" or "e"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Fn:
    name: str
    arg: "Expr"


Expr = Num | Var | Const | Neg | Bin | Fn

_CONSTANTS = {"pi": math.pi, "e": math.e}

def _sign(x: float) -> float:
    if x == 0.0:
        warnings.warn("sign evaluated at 0 (kink of abs)", DomainWarning, stacklevel=2)
        return 0.0
    return math.copysign(1.0, x)

# "sign" is not part of the input grammar proper; it appears in derivatives of
# abs and is accepted back by the parser so printed derivatives round-trip.
_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "exp": math.exp,
    "log": None,   # domain-checked below
    "sqrt": None,
    "tanh": math.tanh,
    "abs": abs,
    "sign": _sign,
}

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _expect(self, ch: str) -> None:
        if self._peek() != ch:
            raise ParseError(f"expected '{ch}'", self.pos)
        self.pos += 1

    def parse(self) -> Expr:
        self._skip_ws()
        if self.pos >= len(self.text):
            raise ParseError("empty expression", self.pos)
        node = self.expr()
        self._skip_ws()
        if self.pos < len(self.text):
            raise ParseError("trailing tokens", self.pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self._peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self._peek() in ("*", "/"):
            op = self.text[self.pos]
            self.pos += 1
            node = Bin(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self._peek() == "-":
            self.pos += 1
            return Neg(self.power())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self._peek() == "^":
            self.pos += 1
            return Bin("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        ch = self._peek()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self._expect(")")
            return node
        m = _NUMBER.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return Num(float(m.group()))
        m = _IDENT.match(self.text, self.pos)
        if m:
            name = m.group()
            start = self.pos
            self.pos = m.end()
            if name == "s":
                return Var()
            if name in _CONSTANTS:
                return Const(name)
            if name in _FUNCTIONS:
                if self._peek() != "(":
                    raise ParseError(f"function '{name}' needs a parenthesized argument", self.pos)
                self.pos += 1
                self._skip_ws()
                if self._peek() == ")":
                    raise ParseError("empty argument", self.pos)
                arg = self.expr()
                self._expect(")")
                return Fn(name, arg)
            raise ParseError(f"unknown identifier '{name}'", start)
        if ch == "":
            raise ParseError("unexpected end of input", self.pos)
        raise ParseError(f"unexpected character '{ch}'", self.pos)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises ParseError (carrying a byte offset) on unbalanced parentheses,
    unknown identifiers, empty arguments or trailing tokens.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _pow(base: float, exponent: float) -> float:
    if base == 0.0 and exponent < 0:
        raise EvalDomainError("0 raised to a negative power")
    if base < 0.0 and exponent != math.floor(exponent):
        raise EvalDomainError("negative base with fractional exponent")
    try:
        return math.pow(base, exponent)
    except OverflowError as exc:
        raise EvalDomainError(str(exc)) from exc


def evaluate(f: Expr, s: float) -> float:
    """IEEE double evaluation of the tree at the point s."""
    match f:
        case Num(value=v):
            return v
        case Var():
            return s
        case Const(name=name):
            return _CONSTANTS[name]
        case Neg(arg=a):
            return -evaluate(a, s)
        case Bin(op=op, left=l, right=r):
            a = evaluate(l, s)
            b = evaluate(r, s)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                if b == 0.0:
                    raise EvalDomainError("division by zero")
                return a / b
            return _pow(a, b)
        case Fn(name=name, arg=arg):
            x = evaluate(arg, s)
            if name == "log":
                if x <= 0.0:
                    raise EvalDomainError(f"log of non-positive value {x}")
                return math.log(x)
            if name == "sqrt":
                if x < 0.0:
                    raise EvalDomainError(f"sqrt of negative value {x}")
                return math.sqrt(x)
            try:
                return _FUNCTIONS[name](x)
            except OverflowError as exc:
                raise EvalDomainError(str(exc)) from exc
    raise TypeError(f"not an expression node: {f!r}")


# ---------------------------------------------------------------------------
# Symbolic derivative
# ---------------------------------------------------------------------------

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _mul(a: Expr, b: Expr) -> Expr:
    if a == _ZERO or b == _ZERO:
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    return Bin("*", a, b)


def _add(a: Expr, b: Expr) -> Expr:
    if a == _ZERO:
        return b
    if b == _ZERO:
        return a
    return Bin("+", a, b)


_CHAIN = {
    "sin": lambda u: Fn("cos", u),
    "cos": lambda u: Neg(Fn("sin", u)),
    "sinh": lambda u: Fn("cosh", u),
    "cosh": lambda u: Fn("sinh", u),
    "exp": lambda u: Fn("exp", u),
    "log": lambda u: Bin("/", _ONE, u),
    "sqrt": lambda u: Bin("/", _ONE, _mul(Num(2.0), Fn("sqrt", u))),
    "tanh": lambda u: Bin("-", _ONE, Bin("^", Fn("tanh", u), Num(2.0))),
    "abs": lambda u: Fn("sign", u),
    "sign": lambda u: _ZERO,
}


def differentiate(f: Expr) -> Expr:
    """Exact symbolic derivative d/ds.

    abs differentiates to sign, which warns (DomainWarning) rather than
    raising when later evaluated at the kink.
    """
    match f:
        case Num() | Const():
            return _ZERO
        case Var():
            return _ONE
        case Neg(arg=a):
            da = differentiate(a)
            return _ZERO if da == _ZERO else Neg(da)
        case Bin(op="+", left=l, right=r):
            return _add(differentiate(l), differentiate(r))
        case Bin(op="-", left=l, right=r):
            dl, dr = differentiate(l), differentiate(r)
            if dr == _ZERO:
                return dl
            if dl == _ZERO:
                return Neg(dr)
            return Bin("-", dl, dr)
        case Bin(op="*", left=l, right=r):
            return _add(_mul(differentiate(l), r), _mul(l, differentiate(r)))
        case Bin(op="/", left=l, right=r):
            num = Bin("-", _mul(differentiate(l), r), _mul(l, differentiate(r)))
            return Bin("/", num, Bin("^", r, Num(2.0)))
        case Bin(op="^", left=l, right=r):
            if isinstance(r, Num):
                # power rule keeps negative bases legal
                if r.value == 0.0:
                    return _ZERO
                down = Bin("^", l, Num(r.value - 1.0)) if r.value != 1.0 else _ONE
                return _mul(_mul(Num(r.value), down), differentiate(l))
            # general case via a^b = exp(b log a)
            term1 = _mul(differentiate(r), Fn("log", l))
            term2 = _mul(r, Bin("/", differentiate(l), l))
            return _mul(Bin("^", l, r), _add(term1, term2))
        case Fn(name=name, arg=arg):
            return _mul(_CHAIN[name](arg), differentiate(arg))
    raise TypeError(f"not an expression node: {f!r}")


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def to_text(f: Expr) -> str:
    """Fully parenthesized text form; re-parses to an evaluation-identical tree."""
    match f:
        case Num(value=v):
            return repr(v) if v >= 0 else f"(-{repr(-v)})"
        case Var():
            return "s"
        case Const(name=name):
            return name
        case Neg(arg=a):
            return f"(-{to_text(a)})"
        case Bin(op=op, left=l, right=r):
            return f"({to_text(l)} {op} {to_text(r)})"
        case Fn(name=name, arg=arg):
            return f"{name}({to_text(arg)})"
    raise TypeError(f"not an expression node: {f!r}")


def as_callable(f: Expr):
    """Bind an expression to a plain float -> float function."""
    return lambda s: evaluate(f, s)

"""Expression language for metrics ``F(x1, x2, y1, y2)`` and factors ``phi``.

Grammar (whitespace between tokens is ignored)::

    expr    := term   (("+" | "-") term)*
    term    := unary  (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"
    NUMBER  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
             | "." digits [exponent]
    NAME    := [A-Za-z_][A-Za-z_0-9]*

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``; ``^`` is
right-associative, ``+ - * /`` are left-associative.  Function names are
``sqrt exp ln sin cos abs``.  Conditions used for cone domains are
``expr OP expr`` with ``OP`` one of ``> >= < <= !=``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

from . import jet as J
from .errors import DomainError, InputError
from .jet import Jet

COORDINATES = ("x1", "x2", "y1", "y2")
FUNCTIONS = ("sqrt", "exp", "ln", "sin", "cos", "abs")


class DSLSyntaxError(InputError, SyntaxError):
    """Parse failure at ``offset`` with the set of acceptable tokens."""

    def __init__(self, message, source, offset, expected=()):
        self.source = source
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        caret = " " * offset + "^"
        super().__init__(f"{message} at offset {offset}{exp}\n  {source}\n  {caret}")


class UnknownIdentifier(InputError, NameError):
    def __init__(self, name, source=None, offset=None):
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"unknown identifier {name!r}{where}")
        # NameError.__init__ resets .name, so assign afterwards
        self.name = name
        self.offset = offset


# -- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Sym, Neg, BinOp, Call]


@dataclass(frozen=True)
class Condition:
    op: str
    left: Expr
    right: Expr

    def __str__(self):
        return f"{to_source(self.left)} {self.op} {to_source(self.right)}"


def free_symbols(e: Expr) -> set[str]:
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return free_symbols(e.arg)
    if isinstance(e, Call):
        return free_symbols(e.arg)
    return free_symbols(e.left) | free_symbols(e.right)


# -- tokenizer ----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<cmp>>=|<=|!=|>|<)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(source):
    pos = 0
    tokens = []
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


# -- parser -------------------------------------------------------------------

_ATOM_START = ("NUMBER", "NAME", "(", "-")
_BINARY = {"+": 10, "-": 10, "*": 20, "/": 20}


class _Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        kind, text, pos = self.peek()
        what = "end of input" if kind == "end" else repr(text)
        raise DSLSyntaxError(f"unexpected {what}", self.source, pos, expected)

    def expect(self, text):
        kind, t, pos = self.peek()
        if t != text or kind == "end":
            self.fail([text])
        self.advance()

    def expression(self, min_prec=0):
        left = self.unary()
        while True:
            kind, text, _ = self.peek()
            prec = _BINARY.get(text) if kind == "op" else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self.expression(prec + 1)
            left = BinOp(text, left, right)

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(text, self.source, pos)
                self.advance()
                arg = self.expression()
                self.expect(")")
                return Call(text, arg)
            if text in FUNCTIONS:
                self.fail(["("])
            return Sym(text)
        if kind == "op" and text == "(":
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        self.fail(_ATOM_START)

    def finish(self):
        kind, _, _ = self.peek()
        if kind != "end":
            self.fail(["+", "-", "*", "/", "^", "end of input"])


def parse(source: str, names=None) -> Expr:
    """Parse an expression.

    If ``names`` is given, every free symbol must be a coordinate or in
    ``names``; otherwise :class:`UnknownIdentifier` is raised.
    """
    if not source or not source.strip():
        raise DSLSyntaxError("empty expression", source or "", 0, _ATOM_START)
    p = _Parser(source)
    e = p.expression()
    p.finish()
    if names is not None:
        _check_names(e, set(COORDINATES) | set(names), source)
    return e


def parse_condition(source: str, names=None) -> Condition:
    if not source or not source.strip():
        raise DSLSyntaxError("empty condition", source or "", 0, _ATOM_START)
    p = _Parser(source)
    left = p.expression()
    kind, text, _ = p.peek()
    if kind != "cmp":
        p.fail([">", ">=", "<", "<=", "!="])
    p.advance()
    right = p.expression()
    p.finish()
    cond = Condition(text, left, right)
    if names is not None:
        allowed = set(COORDINATES) | set(names)
        _check_names(left, allowed, source)
        _check_names(right, allowed, source)
    return cond


def _check_names(e, allowed, source):
    for name in sorted(free_symbols(e)):
        if name not in allowed:
            m = re.search(rf"\b{re.escape(name)}\b", source)
            raise UnknownIdentifier(name, source, m.start() if m else None)


# -- printer ------------------------------------------------------------------

_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "neg": 30, "^": 40}


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_source(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_source(e)) == e``."""
    return _show(e)


def _show(e):
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({_show(e.arg)})"
    if isinstance(e, Neg):
        inner = _show(e.arg)
        # the operand of unary minus parses as unary, i.e. a power or a Neg
        if _prec(e.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    op = e.op
    p = _PREC[op]
    left, right = _show(e.left), _show(e.right)
    if op == "^":
        if _prec(e.left) <= p or isinstance(e.left, Neg):
            left = f"({left})"
        if _prec(e.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {op} {right}"


def _prec(e):
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return 100


# -- evaluation ---------------------------------------------------------------

_JET_FUNCS = {
    "sqrt": J.sqrt,
    "exp": J.exp,
    "ln": J.log,
    "sin": J.sin,
    "cos": J.cos,
    "abs": J.fabs,
}


def _real_sqrt(v):
    if v < 0:
        raise DomainError(f"sqrt of negative number {v}")
    return math.sqrt(v)


def _real_ln(v):
    if v <= 0:
        raise DomainError(f"ln of non-positive number {v}")
    return math.log(v)


_REAL_FUNCS = {
    "sqrt": _real_sqrt,
    "exp": math.exp,
    "ln": _real_ln,
    "sin": math.sin,
    "cos": math.cos,
    "abs": abs,
}


def _pow_real(a, b):
    if a == 0 and b < 0:
        raise DomainError("zero raised to a negative power")
    if a < 0 and not float(b).is_integer():
        raise DomainError(f"negative base {a} raised to non-integer power {b}")
    return a ** b


def _eval(e, env, funcs, pow_fn):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env, funcs, pow_fn)
    if isinstance(e, Call):
        arg = _eval(e.arg, env, funcs, pow_fn)
        try:
            return funcs[e.func](arg)
        except DomainError as err:
            if err.subexpr is None:
                raise DomainError(f"{err} in {to_source(e)}", to_source(e)) from None
            raise
    a = _eval(e.left, env, funcs, pow_fn)
    if e.op == "^":
        b = _eval(e.right, env, funcs, pow_fn)
        try:
            return pow_fn(a, b)
        except DomainError as err:
            raise DomainError(f"{err} in {to_source(e)}", to_source(e)) from None
    b = _eval(e.right, env, funcs, pow_fn)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if _is_zero(b):
        raise DomainError(f"division by zero in {to_source(e)}", to_source(e))
    try:
        return a / b
    except DomainError as err:
        raise DomainError(f"{err} in {to_source(e)}", to_source(e)) from None


def _is_zero(v):
    if isinstance(v, Jet):
        return v.value == 0.0
    return v == 0


def _pow_jet(a, b):
    if isinstance(b, Jet):
        if isinstance(a, Jet):
            return a ** b
        return b.__rpow__(a)
    if isinstance(a, Jet):
        return J.power(a, b)
    return _pow_real(a, b)


@dataclass(frozen=True)
class FieldDef:
    """A named scalar ``expr`` with parameter values and helper bindings.

    ``lets`` are ``(name, expr)`` pairs evaluated in order; each may use the
    coordinates, the parameters and earlier bindings.
    """

    name: str
    expr: Expr
    params: dict = field(default_factory=dict, hash=False, compare=True)
    lets: tuple = ()

    def __post_init__(self):
        allowed = set(COORDINATES) | set(self.params)
        for lname, lexpr in self.lets:
            _check_names(lexpr, allowed, to_source(lexpr))
            allowed.add(lname)
        _check_names(self.expr, allowed, to_source(self.expr))

    @classmethod
    def from_source(cls, name, source, params=None, lets=()):
        params = dict(params or {})
        parsed_lets = []
        known = set(params)
        for lname, lsrc in (lets.items() if isinstance(lets, dict) else lets):
            lexpr = parse(lsrc, known) if isinstance(lsrc, str) else lsrc
            parsed_lets.append((lname, lexpr))
            known.add(lname)
        return cls(name, parse(source, known), params, tuple(parsed_lets))

    def _env(self, coords, funcs, pow_fn):
        env = dict(zip(COORDINATES, coords))
        env.update(self.params)
        for lname, lexpr in self.lets:
            env[lname] = _eval(lexpr, env, funcs, pow_fn)
        return env

    def __call__(self, point, degree: int) -> Jet:
        return evaluate(self, point, degree)

    def real(self, point) -> float:
        """Plain floating-point value at ``point``."""
        env = self._env(tuple(float(v) for v in point), _REAL_FUNCS, _pow_real)
        return float(_eval(self.expr, env, _REAL_FUNCS, _pow_real))

    @property
    def source(self) -> str:
        return to_source(self.expr)


def evaluate(fdef: FieldDef, point, degree: int) -> Jet:
    """Degree-``degree`` jet of ``fdef`` about ``point``."""
    point = tuple(float(v) for v in point)
    coords = J.coordinates(point, degree)
    env = fdef._env(coords, _JET_FUNCS, _pow_jet)
    out = _eval(fdef.expr, env, _JET_FUNCS, _pow_jet)
    if not isinstance(out, Jet):
        out = Jet.constant(out, point, degree)
    return out


def check_condition(cond: Condition, point, params=None, lets=()) -> bool:
    """Evaluate a domain inequality in plain floating point."""
    fd_left = FieldDef("lhs", cond.left, dict(params or {}), tuple(lets))
    fd_right = FieldDef("rhs", cond.right, dict(params or {}), tuple(lets))
    a, b = fd_left.real(point), fd_right.real(point)
    return {
        ">": a > b,
        ">=": a >= b,
        "<": a < b,
        "<=": a <= b,
        "!=": a != b,
    }[cond.op]


def homogeneity_defect(fdef: FieldDef, point, r: float, lambdas=(0.5, 2.0, 3.0)) -> float:
    """Largest relative violation of ``f(x, l*y) = l**r * f(x, y)``."""
    x1, x2, y1, y2 = point
    base = fdef.real(point)
    worst = 0.0
    for lam in lambdas:
        scaled = fdef.real((x1, x2, lam * y1, lam * y2))
        expected = lam ** r * base
        worst = max(worst, abs(scaled - expected) / max(abs(expected), 1e-300))
    return worst

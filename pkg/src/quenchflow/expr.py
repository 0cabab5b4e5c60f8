"""Small expression language for the forcing ``f(x)`` and the initial profile ``g(x)``.

Grammar (whitespace is ignored)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' integer)*
    integer := ['-'] INT | '(' ['-'] INT ')'
    atom    := NUMBER | 'x' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
    FUNC    := 'sin' | 'cos' | 'exp'

Expressions are immutable trees of frozen dataclasses.  They can be evaluated
on scalars or numpy arrays and differentiated exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Pi", "Neg", "BinOp", "Pow", "Func",
    "ExprError", "ParseError", "UnexpectedToken", "UnexpectedEnd",
    "UnknownIdentifier", "EvaluationError", "DivisionByZero", "NonFiniteResult",
    "parse_expr", "eval_expr", "eval_array", "differentiate", "to_string",
    "AssumptionReport", "validate_assumptions",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnexpectedToken(ParseError):
    pass


class UnexpectedEnd(ParseError):
    pass


class UnknownIdentifier(ParseError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class EvaluationError(ExprError):
    def __init__(self, message: str, x=None, index=None):
        where = ""
        if index is not None:
            where = f" at node {index}"
        if x is not None:
            where += f" (x={x!r})"
        super().__init__(message + where)
        self.x = x
        self.index = index


class DivisionByZero(EvaluationError):
    pass


class NonFiniteResult(EvaluationError):
    pass


# --------------------------------------------------------------------------
# tree


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Pi:
    pass


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
class Func:
    name: str  # sin, cos, exp
    arg: "Expr"


Expr = Union[Const, Var, Pi, Neg, BinOp, Pow, Func]

FUNCTIONS = ("sin", "cos", "exp")

# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Token:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            pos = len(src)
            break
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise UnexpectedToken(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), start))
        pos = m.end()
    tokens.append(_Token("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def fail(self, what: str):
        t = self.tok
        if t.kind == "end":
            raise UnexpectedEnd(f"unexpected end of input, expected {what}", t.offset)
        raise UnexpectedToken(f"unexpected token {t.text!r}, expected {what}", t.offset)

    def expect(self, text: str):
        if self.tok.kind == "op" and self.tok.text == text:
            return self.advance()
        self.fail(repr(text))

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail("operator or end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        while self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            base = Pow(base, self.integer())
        return base

    def integer(self) -> int:
        paren = False
        if self.tok.kind == "op" and self.tok.text == "(":
            self.advance()
            paren = True
        sign = 1
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            sign = -1
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            self.fail("integer exponent")
        self.advance()
        if paren:
            self.expect(")")
        return sign * int(t.text)

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(float(t.text))
        if t.kind == "name":
            self.advance()
            if t.text == "x":
                return Var()
            if t.text == "pi":
                return Pi()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(t.text, arg)
            raise UnknownIdentifier(t.text, t.offset)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.fail("number, identifier or '('")


def parse_expr(src: str) -> Expr:
    """Parse ``src`` into an expression tree.

    Raises
    ------
    UnexpectedToken, UnexpectedEnd
        With the byte offset of the offending position.
    UnknownIdentifier
        For any name outside ``x, pi, sin, cos, exp``.
    """
    if not src or not src.strip():
        raise UnexpectedEnd("empty expression", len(src))
    return _Parser(src).parse()


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Render with the minimal parentheses that reparse to the same tree."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        s = to_string(e.operand)
        if _prec(e.operand) < _PREC_NEG:
            s = f"({s})"
        return "-" + s
    if isinstance(e, Pow):
        s = to_string(e.base)
        if _prec(e.base) < _PREC_POW:
            s = f"({s})"
        k = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        return f"{s}^{k}"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        ls, rs = to_string(e.left), to_string(e.right)
        if _prec(e.left) < p:
            ls = f"({ls})"
        if _prec(e.right) <= p:
            rs = f"({rs})"
        return f"{ls}{e.op}{rs}"
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# evaluation

_UFUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def _eval(e: Expr, x):
    if isinstance(e, Const):
        return e.value + 0.0 * x
    if isinstance(e, Var):
        return x
    if isinstance(e, Pi):
        return math.pi + 0.0 * x
    if isinstance(e, Neg):
        return -_eval(e.operand, x)
    if isinstance(e, Func):
        return _UFUNCS[e.name](_eval(e.arg, x))
    if isinstance(e, Pow):
        b = _eval(e.base, x)
        if e.exponent < 0:
            _check_nonzero(b, x)
            return 1.0 / b ** (-e.exponent)
        return b ** e.exponent
    if isinstance(e, BinOp):
        a = _eval(e.left, x)
        b = _eval(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        _check_nonzero(b, x)
        return a / b
    raise TypeError(f"not an expression: {e!r}")


def _check_nonzero(b, x):
    zero = np.asarray(b) == 0.0
    if zero.any():
        if np.ndim(zero) == 0:
            raise DivisionByZero("division by zero", x=float(x))
        j = int(np.flatnonzero(zero)[0])
        raise DivisionByZero("division by zero", x=float(np.asarray(x)[j]), index=j)


def eval_expr(e: Expr, x: float) -> float:
    """Evaluate at a single point; errors instead of returning inf/nan."""
    with np.errstate(all="ignore"):
        v = float(_eval(e, np.float64(x)))
    if not math.isfinite(v):
        raise NonFiniteResult("non-finite result", x=float(x))
    return v


def eval_array(e: Expr, xs) -> np.ndarray:
    """Vectorised evaluation over an array of points.

    Errors carry the index of the first offending point.
    """
    xs = np.asarray(xs, dtype=float)
    with np.errstate(all="ignore"):
        v = np.broadcast_to(_eval(e, xs), xs.shape).astype(float)
    bad = ~np.isfinite(v)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise NonFiniteResult("non-finite result", x=float(xs.flat[j]), index=j)
    return v


# --------------------------------------------------------------------------
# differentiation

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(e, v=None):
    return isinstance(e, Const) and (v is None or e.value == v)


def _add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return BinOp("*", a, b)


def differentiate(e: Expr) -> Expr:
    """Exact derivative with respect to ``x`` (light zero/one folding only)."""
    if isinstance(e, (Const, Pi)):
        return _ZERO
    if isinstance(e, Var):
        return _ONE
    if isinstance(e, Neg):
        d = differentiate(e.operand)
        return _ZERO if _is_const(d, 0.0) else Neg(d)
    if isinstance(e, Func):
        du = differentiate(e.arg)
        if e.name == "sin":
            outer = Func("cos", e.arg)
        elif e.name == "cos":
            outer = Neg(Func("sin", e.arg))
        else:
            outer = e
        return _mul(outer, du)
    if isinstance(e, Pow):
        k = e.exponent
        if k == 0:
            return _ZERO
        du = differentiate(e.base)
        inner = e.base if k == 2 else Pow(e.base, k - 1)
        if k == 1:
            inner = _ONE
        return _mul(_mul(Const(float(k)), inner), du)
    if isinstance(e, BinOp):
        da, db = differentiate(e.left), differentiate(e.right)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, e.right), _mul(e.left, db))
        # quotient rule: (a'b - ab') / b^2
        num = _sub(_mul(da, e.right), _mul(e.left, db))
        if _is_const(num, 0.0):
            return _ZERO
        return BinOp("/", num, Pow(e.right, 2))
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# standing assumptions on (f, g)


@dataclass
class AssumptionReport:
    """Outcome of the sampled checks on the forcing ``f`` and initial profile ``g``.

    ``a1_*`` are positivity and 1-periodicity; ``a2_*`` are reflection symmetry
    about ``x = 1/2``, monotonicity on ``[0, 1/2]`` and the strict gap
    ``g(0) < g(1/2)``.
    """

    a1_positive_f: bool
    a1_positive_g: bool
    a1_periodic_f: bool
    a1_periodic_g: bool
    a2_symmetry_f: bool
    a2_symmetry_g: bool
    a2_monotone_f: bool
    a2_monotone_g: bool
    a2_strict_gap: bool
    worst_violation: float
    worst_location: float
    worst_check: str
    samples: int
    tol: float
    violations: dict = field(default_factory=dict)

    @property
    def a1(self) -> bool:
        return (self.a1_positive_f and self.a1_positive_g
                and self.a1_periodic_f and self.a1_periodic_g)

    @property
    def a2(self) -> bool:
        return (self.a2_symmetry_f and self.a2_symmetry_g and self.a2_monotone_f
                and self.a2_monotone_g and self.a2_strict_gap)

    def summary(self) -> str:
        lines = [f"samples={self.samples} tol={self.tol:g}"]
        for name in ("a1_positive_f", "a1_positive_g", "a1_periodic_f", "a1_periodic_g",
                     "a2_symmetry_f", "a2_symmetry_g", "a2_monotone_f", "a2_monotone_g",
                     "a2_strict_gap"):
            lines.append(f"  {name:15s} {'pass' if getattr(self, name) else 'FAIL'}")
        lines.append(f"  A1 {'pass' if self.a1 else 'FAIL'}  A2 {'pass' if self.a2 else 'FAIL'}")
        if self.worst_violation > 0:
            lines.append(f"  worst violation {self.worst_violation:.3e} in {self.worst_check}"
                         f" at x={self.worst_location:.6f}")
        return "\n".join(lines)


def validate_assumptions(f: Expr, g: Expr, samples: int = 10_000,
                         tol: float = 1e-10) -> AssumptionReport:
    """Check positivity, periodicity, symmetry and monotonicity on a sample grid.

    Tolerance-governed predicates (periodicity, symmetry, sign of the
    derivative) pass when the violation is at most ``tol``.  Positivity and the
    strict gap are exact comparisons, so loosening ``tol`` can only turn
    failures into passes.
    """
    if samples < 16:
        raise ValueError("samples must be >= 16")
    xs = np.arange(samples + 1) / samples  # includes 0, 1/2 (even samples) and 1
    half = xs[xs <= 0.5]
    viol = {}

    def record(name, amount, where):
        viol[name] = (float(amount), float(where))

    results = {}
    for label, h in (("f", f), ("g", g)):
        v = eval_array(h, xs)
        j = int(np.argmin(v))
        record(f"a1_positive_{label}", max(0.0, -v[j]), xs[j])
        results[f"a1_positive_{label}"] = bool(v[j] > 0.0)

        shifted = eval_array(h, xs + 1.0)
        d = np.abs(v - shifted)
        j = int(np.argmax(d))
        record(f"a1_periodic_{label}", d[j], xs[j])
        results[f"a1_periodic_{label}"] = bool(d[j] <= tol)

        mirrored = eval_array(h, 1.0 - xs)
        d = np.abs(v - mirrored)
        j = int(np.argmax(d))
        record(f"a2_symmetry_{label}", d[j], xs[j])
        results[f"a2_symmetry_{label}"] = bool(d[j] <= tol)

        dv = eval_array(differentiate(h), half)
        j = int(np.argmin(dv))
        record(f"a2_monotone_{label}", max(0.0, -dv[j]), half[j])
        results[f"a2_monotone_{label}"] = bool(dv[j] >= -tol)

    g0, ghalf = eval_expr(g, 0.0), eval_expr(g, 0.5)
    results["a2_strict_gap"] = bool(g0 < ghalf)
    record("a2_strict_gap", max(0.0, g0 - ghalf), 0.0)

    failing = {k: viol[k] for k, ok in results.items() if not ok}
    pool = failing or viol
    worst_check = max(pool, key=lambda k: pool[k][0])
    amount, where = pool[worst_check]
    if not failing:
        amount, where, worst_check = 0.0, 0.0, ""
    return AssumptionReport(**results, worst_violation=amount, worst_location=where,
                            worst_check=worst_check, samples=samples, tol=tol,
                            violations=viol)

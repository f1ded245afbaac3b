"""Univariate expression trees: parsing, rendering, differentiation, simplification.

Expressions are immutable trees of :class:`Expr` nodes.  Definite integrals
with expression limits are first-class nodes, so ratios such as
``int(p(t), t, 0, x) / int(q(t), t, 0, x)`` can be analysed directly.

>>> e = parse("2*x*exp(x^2 - x^4)")
>>> render(e)
'2*x*exp(x^2 - x^4)'
>>> render(differentiate(parse("int(exp(-t^2), t, 0, x)"), "x"))
'exp(-x^2)'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Integral",
    "ParseError",
    "FUNCTIONS",
    "parse",
    "render",
    "differentiate",
    "simplify",
    "substitute",
    "free_vars",
    "walk",
    "as_expr",
]

FUNCTIONS = frozenset(
    {"exp", "log", "sin", "cos", "tan", "sec", "sqrt", "abs", "erf", "sign"}
)
CONSTANTS = {"pi": math.pi}
BINARY_OPS = ("+", "-", "*", "/", "^")


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return BinOp("+", self, as_expr(other))

    def __radd__(self, other):
        return BinOp("+", as_expr(other), self)

    def __sub__(self, other):
        return BinOp("-", self, as_expr(other))

    def __rsub__(self, other):
        return BinOp("-", as_expr(other), self)

    def __mul__(self, other):
        return BinOp("*", self, as_expr(other))

    def __rmul__(self, other):
        return BinOp("*", as_expr(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return BinOp("/", as_expr(other), self)

    def __pow__(self, other):
        return BinOp("^", self, as_expr(other))

    def __rpow__(self, other):
        return BinOp("^", as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return render(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v):
            raise ValueError(f"constants must be finite, got {self.value!r}")
        # normalise -0.0 so that structural equality is not sign-of-zero sensitive
        object.__setattr__(self, "value", v + 0.0)


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    child: Expr


@dataclass(frozen=True, eq=True, repr=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINARY_OPS:
            raise ValueError(f"unknown binary operator {self.op!r}")


@dataclass(frozen=True, eq=True, repr=True)
class Call(Expr):
    fn: str
    arg: Expr

    def __post_init__(self):
        if self.fn not in FUNCTIONS:
            raise ValueError(f"unknown function {self.fn!r}")


@dataclass(frozen=True, eq=True, repr=True)
class Integral(Expr):
    """Definite integral of ``integrand`` over ``var`` from ``lower`` to ``upper``."""

    integrand: Expr
    var: str
    lower: Expr
    upper: Expr

    def __post_init__(self):
        if any(isinstance(n, Integral) for n in walk(self.integrand)):
            raise ValueError("integrands may not contain nested integrals")


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    if isinstance(value, str):
        return parse(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def walk(e: Expr) -> Iterator[Expr]:
    """Pre-order traversal of every node, integrand and limits included."""
    yield e
    if isinstance(e, Neg):
        yield from walk(e.child)
    elif isinstance(e, BinOp):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Call):
        yield from walk(e.arg)
    elif isinstance(e, Integral):
        yield from walk(e.integrand)
        yield from walk(e.lower)
        yield from walk(e.upper)


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Neg):
        return free_vars(e.child)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Call):
        return free_vars(e.arg)
    if isinstance(e, Integral):
        inner = free_vars(e.integrand) - {e.var}
        return inner | free_vars(e.lower) | free_vars(e.upper)
    raise TypeError(e)


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace free occurrences of ``name`` by ``replacement``."""
    if isinstance(e, Var):
        return replacement if e.name == name else e
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.child, name, replacement))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, name, replacement),
                     substitute(e.right, name, replacement))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, name, replacement))
    if isinstance(e, Integral):
        integrand = e.integrand
        if e.var != name:
            if e.var in free_vars(replacement):
                raise ValueError(f"substitution would capture bound variable {e.var!r}")
            integrand = substitute(integrand, name, replacement)
        return Integral(integrand, e.var, substitute(e.lower, name, replacement),
                        substitute(e.upper, name, replacement))
    raise TypeError(e)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class ParseError(ValueError):
    """Malformed expression text.

    ``kind`` is one of ``unexpected-token``, ``unbalanced-paren``,
    ``unknown-function`` or ``arity``; ``position`` is a character offset.
    """

    KINDS = ("unexpected-token", "unbalanced-paren", "unknown-function", "arity")

    def __init__(self, position: int, kind: str, message: str):
        assert kind in self.KINDS
        self.position = position
        self.kind = kind
        self.message = message
        super().__init__(f"{message} (at position {position})")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(pos, "unexpected-token", f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            tokens.append(_Token(kind, "^" if tok == "**" else tok, pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, var: str):
        self.text = text
        self.var = var
        self.tokens = _tokenize(text)
        self.i = 0
        self.depth = 0
        # stack of (bound-variable placeholder, list of identifier uses) for integrands
        self.integrand_scopes: list[list[tuple[str, int]]] = []

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.tok
        if tok.text == text:
            return self.advance()
        if text == ")":
            raise ParseError(tok.pos, "unbalanced-paren", "missing closing parenthesis")
        raise ParseError(tok.pos, "unexpected-token", f"expected {text!r}, found {tok.text or 'end of input'!r}")

    def parse(self) -> Expr:
        e = self.sum()
        tok = self.tok
        if tok.kind != "end":
            if tok.text == ")":
                raise ParseError(tok.pos, "unbalanced-paren", "unmatched closing parenthesis")
            raise ParseError(tok.pos, "unexpected-token", f"unexpected {tok.text!r}")
        return e

    def sum(self) -> Expr:
        left = self.product()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            left = BinOp(op, left, self.product())
        return left

    def product(self) -> Expr:
        left = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.text == "-":
            self.advance()
            child = self.unary()
            if isinstance(child, Const):
                return Const(-child.value)
            return Neg(child)
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.text == "(":
            self.advance()
            e = self.sum()
            self.expect(")")
            return e
        if tok.kind == "ident":
            self.advance()
            if self.tok.text == "(":
                return self.call(tok)
            return self.identifier(tok)
        if tok.kind == "end":
            raise ParseError(tok.pos, "unexpected-token", "unexpected end of input")
        if tok.text == ")":
            raise ParseError(tok.pos, "unbalanced-paren", "unexpected closing parenthesis")
        raise ParseError(tok.pos, "unexpected-token", f"unexpected {tok.text!r}")

    def identifier(self, tok: _Token) -> Expr:
        name = tok.text
        if name in CONSTANTS:
            return Const(CONSTANTS[name])
        if self.integrand_scopes:
            # validated once the bound variable name is known
            self.integrand_scopes[-1].append((name, tok.pos))
            return Var(name)
        if name == self.var:
            return Var(name)
        if name in FUNCTIONS or name == "int":
            raise ParseError(tok.pos, "arity", f"function {name!r} used without arguments")
        raise ParseError(tok.pos, "unknown-function", f"unknown identifier {name!r}")

    def arguments(self) -> list[tuple[Expr, int]]:
        self.expect("(")
        args = []
        while True:
            pos = self.tok.pos
            args.append((self.sum(), pos))
            if self.tok.text == ",":
                self.advance()
                continue
            self.expect(")")
            return args

    def call(self, name_tok: _Token) -> Expr:
        name = name_tok.text
        if name == "int":
            return self.integral(name_tok)
        if name not in FUNCTIONS:
            raise ParseError(name_tok.pos, "unknown-function", f"unknown function {name!r}")
        args = self.arguments()
        if len(args) != 1:
            raise ParseError(name_tok.pos, "arity", f"{name} takes 1 argument, got {len(args)}")
        return Call(name, args[0][0])

    def integral(self, name_tok: _Token) -> Expr:
        if self.integrand_scopes:
            raise ParseError(name_tok.pos, "unexpected-token", "nested integrals are not supported")
        self.expect("(")
        scope: list[tuple[str, int]] = []
        self.integrand_scopes.append(scope)
        try:
            integrand = self.sum()
        finally:
            self.integrand_scopes.pop()
        if self.tok.text != ",":
            if self.tok.text == ")":
                raise ParseError(name_tok.pos, "arity", "int takes 4 arguments: int(integrand, t, lower, upper)")
            self.expect(",")
        self.advance()
        var_tok = self.tok
        if var_tok.kind != "ident" or var_tok.text in FUNCTIONS or var_tok.text in CONSTANTS:
            raise ParseError(var_tok.pos, "unexpected-token", "expected the integration variable name")
        if var_tok.text == self.var:
            raise ParseError(var_tok.pos, "unexpected-token",
                             f"integration variable must differ from {self.var!r}")
        self.advance()
        for ident, pos in scope:
            if ident != var_tok.text:
                raise ParseError(pos, "unknown-function",
                                 f"unknown identifier {ident!r} in integrand over {var_tok.text!r}")
        rest = []
        while self.tok.text == ",":
            self.advance()
            rest.append(self.sum())
        self.expect(")")
        if len(rest) != 2:
            raise ParseError(name_tok.pos, "arity", "int takes 4 arguments: int(integrand, t, lower, upper)")
        return Integral(integrand, var_tok.text, rest[0], rest[1])


def parse(text: str, var: str = "x") -> Expr:
    """Parse infix text into an expression in the single variable ``var``.

    Precedence from loosest to tightest: ``+ -``, ``* /``, unary minus, ``^``
    (right-associative).  Integrals are written ``int(integrand, t, lower, upper)``.
    A leading minus on a numeric literal is folded into the constant.
    """
    if not isinstance(text, str):
        raise TypeError("parse expects a string")
    return _Parser(text, var).parse()


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_SUM, _PRODUCT, _UNARY, _POWER, _ATOM = 1, 2, 3, 4, 5
_PREC = {"+": _SUM, "-": _SUM, "*": _PRODUCT, "/": _PRODUCT, "^": _POWER}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _UNARY
    if isinstance(e, Const) and (e.value < 0 or _format_number(e.value).startswith("-")):
        return _UNARY
    return _ATOM


def _format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def render(e: Expr) -> str:
    """Render to parseable infix text; ``parse(render(e))`` rebuilds ``e``."""
    if isinstance(e, Const):
        return _format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.child, _prec(e.child) < _UNARY)
    if isinstance(e, Call):
        return f"{e.fn}({render(e.arg)})"
    if isinstance(e, Integral):
        return f"int({render(e.integrand)}, {e.var}, {render(e.lower)}, {render(e.upper)})"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        if e.op == "^":
            left = _wrap(e.left, _prec(e.left) <= _POWER)
            right = _wrap(e.right, _prec(e.right) < _POWER)
            return f"{left}^{right}"
        left = _wrap(e.left, _prec(e.left) < p)
        right = _wrap(e.right, _prec(e.right) <= p)
        if p == _SUM:
            return f"{left} {e.op} {right}"
        return f"{left}{e.op}{right}"
    raise TypeError(e)


def _wrap(e: Expr, parens: bool) -> str:
    s = render(e)
    return f"({s})" if parens else s


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

ZERO = Const(0.0)
ONE = Const(1.0)
TWO = Const(2.0)


def _depends(e: Expr, var: str) -> bool:
    return var in free_vars(e)


def differentiate(e: Expr, var: str = "x", *, simplified: bool = True) -> Expr:
    """Symbolic derivative of ``e`` with respect to ``var``.

    Integral nodes follow the Leibniz rule for variable limits; integrands
    never depend on ``var``.  ``abs`` differentiates to ``sign``, which is
    only meaningful away from the kink.
    """
    d = _diff(e, var)
    return simplify(d) if simplified else d


def _diff(e: Expr, var: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return Neg(_diff(e.child, var))
    if isinstance(e, BinOp):
        u, v = e.left, e.right
        if e.op in "+-":
            return BinOp(e.op, _diff(u, var), _diff(v, var))
        if e.op == "*":
            return _diff(u, var) * v + u * _diff(v, var)
        if e.op == "/":
            return (_diff(u, var) * v - u * _diff(v, var)) / v ** TWO
        # power
        if not _depends(v, var):
            return v * u ** (v - ONE) * _diff(u, var)
        if not _depends(u, var):
            return e * Call("log", u) * _diff(v, var)
        return e * (_diff(v, var) * Call("log", u) + v * _diff(u, var) / u)
    if isinstance(e, Call):
        u = e.arg
        du = _diff(u, var)
        fn = e.fn
        if fn == "exp":
            outer = e
        elif fn == "log":
            return du / u
        elif fn == "sin":
            outer = Call("cos", u)
        elif fn == "cos":
            outer = Neg(Call("sin", u))
        elif fn == "tan":
            outer = Call("sec", u) ** TWO
        elif fn == "sec":
            outer = Call("sec", u) * Call("tan", u)
        elif fn == "sqrt":
            return du / (TWO * e)
        elif fn == "abs":
            outer = Call("sign", u)
        elif fn == "erf":
            outer = Const(2.0 / math.sqrt(math.pi)) * Call("exp", Neg(u ** TWO))
        elif fn == "sign":
            return ZERO
        else:  # pragma: no cover - guarded by Call.__post_init__
            raise ValueError(fn)
        return outer * du
    if isinstance(e, Integral):
        upper = substitute(e.integrand, e.var, e.upper) * _diff(e.upper, var)
        lower = substitute(e.integrand, e.var, e.lower) * _diff(e.lower, var)
        return upper - lower
    raise TypeError(e)


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------
#
# Sums are flattened into (coefficient, term) lists with like terms merged;
# products into a coefficient, a base -> numeric exponent table and a single
# merged exp() argument.  The result is pointwise equal to the input wherever
# the input is defined; no canonical form is promised.


def simplify(e: Expr) -> Expr:
    """Best-effort algebraic simplification preserving pointwise values."""
    prev = None
    cur = e
    for _ in range(8):
        if cur == prev:
            break
        prev, cur = cur, _simp(cur)
    return cur


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


_FOLD = {
    "exp": math.exp,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "erf": math.erf,
    "abs": abs,
}


def _fold_call(fn: str, v: float) -> float | None:
    try:
        if fn in _FOLD:
            r = _FOLD[fn](v)
        elif fn == "log":
            r = math.log(v) if v > 0 else None
        elif fn == "sqrt":
            r = math.sqrt(v) if v >= 0 else None
        elif fn == "sec":
            c = math.cos(v)
            r = 1.0 / c if c != 0 else None
        elif fn == "sign":
            r = float((v > 0) - (v < 0))
        else:
            r = None
    except (OverflowError, ValueError):
        return None
    if r is None or not math.isfinite(r):
        return None
    return float(r)


def _fold_pow(a: float, b: float) -> float | None:
    if a == 0 and b < 0:
        return None
    if a < 0 and not b.is_integer():
        return None
    try:
        r = a ** b
    except (OverflowError, ZeroDivisionError):
        return None
    if isinstance(r, complex) or not math.isfinite(r):
        return None
    return float(r)


def _simp(e: Expr) -> Expr:
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Call):
        arg = _simp(e.arg)
        if isinstance(arg, Const):
            v = _fold_call(e.fn, arg.value)
            if v is not None:
                return Const(v)
        if e.fn == "log" and isinstance(arg, Call) and arg.fn == "exp":
            return arg.arg
        if e.fn == "abs" and isinstance(arg, Call) and arg.fn in ("exp", "abs"):
            return arg
        if e.fn == "exp":
            return _build_product(*_product_parts(Call("exp", arg)))
        return Call(e.fn, arg)
    if isinstance(e, Integral):
        integrand = _simp(e.integrand)
        lower, upper = _simp(e.lower), _simp(e.upper)
        if lower == upper or _is_const(integrand, 0.0):
            return ZERO
        return Integral(integrand, e.var, lower, upper)
    if isinstance(e, Neg) or (isinstance(e, BinOp) and e.op in "+-"):
        const, terms = _sum_parts(e)
        return _build_sum(const, terms)
    if isinstance(e, BinOp) and e.op == "^":
        base, expo = _simp(e.left), _simp(e.right)
        if _is_const(expo, 0.0):
            return ONE
        if _is_const(expo, 1.0):
            return base
        if _is_const(base, 1.0):
            return ONE
        if isinstance(base, Const) and isinstance(expo, Const):
            v = _fold_pow(base.value, expo.value)
            if v is not None:
                return Const(v)
        if isinstance(expo, Const):
            return _build_product(*_product_parts(BinOp("^", base, expo)))
        return BinOp("^", base, expo)
    if isinstance(e, BinOp):  # * or /
        return _build_product(*_product_parts(e))
    raise TypeError(e)


def _sum_parts(e: Expr, sign: float = 1.0) -> tuple[float, list[tuple[float, Expr]]]:
    """Flatten a sum into (constant, [(coefficient, term), ...])."""
    if isinstance(e, Neg):
        return _sum_parts(e.child, -sign)
    if isinstance(e, BinOp) and e.op in "+-":
        c1, t1 = _sum_parts(e.left, sign)
        c2, t2 = _sum_parts(e.right, sign if e.op == "+" else -sign)
        return c1 + c2, t1 + t2
    s = _simp(e)
    if isinstance(s, Const):
        return sign * s.value, []
    if isinstance(s, Neg) or (isinstance(s, BinOp) and s.op in "+-"):
        return _sum_parts_simplified(s, sign)
    coef, term = _split_coefficient(s)
    return 0.0, [(sign * coef, term)]


def _sum_parts_simplified(s: Expr, sign: float) -> tuple[float, list[tuple[float, Expr]]]:
    if isinstance(s, Neg):
        return _sum_parts_simplified(s.child, -sign)
    if isinstance(s, BinOp) and s.op in "+-":
        c1, t1 = _sum_parts_simplified(s.left, sign)
        c2, t2 = _sum_parts_simplified(s.right, sign if s.op == "+" else -sign)
        return c1 + c2, t1 + t2
    if isinstance(s, Const):
        return sign * s.value, []
    coef, term = _split_coefficient(s)
    return 0.0, [(sign * coef, term)]


def _split_coefficient(s: Expr) -> tuple[float, Expr]:
    if isinstance(s, BinOp) and s.op == "*" and isinstance(s.left, Const):
        return s.left.value, s.right
    if isinstance(s, BinOp) and s.op == "/" and isinstance(s.left, BinOp) \
            and s.left.op == "*" and isinstance(s.left.left, Const):
        return s.left.left.value, BinOp("/", s.left.right, s.right)
    if isinstance(s, BinOp) and s.op == "/" and isinstance(s.left, Const) and s.left.value != 1.0:
        return s.left.value, BinOp("/", ONE, s.right)
    return 1.0, s


def _build_sum(const: float, terms: list[tuple[float, Expr]]) -> Expr:
    merged: dict[Expr, float] = {}
    for coef, term in terms:
        merged[term] = merged.get(term, 0.0) + coef
    items = [(c, t) for t, c in merged.items() if c != 0.0]
    if const != 0.0:
        items.append((const, None))
    if not items:
        return ZERO
    # lead with a positive term when one exists
    for k, (c, _) in enumerate(items):
        if c > 0:
            items.insert(0, items.pop(k))
            break
    out: Expr | None = None
    for coef, term in items:
        mag = abs(coef)
        piece = Const(mag) if term is None else (term if mag == 1.0 else BinOp("*", Const(mag), term))
        if out is None:
            if coef < 0:
                out = Const(-mag) if term is None else Neg(piece)
            else:
                out = piece
        else:
            out = BinOp("+" if coef > 0 else "-", out, piece)
    return out


def _product_parts(e: Expr):
    """Flatten a product into (coef, [(base, exponent)], [exp arguments])."""
    coef = 1.0
    factors: list[tuple[Expr, float]] = []
    exp_args: list[Expr] = []

    def visit(node: Expr, power: float):
        nonlocal coef
        integer = float(power).is_integer()
        if isinstance(node, Neg) or (isinstance(node, BinOp) and node.op in "*/"):
            if not integer:
                factors.append((_simp(node), power))
            elif isinstance(node, Neg):
                coef *= (-1.0) ** power
                visit(node.child, power)
            else:
                visit(node.left, power)
                visit(node.right, power if node.op == "*" else -power)
            return
        if isinstance(node, BinOp) and node.op == "^":
            base, expo = _simp(node.left), _simp(node.right)
            if isinstance(expo, Const) and integer:
                visit(base, expo.value * power)
            else:
                factors.append((BinOp("^", base, expo), power))
            return
        if isinstance(node, Call) and node.fn == "exp":
            arg = _simp(node.arg)
            exp_args.append(arg if power == 1.0 else BinOp("*", Const(power), arg))
            return
        if isinstance(node, Const):
            v = _fold_pow(node.value, power)
            if v is None:
                factors.append((node, power))
            else:
                coef *= v
            return
        s = _simp(node)
        if isinstance(s, (Neg, Const)) or (isinstance(s, BinOp) and s.op in "*/^") \
                or (isinstance(s, Call) and s.fn == "exp"):
            visit(s, power)
        else:
            factors.append((s, power))

    visit(e, 1.0)
    return coef, factors, exp_args


def _build_product(coef: float, factors, exp_args) -> Expr:
    if coef == 0.0:
        return ZERO
    merged: dict[Expr, float] = {}
    for base, p in factors:
        merged[base] = merged.get(base, 0.0) + p
    if exp_args:
        total = exp_args[0]
        for a in exp_args[1:]:
            total = BinOp("+", total, a)
        exp_arg = _simp(total)
        if isinstance(exp_arg, Const):
            v = _fold_call("exp", exp_arg.value)
            if v is None:
                merged[Call("exp", exp_arg)] = 1.0
            else:
                coef *= v
        else:
            merged[Call("exp", exp_arg)] = 1.0
    num: list[Expr] = []
    den: list[Expr] = []
    for base, p in merged.items():
        if p == 0.0:
            continue
        mag = abs(p)
        (num if p > 0 else den).append(base if mag == 1.0 else BinOp("^", base, Const(mag)))
    mag = abs(coef)
    if mag != 1.0 or not num:
        num.insert(0, Const(mag))
    out = num[0]
    for p in num[1:]:
        out = BinOp("*", out, p)
    if den:
        d = den[0]
        for p in den[1:]:
            d = BinOp("*", d, p)
        out = BinOp("/", out, d)
    if coef > 0:
        return out
    if isinstance(out, Const):
        return Const(-out.value)
    if isinstance(out, BinOp) and out.op == "*" and isinstance(out.left, Const):
        return BinOp("*", Const(-out.left.value), out.right)
    if isinstance(out, BinOp) and out.op == "/" and isinstance(out.left, Const):
        return BinOp("/", Const(-out.left.value), out.right)
    return Neg(out)

"""Numerical backbone: evaluation, quadrature, root finding, limits, segmentation.

Expressions are compiled to vectorised numpy closures.  Integral nodes are
evaluated by a vectorised adaptive Gauss-Kronrod (7/15) rule; a grid of
upper limits is handled cumulatively, so a whole trace costs about as much
as one integral over its range.

Products of exponentials easily underflow to ``0/0`` (``exp(-x^4)`` at
``x = 40``).  Every float evaluation that comes out non-finite is retried in
a log-magnitude representation ``(sign, log|value|)``, in which products,
quotients and ``exp`` are exact and sums use a signed log-sum-exp.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np
from scipy import special

from .expr import BinOp, Call, Const, Expr, Integral, Neg, Var, free_vars

__all__ = [
    "NumericConfig",
    "NumericsError",
    "DomainError",
    "QuadratureError",
    "RootError",
    "MonotoneSegment",
    "RootResult",
    "LimitResult",
    "compile_expr",
    "evaluate",
    "evaluate_array",
    "evaluate_scaled",
    "evaluate_mp",
    "integrate",
    "find_root",
    "limit_at",
    "numerical_derivative",
    "segment_monotone",
    "sign_profile",
    "softlog",
    "DEFAULT_CONFIG",
]


class NumericsError(ArithmeticError):
    """Base class for numerical failures."""


class DomainError(NumericsError):
    """An expression was evaluated outside its real domain."""

    def __init__(self, message: str, x: float | None = None):
        self.x = x
        super().__init__(message if x is None else f"{message} at x={x!r}")


class QuadratureError(NumericsError):
    """Adaptive quadrature did not reach the requested tolerance."""


class RootError(NumericsError):
    """Bracketing root search failed (no sign change, or no convergence)."""


@dataclass(frozen=True)
class NumericConfig:
    """Tolerances shared by every numerical routine.

    ``margin`` is the relative gap under which two compared quantities are
    considered tied; ``hysteresis`` filters float noise out of observed
    direction changes; ``strict_tol`` is the relative step below which two
    successive samples count as equal (a flat stretch).
    """

    quad_tol: float = 1e-12
    root_tol: float = 1e-12
    limit_steps: int = 8
    grid_n: int = 2048
    infinity_cap: float = 40.0
    endpoint_eps: float = 1e-9
    margin: float = 1e-9
    hysteresis: float = 1e-9
    strict_tol: float = 1e-12
    limit_tol: float = 1e-7

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"NumericConfig.{f.name} must be a positive number, got {value!r}")
        if self.grid_n < 16:
            raise ValueError("NumericConfig.grid_n must be at least 16")
        if self.limit_steps < 2:
            raise ValueError("NumericConfig.limit_steps must be at least 2")
        object.__setattr__(self, "grid_n", int(self.grid_n))
        object.__setattr__(self, "limit_steps", int(self.limit_steps))

    def replace(self, **overrides) -> "NumericConfig":
        return replace(self, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "NumericConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown NumericConfig keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "NumericConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    @classmethod
    def from_env(cls, var: str = "MONORULE_CONFIG") -> "NumericConfig":
        path = os.environ.get(var)
        return cls.from_file(path) if path else cls()


DEFAULT_CONFIG = NumericConfig()


# ---------------------------------------------------------------------------
# Gauss-Kronrod 7/15
# ---------------------------------------------------------------------------

_XK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
])
_GAUSS_IDX = np.arange(1, 15, 2)

_MAX_DEPTH = 200
_MAX_PIECES = 2_000_000


def _adaptive_gk(fun: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray,
                 rtol: float) -> np.ndarray:
    """Integrate ``fun`` over each ``[a_i, b_i]``; NaN where the integrand is undefined."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(a.shape, dtype=float)
    owner = np.arange(a.size)
    lo, hi = a.ravel().copy(), b.ravel().copy()
    flat_out = out.ravel()
    total_pieces = 0
    fscale = None  # integrand magnitude from the first pass, for the rounding floor
    for _ in range(_MAX_DEPTH):
        if lo.size == 0:
            return out
        total_pieces += lo.size
        if total_pieces > _MAX_PIECES:
            break
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        nodes = center[:, None] + half[:, None] * _XK[None, :]
        with np.errstate(all="ignore"):
            fv = np.asarray(fun(nodes.ravel()), dtype=float).reshape(nodes.shape)
        bad = ~np.all(np.isfinite(fv), axis=1)
        if bad.any():
            flat_out[owner[bad]] = np.nan
            keep = ~bad
            lo, hi, owner, fv, half = lo[keep], hi[keep], owner[keep], fv[keep], half[keep]
            if lo.size == 0:
                continue
        kron = half * (fv @ _WK)
        gauss = half * (fv[:, _GAUSS_IDX] @ _WG)
        kabs = np.abs(half) * (np.abs(fv) @ _WK)
        err = np.abs(kron - gauss)
        if fscale is None:
            fscale = float(np.max(np.abs(fv))) if fv.size else 0.0
            budget = np.zeros(a.size)
            np.add.at(budget, owner, kabs)
        tiny = np.abs(hi - lo) <= 8 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi))
        # near a zero of the integrand the relative target sits below rounding noise
        floor = 64 * np.finfo(float).eps * np.abs(half) * fscale
        # an integrable endpoint singularity never meets the local test; the pieces
        # next to it shrink geometrically, so a small absolute share suffices
        share = 1e-2 * rtol * budget[owner]
        done = (err <= rtol * kabs) | (err <= floor) | (err <= share) | tiny
        np.add.at(flat_out, owner[done], kron[done])
        rest = ~done
        if not rest.any():
            return out
        mid = center[rest]
        lo = np.concatenate([lo[rest], mid])
        hi = np.concatenate([mid, hi[rest]])
        owner = np.concatenate([owner[rest], owner[rest]])
    raise QuadratureError("adaptive quadrature did not converge (maximum refinement reached)")


def _cumulative_integral(fun, lower: np.ndarray, upper: np.ndarray, rtol: float) -> np.ndarray:
    """``int_lower^upper fun`` for arrays of limits, via one cumulative sweep."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    lower, upper = np.broadcast_arrays(lower, upper)
    result = np.full(lower.shape, np.nan)
    ok = np.isfinite(lower) & np.isfinite(upper)
    if not ok.any():
        return result
    lo_ok, up_ok = lower[ok], upper[ok]
    pts = np.unique(np.concatenate([lo_ok, up_ok]))
    if pts.size == 1:
        result[ok] = 0.0
        return result
    pieces = _adaptive_gk(fun, pts[:-1], pts[1:], rtol)
    # NaN in a piece poisons everything past it, which is the right semantics for poles
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    result[ok] = cum[np.searchsorted(pts, up_ok)] - cum[np.searchsorted(pts, lo_ok)]
    return result


# ---------------------------------------------------------------------------
# Float compilation
# ---------------------------------------------------------------------------


def _nan_where(values, mask):
    if np.any(mask):
        values = np.where(mask, np.nan, values)
    return values


def _is_log_sec(e: Expr) -> bool:
    return isinstance(e, Call) and e.fn == "log" and isinstance(e.arg, Call) and e.arg.fn == "sec"


def _log_cos(u):
    # log1p form avoids cancellation where cos u is near 1; plain log elsewhere
    c = np.cos(u)
    s = np.sin(0.5 * u)
    near_one = np.log1p(-2.0 * s * s)
    out = np.where(c > 0.5, near_one, np.log(np.where(c > 0, c, np.nan)))
    return _nan_where(out, ~(c > 0))


@lru_cache(maxsize=512)
def _compile(e: Expr, var: str, quad_tol: float) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(e, Const):
        v = e.value
        return lambda xs: np.full(np.shape(xs), v)
    if isinstance(e, Var):
        if e.name != var:
            raise DomainError(f"free variable {e.name!r} has no value")
        return lambda xs: np.asarray(xs, dtype=float)
    if isinstance(e, Neg):
        c = _compile(e.child, var, quad_tol)
        return lambda xs: -c(xs)
    if isinstance(e, BinOp):
        left = _compile(e.left, var, quad_tol)
        right = _compile(e.right, var, quad_tol)
        if e.op == "+":
            return lambda xs: left(xs) + right(xs)
        if e.op == "-":
            return lambda xs: left(xs) - right(xs)
        if e.op == "*":
            return lambda xs: left(xs) * right(xs)
        if e.op == "/":
            def div(xs):
                num, den = left(xs), right(xs)
                return _nan_where(num / den, den == 0)
            return div
        if isinstance(e.right, Const) and e.right.value.is_integer():
            n = e.right.value

            def ipow(xs):
                base = left(xs)
                return _nan_where(np.power(base, n), (base == 0) & (n < 0))
            return ipow

        def rpow(xs):
            base, expo = left(xs), right(xs)
            bad = (base < 0) & (expo != np.round(expo)) | (base == 0) & (expo < 0)
            return _nan_where(np.power(base, expo), bad)
        return rpow
    if isinstance(e, Call):
        if _is_log_sec(e):
            inner = _compile(e.arg.arg, var, quad_tol)
            return lambda xs: -_log_cos(inner(xs))
        c = _compile(e.arg, var, quad_tol)
        fn = e.fn
        if fn == "exp":
            return lambda xs: np.exp(c(xs))
        if fn == "log":
            def log(xs):
                u = c(xs)
                return _nan_where(np.log(u), u <= 0)
            return log
        if fn == "sqrt":
            def sqrt(xs):
                u = c(xs)
                return _nan_where(np.sqrt(u), u < 0)
            return sqrt
        if fn == "sec":
            def sec(xs):
                cu = np.cos(c(xs))
                return _nan_where(1.0 / cu, cu == 0)
            return sec
        simple = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "abs": np.abs,
                  "erf": special.erf, "sign": np.sign}[fn]
        return lambda xs: simple(c(xs))
    if isinstance(e, Integral):
        integrand = _compile(e.integrand, e.var, quad_tol)
        lower = _compile(e.lower, var, quad_tol)
        upper = _compile(e.upper, var, quad_tol)
        return lambda xs: _cumulative_integral(integrand, lower(xs), upper(xs), quad_tol)
    raise TypeError(e)


def compile_expr(e: Expr, var: str = "x", cfg: NumericConfig = DEFAULT_CONFIG):
    """Vectorised float evaluator for ``e``; domain violations give NaN."""
    extra = free_vars(e) - {var}
    if extra:
        raise DomainError(f"expression has free variables {sorted(extra)} besides {var!r}")
    f = _compile(e, var, cfg.quad_tol)

    def run(xs):
        with np.errstate(all="ignore"):
            return np.asarray(f(np.asarray(xs, dtype=float)), dtype=float)
    return run


# ---------------------------------------------------------------------------
# Log-magnitude compilation
# ---------------------------------------------------------------------------


def _to_scaled(v):
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sign(v), np.log(np.abs(v))


def _from_scaled(s, lg):
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(s == 0, 0.0, s * np.exp(lg))


def _scaled_add(a, b):
    (s1, l1), (s2, l2) = a, b
    with np.errstate(all="ignore"):
        big = np.where(l1 >= l2, l1, l2)
        small = np.where(l1 >= l2, l2, l1)
        sb = np.where(l1 >= l2, s1, s2)
        ss = np.where(l1 >= l2, s2, s1)
        ratio = np.where(np.isfinite(big), np.exp(small - big), 0.0)
        ratio = np.where(ss == 0, 0.0, ratio)
        same = sb * ss >= 0
        mag = np.where(same, np.log1p(ratio), np.log1p(-ratio))
        lg = big + mag
        s = np.where(sb == 0, ss, sb)
        s = np.where(np.isneginf(lg) | ((~same) & (ratio == 1.0)), 0.0, s)
        lg = np.where(s == 0, -np.inf, lg)
    return s, lg


@lru_cache(maxsize=512)
def _compile_scaled(e: Expr, var: str, quad_tol: float):
    if isinstance(e, (Const, Integral)) or (isinstance(e, Call) and e.fn not in
                                              ("exp", "log", "sqrt", "abs", "sign")):
        if isinstance(e, Call):
            child = _compile_scaled(e.arg, var, quad_tol)
            single = _compile(Call(e.fn, Var("__u")), "__u", quad_tol)

            def call(xs):
                u = _from_scaled(*child(xs))
                with np.errstate(all="ignore"):
                    return _to_scaled(single(u))
            return call
        if isinstance(e, Integral):
            plain = _compile(e, var, quad_tol)
            return lambda xs: _to_scaled(plain(xs))
        v = e.value
        return lambda xs: _to_scaled(np.full(np.shape(xs), v))
    if isinstance(e, Var):
        return lambda xs: _to_scaled(xs)
    if isinstance(e, Neg):
        c = _compile_scaled(e.child, var, quad_tol)

        def neg(xs):
            s, lg = c(xs)
            return -s, lg
        return neg
    if isinstance(e, BinOp):
        left = _compile_scaled(e.left, var, quad_tol)
        right = _compile_scaled(e.right, var, quad_tol)
        if e.op in "+-":
            sub = e.op == "-"

            def add(xs):
                s2, l2 = right(xs)
                return _scaled_add(left(xs), (-s2 if sub else s2, l2))
            return add
        if e.op == "*":
            def mul(xs):
                (s1, l1), (s2, l2) = left(xs), right(xs)
                s = s1 * s2
                with np.errstate(invalid="ignore"):
                    return s, np.where(s == 0, -np.inf, l1 + l2)
            return mul
        if e.op == "/":
            def div(xs):
                (s1, l1), (s2, l2) = left(xs), right(xs)
                s = np.where(s2 == 0, np.nan, s1 * s2)
                with np.errstate(invalid="ignore"):
                    return s, np.where(s == 0, -np.inf, l1 - l2)
            return div
        # power
        if isinstance(e.right, Const):
            n = e.right.value
            integer = n.is_integer()

            def cpow(xs):
                s, lg = left(xs)
                if integer:
                    sign = np.where(s == 0, 0.0, s ** int(abs(n)) if n != 0 else 1.0)
                    sign = np.where((s == 0) & (n < 0), np.nan, sign)
                else:
                    sign = np.where(s < 0, np.nan, np.where(s == 0, 0.0, 1.0))
                    sign = np.where((s == 0) & (n < 0), np.nan, sign)
                if n == 0:
                    return np.ones_like(lg), np.zeros_like(lg)
                with np.errstate(invalid="ignore"):
                    return sign, np.where(sign == 0, -np.inf, n * lg)
            return cpow

        def gpow(xs):
            (s1, l1), expo = left(xs), _from_scaled(*right(xs))
            sign = np.where(s1 > 0, 1.0, np.nan)
            with np.errstate(invalid="ignore"):
                return sign, expo * l1
        return gpow
    # exp, log, sqrt, abs, sign
    c = _compile_scaled(e.arg, var, quad_tol)
    fn = e.fn
    if fn == "exp":
        return lambda xs: (np.ones(np.shape(xs)), _from_scaled(*c(xs)))
    if fn == "log":
        def log(xs):
            s, lg = c(xs)
            val = np.where(s > 0, lg, np.nan)
            return _to_scaled(val)
        return log
    if fn == "sqrt":
        def sqrt(xs):
            s, lg = c(xs)
            return np.where(s < 0, np.nan, s), 0.5 * lg
        return sqrt
    if fn == "abs":
        def absf(xs):
            s, lg = c(xs)
            return np.abs(s), lg
        return absf

    def signf(xs):
        s, lg = c(xs)
        return s, np.where(s == 0, -np.inf, 0.0)
    return signf


def evaluate_scaled(e: Expr, xs, cfg: NumericConfig = DEFAULT_CONFIG, var: str = "x", plain: bool = False):
    """Evaluate as ``(sign, log|value|)`` arrays, robust to over- and underflow.

    The float path is used wherever it yields a value of normal magnitude;
    zeros, non-finite values and anything within ``1e18`` of the subnormal or
    overflow range are recomputed in log-magnitude arithmetic.  Undefined
    points carry sign NaN.  With ``plain=True`` the float-path values are
    returned as a third array, NaN where they were recomputed.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    vals = compile_expr(e, var, cfg)(xs)
    s, lg = _to_scaled(vals)
    with np.errstate(invalid="ignore"):
        mag = np.abs(vals)
        redo = ~np.isfinite(vals) | (mag < 1e-290) | (mag > 1e290)
    if redo.any():
        f = _compile_scaled(e, var, cfg.quad_tol)
        with np.errstate(all="ignore"):
            s2, l2 = f(xs[redo])
        s2 = np.asarray(s2, dtype=float)
        l2 = np.asarray(l2, dtype=float)
        s2 = np.where(np.isnan(l2) & (s2 != 0), np.nan, s2)
        s = s.copy()
        lg = lg.copy()
        s[redo] = s2
        lg[redo] = l2
    if plain:
        return s, lg, np.where(redo, np.nan, vals)
    return s, lg


def evaluate_array(e: Expr, xs, cfg: NumericConfig = DEFAULT_CONFIG, var: str = "x") -> np.ndarray:
    """Vectorised evaluation; NaN marks points outside the real domain."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    vals = compile_expr(e, var, cfg)(xs)
    bad = ~np.isfinite(vals)
    if bad.any():
        s, lg = evaluate_scaled(e, xs[bad], cfg, var)
        vals = vals.copy()
        vals[bad] = _from_scaled(s, lg)
    return vals


def evaluate(e: Expr, x: float, cfg: NumericConfig = DEFAULT_CONFIG, var: str = "x") -> float:
    """Evaluate ``e`` at a single point; raises :class:`DomainError` off-domain."""
    v = float(evaluate_array(e, [x], cfg, var)[0])
    if not math.isfinite(v):
        raise DomainError("expression is undefined or non-finite", x)
    return v


def softlog(s, lg):
    """Finite, strictly increasing image ``sign * log1p(|v|)`` of a scaled value."""
    s = np.asarray(s, dtype=float)
    lg = np.asarray(lg, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        # log1p(e^lg) evaluated stably for every lg
        mag = np.where(lg > 0, lg + np.log1p(np.exp(-np.abs(lg))), np.log1p(np.exp(np.minimum(lg, 0))))
    return np.where(s == 0, 0.0, s * mag)


# ---------------------------------------------------------------------------
# Extended precision (used where double precision cannot resolve a limit)
# ---------------------------------------------------------------------------

_MP_FUNCS = {
    "exp": "exp", "log": "log", "sin": "sin", "cos": "cos", "tan": "tan",
    "sec": "sec", "sqrt": "sqrt", "abs": "fabs", "erf": "erf", "sign": "sign",
}


def _mp_eval(e: Expr, env: dict):
    import mpmath as mp

    if isinstance(e, Const):
        # the parser stores pi as the nearest double; restore it exactly
        return +mp.pi if e.value == math.pi else mp.mpf(e.value)
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_mp_eval(e.child, env)
    if isinstance(e, BinOp):
        a = _mp_eval(e.left, env)
        b = _mp_eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0:
                raise DomainError("division by zero")
            return a / b
        if a == 0 and b < 0:
            raise DomainError("zero to a negative power")
        if a < 0 and b != int(b):
            raise DomainError("negative base with non-integer exponent")
        return a ** b
    if isinstance(e, Call):
        u = _mp_eval(e.arg, env)
        if e.fn in ("log",) and u <= 0 or e.fn == "sqrt" and u < 0:
            raise DomainError(f"{e.fn} of a non-positive argument")
        return getattr(mp, _MP_FUNCS[e.fn])(u)
    if isinstance(e, Integral):
        lo, hi = _mp_eval(e.lower, env), _mp_eval(e.upper, env)

        def integrand(t):
            return _mp_eval(e.integrand, {**env, e.var: t})
        return mp.quad(integrand, [lo, hi])
    raise TypeError(e)


def evaluate_mp(e: Expr, x, dps: int = 60, var: str = "x"):
    """Evaluate ``e`` at ``x`` with ``dps`` significant digits (mpmath)."""
    import mpmath as mp

    with mp.workdps(dps):
        return _mp_eval(e, {var: mp.mpf(x) if not isinstance(x, mp.mpf) else x})



# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def integrate(integrand: Expr, lo: float, hi: float, cfg: NumericConfig = DEFAULT_CONFIG,
              var: str = "t") -> float:
    """Adaptive Gauss-Kronrod integral of ``integrand`` (in ``var``) over ``[lo, hi]``."""
    extra = free_vars(integrand) - {var}
    if extra:
        raise DomainError(f"integrand depends on {sorted(extra)} besides {var!r}")
    if lo == hi:
        return 0.0
    if hi < lo:
        return -integrate(integrand, hi, lo, cfg, var)
    f = _compile(integrand, var, cfg.quad_tol)
    val = float(_adaptive_gk(f, np.array([lo]), np.array([hi]), cfg.quad_tol)[0])
    if not math.isfinite(val):
        raise DomainError(f"integrand undefined or non-finite inside [{lo}, {hi}]")
    return val


# ---------------------------------------------------------------------------
# Roots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RootResult:
    root: float
    bracket: tuple[float, float]
    value: float
    iterations: int


def find_root(fn: Callable[[float], float], lo: float, hi: float,
              cfg: NumericConfig = DEFAULT_CONFIG, maxiter: int = 200) -> RootResult:
    """Brent's method on a sign-changing bracket.

    The returned bracket always straddles the sign change and is no wider
    than ``root_tol * (1 + |root|)``.  Non-finite function values fall back
    to bisection.
    """
    a, b = float(lo), float(hi)
    fa, fb = float(fn(a)), float(fn(b))
    if math.isnan(fa) or math.isnan(fb):
        raise RootError(f"function undefined at bracket end ({a}, {b})")
    if fa == 0:
        return RootResult(a, (a, a), 0.0, 0)
    if fb == 0:
        return RootResult(b, (b, b), 0.0, 0)
    if (fa > 0) == (fb > 0):
        raise RootError(f"no sign change on [{a}, {b}]: f={fa!r}, {fb!r}")
    c, fc = a, fa
    d = e = b - a
    for it in range(1, maxiter + 1):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol = 0.25 * cfg.root_tol * (1.0 + abs(b))
        m = 0.5 * (c - b)
        if abs(m) <= tol or fb == 0:
            br = (min(b, c), max(b, c)) if fb != 0 else (b, b)
            return RootResult(b, br, fb, it)
        finite = math.isfinite(fa) and math.isfinite(fb) and math.isfinite(fc)
        if finite and abs(e) >= tol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * m * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * m * q - abs(tol * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m
        else:
            d = e = m
        a, fa = b, fb
        b = b + (d if abs(d) > tol else math.copysign(tol, m))
        fb = float(fn(b))
        if math.isnan(fb):
            raise RootError(f"function undefined at x={b!r} inside the bracket")
    raise RootError(f"root search did not converge in {maxiter} iterations")


# ---------------------------------------------------------------------------
# One-sided limits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LimitResult:
    """Outcome of :func:`limit_at`.

    ``status`` is ``converged``, ``diverges`` or ``unstable`` (the table did
    not settle but values are not blowing up either).
    """

    value: float
    error: float
    status: str
    method: str
    samples: tuple[float, ...] = field(default=(), repr=False)

    @property
    def diverges(self) -> bool:
        return self.status == "diverges"

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _richardson(values: list[float], ratio: float) -> tuple[float, float]:
    """Best entry of a Richardson table for error terms in integer powers of h."""
    n = len(values)
    table = [[v] for v in values]
    best, best_err = values[-1], abs(values[-1] - values[-2]) if n > 1 else math.inf
    for k in range(1, n):
        for m in range(1, k + 1):
            fac = ratio ** m
            t = (fac * table[k][m - 1] - table[k - 1][m - 1]) / (fac - 1.0)
            table[k].append(t)
            err = max(abs(t - table[k][m - 1]), abs(t - table[k - 1][m - 1]))
            if err < best_err:
                best, best_err = t, err
    return best, best_err


def _neville_at_zero(nodes: list[float], values: list[float]) -> tuple[float, float]:
    """Polynomial extrapolation to 0; error is the last correction."""
    p = list(values)
    n = len(p)
    prev = p[-1]
    est, err = p[-1], math.inf
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (nodes[i + m] * p[i] - nodes[i] * p[i + 1]) / (nodes[i + m] - nodes[i])
        est_new = p[0]
        err_new = abs(est_new - prev)
        prev = est_new
        if err_new < err:
            est, err = est_new, err_new
    return est, err


def _wynn_epsilon(values: list[float]) -> tuple[float, float]:
    """Wynn's epsilon algorithm; suits error terms h^p with unknown p."""
    n = len(values)
    prev = [0.0] * (n + 1)
    cur = list(values)
    best, best_err = values[-1], abs(values[-1] - values[-2])
    col = 0
    while len(cur) > 1:
        nxt = []
        for i in range(len(cur) - 1):
            d = cur[i + 1] - cur[i]
            if d == 0:
                return (cur[i], 0.0) if col % 2 == 0 else (best, best_err)
            nxt.append(prev[i + 1] + 1.0 / d)
        prev, cur = cur, nxt
        col += 1
        if col % 2 == 0 and len(cur) >= 2:
            err = abs(cur[-1] - cur[-2])
            if err < best_err:
                best, best_err = cur[-1], err
    return best, best_err


def _growing(values: list[float]) -> bool:
    mags = [abs(v) for v in values]
    if not all(math.isfinite(m) for m in mags):
        return True
    tail = mags[len(mags) // 2:]
    increasing = all(b > a for a, b in zip(tail, tail[1:]))
    if not increasing:
        return False
    geometric = all(b >= 1.2 * a for a, b in zip(tail, tail[1:])) and tail[-1] > 10 * (1.0 + mags[0])
    return geometric or tail[-1] > 1e3 * (1.0 + mags[0]) or tail[-1] > 1e12


def _steady_drift(values: list[float]) -> bool:
    """Increments of one sign that do not shrink: the ladder walks off to infinity."""
    d = [b - a for a, b in zip(values, values[1:])]
    if len(d) < 3 or any(x == 0 for x in d):
        return False
    same_sign = all((x > 0) == (d[0] > 0) for x in d)
    return same_sign and all(abs(b) >= 0.98 * abs(a) for a, b in zip(d, d[1:]))


def limit_at(fn: Callable[[float], float], point: float, side: str = "right",
             cfg: NumericConfig = DEFAULT_CONFIG, h0: float | None = None,
             hp_fn: Callable | None = None) -> LimitResult:
    """One-sided limit of ``fn`` at ``point`` (which may be ``+inf``).

    Samples along a geometric ladder of offsets and extrapolates with a
    Richardson table (error expanding in powers of the offset).  When that
    table does not settle, a second ladder with the error expanding in powers
    of ``1/log(1/offset)`` is tried, which captures logarithmic approach.
    Double precision only reaches offsets near ``1e-12``, which is often too
    coarse for that; ``hp_fn(offset)``, if given, evaluates the function at
    the exact point displaced inward by an mpmath ``offset`` and is used to
    run the logarithmic ladder down to ``1e-40``.  ``side`` is ignored at
    infinity.
    """
    steps = cfg.limit_steps
    if math.isinf(point):
        if point < 0:
            raise ValueError("limits at -inf are not supported")
        xs = [cfg.infinity_cap * 2.0 ** k for k in range(steps)]
        vals = [float(fn(x)) for x in xs]
        if _growing(vals):
            return LimitResult(vals[-1], math.inf, "diverges", "ladder", tuple(vals))
        est, err = _richardson(vals, 2.0)
        if all(v == vals[0] for v in vals):
            est, err = vals[0], 0.0
        status = "converged" if err <= cfg.limit_tol * max(1.0, abs(est)) else "unstable"
        return LimitResult(est, err, status, "richardson-inf", tuple(vals))
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    sgn = 1.0 if side == "right" else -1.0
    scale = max(1.0, abs(point))
    if h0 is None:
        h0 = 1e-2 * scale
    offsets = [h0 * 2.0 ** -k for k in range(steps)]
    vals = [float(fn(point + sgn * h)) for h in offsets]
    if any(math.isnan(v) for v in vals):
        raise DomainError("function undefined near the limit point", point)
    if _growing(vals):
        return LimitResult(vals[-1], math.inf, "diverges", "richardson", tuple(vals))
    est, err = _richardson(vals, 2.0)
    tol = cfg.limit_tol * max(1.0, abs(est))
    if err <= tol:
        return LimitResult(est, err, "converged", "richardson", tuple(vals))
    more = vals + [float(fn(point + sgn * h0 * 2.0 ** -k)) for k in range(steps, 2 * steps)]
    d = [abs(b - a) for a, b in zip(more, more[1:])]
    shrinking = all(y <= x for x, y in zip(d[len(d) // 2:], d[len(d) // 2 + 1:]))
    if not any(math.isnan(v) for v in more) and shrinking:
        west, werr = _wynn_epsilon(more)
        if werr <= cfg.limit_tol * max(1.0, abs(west)) and math.isfinite(west):
            return LimitResult(west, werr, "converged", "wynn-epsilon", tuple(more))
    # logarithmic approach: offsets shrink by decades, extrapolate in 1/log(1/h)
    floor = 1e5 * np.finfo(float).eps * scale
    h_start = min(h0 * 1e-2, 1e-4 * scale)
    log_offsets = [h_start * 10.0 ** -k for k in range(max(steps, 4))]
    log_offsets = [h for h in log_offsets if h >= floor]
    if len(log_offsets) >= 4:
        lvals = [float(fn(point + sgn * h)) for h in log_offsets]
        if not any(math.isnan(v) for v in lvals):
            nodes = [1.0 / math.log(scale / h) for h in log_offsets]
            lest, lerr = _neville_at_zero(nodes, lvals)
            ltol = cfg.limit_tol * max(1.0, abs(lest))
            if lerr <= ltol and lerr < err:
                return LimitResult(lest, lerr, "converged", "log-extrapolation", tuple(lvals))
            if _growing(lvals) or _steady_drift(lvals):
                return LimitResult(lvals[-1], math.inf, "diverges", "log-extrapolation", tuple(lvals))
    if hp_fn is not None:
        hp = _hp_log_limit(hp_fn, cfg)
        if hp is not None and (hp.converged or hp.error < err):
            return hp
    return LimitResult(est, err, "unstable", "richardson", tuple(vals))


def _hp_log_limit(hp_fn: Callable, cfg: NumericConfig) -> LimitResult | None:
    import mpmath as mp

    with mp.workdps(60):
        offsets = [mp.mpf(10) ** (-5 * k) for k in range(1, 9)]
        try:
            vals = [hp_fn(h) for h in offsets]
        except (NumericsError, ZeroDivisionError, ValueError):
            return None
        nodes = [1 / mp.log(1 / h) for h in offsets]
        p = list(vals)
        n = len(p)
        prev = p[-1]
        best, best_err = p[-1], mp.inf
        for m in range(1, n):
            for i in range(n - m):
                p[i] = (nodes[i + m] * p[i] - nodes[i] * p[i + 1]) / (nodes[i + m] - nodes[i])
            err = abs(p[0] - prev)
            prev = p[0]
            if err < best_err:
                best, best_err = p[0], err
        value, error = float(best), float(best_err)
    vals_f = tuple(float(v) for v in vals)
    if error <= cfg.limit_tol * max(1.0, abs(value)):
        return LimitResult(value, error, "converged", "log-extrapolation-mp", vals_f)
    if _growing(list(vals_f)):
        return LimitResult(vals_f[-1], math.inf, "diverges", "log-extrapolation-mp", vals_f)
    return LimitResult(value, error, "unstable", "log-extrapolation-mp", vals_f)


# ---------------------------------------------------------------------------
# Derivatives, sign scans and monotone segmentation
# ---------------------------------------------------------------------------


def numerical_derivative(fn: Callable, x, h: float):
    """Five-point central difference."""
    x = np.asarray(x, dtype=float)
    return (-fn(x + 2 * h) + 8 * fn(x + h) - 8 * fn(x - h) + fn(x - 2 * h)) / (12.0 * h)


@dataclass(frozen=True)
class MonotoneSegment:
    """A maximal stretch on which a sampled function moves in one direction.

    ``breakpoint_residual`` is ``|fn'(hi)|`` at an interior right end (0 at
    the interval end).  ``strict`` is False when the stretch contains runs of
    numerically equal samples.
    """

    lo: float
    hi: float
    direction: str  # up | down | flat
    breakpoint_residual: float = 0.0
    strict: bool = True
    warning: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _vectorized(fn):
    def call(xs):
        xs = np.asarray(xs, dtype=float)
        try:
            out = np.asarray(fn(xs), dtype=float)
            if out.shape == xs.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(np.asarray(fn(float(x))).reshape(-1)[0]) for x in xs.ravel()]).reshape(xs.shape)
    return call


def _step_signs(ys: np.ndarray, rel: float) -> np.ndarray:
    d = np.diff(ys)
    thresh = rel * np.maximum(np.abs(ys[:-1]), np.abs(ys[1:]))
    return np.where(d > thresh, 1, np.where(d < -thresh, -1, 0))


def segment_monotone(fn: Callable, lo: float, hi: float, cfg: NumericConfig = DEFAULT_CONFIG,
                     dfn: Callable | None = None, n: int | None = None) -> list[MonotoneSegment]:
    """Split ``[lo, hi]`` into alternating monotone stretches of ``fn``.

    ``fn`` is sampled on ``n`` (default ``grid_n``) equispaced points.  Each
    direction change is refined by a bracketed root search on ``dfn`` (or on
    a five-point numerical derivative when ``dfn`` is not given).  Runs of
    equal samples never split a stretch; they only mark it non-strict.  A
    function flat over the whole interval yields one ``flat`` segment.
    """
    if not lo < hi:
        raise ValueError("segment_monotone needs lo < hi")
    n = n or cfg.grid_n
    f = _vectorized(fn)
    xs = np.linspace(lo, hi, n)
    ys = f(xs)
    bad = ~np.isfinite(ys)
    if bad.any():
        raise DomainError("function is undefined or non-finite on the sampling grid", float(xs[bad][0]))
    signs = _step_signs(ys, cfg.strict_tol)
    nz = np.flatnonzero(signs)
    if nz.size == 0:
        return [MonotoneSegment(lo, hi, "flat", 0.0, False)]
    step = (hi - lo) / (n - 1)
    if dfn is not None:
        deriv = _vectorized(dfn)
    else:
        h = step / 4.0

        def deriv(x):
            return numerical_derivative(f, x, h)

    # direction changes between consecutive non-flat steps
    changes = []
    for j, k in zip(nz[:-1], nz[1:]):
        if signs[j] != signs[k]:
            changes.append((j, k))
    breakpoints: list[tuple[float, float, str | None]] = []
    for j, k in changes:
        old = signs[j]
        b_lo = xs[j]
        b_hi = xs[min(k + 1, n - 1)]
        warning = None
        root = None
        try:
            d_lo, d_hi = float(deriv(b_lo)), float(deriv(b_hi))
            if (d_lo > 0) == (old > 0) and (d_hi > 0) != (old > 0) and d_lo != 0 and d_hi != 0:
                root = find_root(lambda x: float(deriv(x)), b_lo, b_hi, cfg).root
            else:
                lo2, hi2 = xs[max(j - 1, 0)], xs[min(k + 2, n - 1)]
                d_lo, d_hi = float(deriv(lo2)), float(deriv(hi2))
                if (d_lo > 0) != (d_hi > 0) and d_lo != 0 and d_hi != 0:
                    root = find_root(lambda x: float(deriv(x)), lo2, hi2, cfg).root
        except (NumericsError, ValueError):
            root = None
        if root is None:
            root = 0.5 * (xs[j + 1] + xs[k])
            warning = "breakpoint not refined: derivative has no clean sign change near the sampled extremum"
        residual = abs(float(deriv(root)))
        if min(root - lo, hi - root) <= cfg.root_tol * (1 + abs(root)) + 0.0:
            warning = "direction change at the resolution limit of the interval"
        breakpoints.append((float(root), residual, warning))
    for (b1, _, _), (b2, _, w) in zip(breakpoints, breakpoints[1:]):
        if b2 - b1 < step and w is None:
            breakpoints = [(b, r, ww or ("two direction changes within one grid step" if b in (b1, b2) else None))
                           for b, r, ww in breakpoints]
    # long flat runs (two or more equal steps) away from breakpoints make a stretch non-strict
    flat_runs = []
    run_start = None
    for i, s in enumerate(list(signs) + [1]):
        if s == 0 and run_start is None:
            run_start = i
        elif s != 0 and run_start is not None:
            if i - run_start >= 2:
                flat_runs.append((xs[run_start], xs[min(i, n - 1)]))
            run_start = None
    edges = [lo] + [b for b, _, _ in breakpoints] + [hi]
    first_dir = signs[nz[0]]
    segments = []
    for idx in range(len(edges) - 1):
        a, b = edges[idx], edges[idx + 1]
        direction = "up" if (first_dir > 0) == (idx % 2 == 0) else "down"
        residual = breakpoints[idx][1] if idx < len(breakpoints) else 0.0
        warning = breakpoints[idx][2] if idx < len(breakpoints) else None
        strict = True
        for r0, r1 in flat_runs:
            touches_break = any(r0 - step <= bp <= r1 + step for bp in edges[1:-1])
            if r1 > a and r0 < b and not touches_break:
                strict = False
        segments.append(MonotoneSegment(float(a), float(b), direction, residual, strict, warning))
    return segments


@dataclass(frozen=True)
class SignProfile:
    """Sign of a function over an interval, with refined sign-change points."""

    sign: str  # positive | negative | mixed | zero
    changes: tuple[float, ...]


def sign_profile(fn: Callable, lo: float, hi: float, cfg: NumericConfig = DEFAULT_CONFIG,
                 n: int | None = None) -> SignProfile:
    """Sign-scan on a grid; exact zeros (often underflow) carry no sign."""
    n = n or cfg.grid_n
    f = _vectorized(fn)
    xs = np.linspace(lo, hi, n)
    ys = f(xs)
    if np.isnan(ys).any():
        raise DomainError("function undefined on the sampling grid", float(xs[np.isnan(ys)][0]))
    sg = np.sign(ys)
    nz = np.flatnonzero(sg)
    if nz.size == 0:
        return SignProfile("zero", ())
    changes = []
    for j, k in zip(nz[:-1], nz[1:]):
        if sg[j] != sg[k]:
            try:
                changes.append(find_root(lambda x: float(f(np.array([x]))[0]), xs[j], xs[k], cfg).root)
            except RootError:
                changes.append(0.5 * (xs[j] + xs[k]))
    if changes:
        return SignProfile("mixed", tuple(float(c) for c in changes))
    return SignProfile("positive" if sg[nz[0]] > 0 else "negative", ())

"""Rule engine: decide the shape of f/g from the behaviour of f'/g'.

Every verdict is built from three ingredients, all evaluated numerically:

* the sign of ``g`` and ``g'`` on the interval,
* the monotone stretches of the Hopital derivative ``B = f'/g'``,
* comparisons of ``A = f/g`` against ``B`` at stretch endpoints.

On a stretch where ``B`` is monotone and ``g`` moves in one direction, the
quotient ``A`` is monotone or changes direction once, and the endpoint
comparisons decide which.  Since ``A' = (B - A) g'/g``, a turning point is a
root of ``W = f'g - f g'``.  Stretches are classified one by one and stitched.

Decreasing ``g`` is handled in a mirrored coordinate, so a single case table
serves both directions.  Negative ``g`` is replaced by ``(-f)/(-g)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .expr import BinOp, Const, Expr, Neg, Var, differentiate, free_vars, parse, render, simplify, substitute
from .numerics import (
    DEFAULT_CONFIG,
    DomainError,
    LimitResult,
    MonotoneSegment,
    NumericConfig,
    NumericsError,
    RootError,
    evaluate_mp,
    evaluate_scaled,
    find_root,
    limit_at,
    segment_monotone,
    softlog,
)
from .numerics import _from_scaled, _scaled_add  # shared log-magnitude helpers

log = logging.getLogger(__name__)

UP, DOWN, FLAT = "up", "down", "flat"


def _flip(direction: str) -> str:
    return {UP: DOWN, DOWN: UP}.get(direction, direction)


class IneligibleError(ValueError):
    """The hypotheses of the requested rule do not hold for this problem."""


# ---------------------------------------------------------------------------
# Problem
# ---------------------------------------------------------------------------


def parse_bound(text: str | float) -> tuple[float, Expr | None]:
    """Parse an interval bound: a number, ``inf`` or a constant expression like ``pi/2``."""
    if isinstance(text, (int, float)):
        return float(text), None
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity", "oo"):
        return math.inf, None
    raw = parse(text)
    if free_vars(raw):
        raise ValueError(f"interval bound {text!r} must be a constant")
    e = simplify(raw)
    value = float(evaluate_scaled_value(e))
    return value, (None if isinstance(raw, Const) and raw.value != math.pi else raw)


def evaluate_scaled_value(e: Expr) -> float:
    s, lg = evaluate_scaled(e, [0.0])
    return float(_from_scaled(s, lg)[0])


@dataclass(frozen=True)
class RatioProblem:
    """The quotient ``f/g`` on ``[a, b]`` (``b`` may be ``inf``).

    ``a_exact``/``b_exact`` optionally hold exact constant forms of the
    bounds (``pi/2``); they are used only by extended-precision limits.
    """

    f: Expr
    g: Expr
    a: float
    b: float
    open_left: bool = False
    open_right: bool = False
    cfg: NumericConfig = DEFAULT_CONFIG
    a_exact: Expr | None = None
    b_exact: Expr | None = None
    var: str = "x"

    def __post_init__(self):
        if not math.isfinite(self.a):
            raise ValueError("left bound must be finite")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        for name in ("f", "g"):
            extra = free_vars(getattr(self, name)) - {self.var}
            if extra:
                raise ValueError(f"{name} has free variables {sorted(extra)} besides {self.var!r}")

    @classmethod
    def from_strings(cls, f: str, g: str, a: str | float, b: str | float, **kw) -> "RatioProblem":
        av, ae = parse_bound(a)
        bv, be = parse_bound(b)
        return cls(parse(f), parse(g), av, bv, a_exact=ae, b_exact=be, **kw)

    # derived quantities -------------------------------------------------
    @property
    def infinite(self) -> bool:
        return math.isinf(self.b)

    @property
    def upper(self) -> float:
        """Working right end: ``b`` itself or the truncation cap."""
        return self.cfg.infinity_cap if self.infinite else self.b

    @property
    def width(self) -> float:
        return self.upper - self.a

    @property
    def inset(self) -> tuple[float, float]:
        eps = self.cfg.endpoint_eps * self.width
        return self.a + eps, self.upper - eps

    @cached_property
    def fp(self) -> Expr:
        return differentiate(self.f, self.var)

    @cached_property
    def gp(self) -> Expr:
        return differentiate(self.g, self.var)

    @cached_property
    def hopital(self) -> Expr:
        """``f'/g'`` as a simplified expression (for display and export)."""
        return simplify(BinOp("/", self.fp, self.gp))

    @cached_property
    def ratio(self) -> Expr:
        return BinOp("/", self.f, self.g)

    def with_interval(self, a: float, b: float, open_left: bool | None = None,
                      open_right: bool | None = None) -> "RatioProblem":
        keep_a = self.a_exact if a == self.a else None
        keep_b = self.b_exact if b == self.b else None
        return replace(self, a=a, b=b,
                       open_left=self.open_left if open_left is None else open_left,
                       open_right=self.open_right if open_right is None else open_right,
                       a_exact=keep_a, b_exact=keep_b)

    def describe(self) -> dict:
        return {
            "f": render(self.f),
            "g": render(self.g),
            "a": self.a,
            "b": "inf" if self.infinite else self.b,
            "open_left": self.open_left,
            "open_right": self.open_right,
            "hopital": render(self.hopital),
        }


# ---------------------------------------------------------------------------
# Evaluation context
# ---------------------------------------------------------------------------


class _Ctx:
    """Log-magnitude evaluation of the quantities the rules compare."""

    def __init__(self, p: RatioProblem):
        self.p = p
        self.cfg = p.cfg

    def sc(self, e: Expr, xs):
        return evaluate_scaled(e, np.atleast_1d(np.asarray(xs, dtype=float)), self.cfg, self.p.var)

    def val(self, e: Expr, xs) -> np.ndarray:
        return _from_scaled(*self.sc(e, xs))

    @staticmethod
    def _quot(num, den):
        (s1, l1), (s2, l2) = num, den
        with np.errstate(invalid="ignore"):
            s = np.where(s2 == 0, np.nan, s1 * s2)
            return s, np.where(s == 0, -np.inf, l1 - l2)

    @staticmethod
    def _prod(x, y):
        (s1, l1), (s2, l2) = x, y
        s = s1 * s2
        with np.errstate(invalid="ignore"):
            return s, np.where(s == 0, -np.inf, l1 + l2)

    def ratio_sc(self, xs):
        return self._quot(self.sc(self.p.f, xs), self.sc(self.p.g, xs))

    def hop_sc(self, xs):
        return self._quot(self.sc(self.p.fp, xs), self.sc(self.p.gp, xs))

    def _plain_quot(self, num: Expr, den: Expr, xs) -> np.ndarray:
        # a float division where both parts are ordinary numbers, log space elsewhere
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        s1, l1, v1 = evaluate_scaled(num, xs, self.cfg, self.p.var, plain=True)
        s2, l2, v2 = evaluate_scaled(den, xs, self.cfg, self.p.var, plain=True)
        out = _from_scaled(*self._quot((s1, l1), (s2, l2)))
        with np.errstate(all="ignore"):
            q = v1 / v2
            ok = np.isfinite(q) & (np.abs(q) > 1e-290) & (np.abs(q) < 1e290)
        return np.where(ok, q, out)

    def ratio(self, xs) -> np.ndarray:
        return self._plain_quot(self.p.f, self.p.g, xs)

    def hop(self, xs) -> np.ndarray:
        return self._plain_quot(self.p.fp, self.p.gp, xs)

    def w_rel(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Signed ``W / max(|f'g|, |fg'|)`` and the log-scale of ``f'g``."""
        p1 = self._prod(self.sc(self.p.fp, xs), self.sc(self.p.g, xs))
        p2 = self._prod(self.sc(self.p.f, xs), self.sc(self.p.gp, xs))
        s, lg = _scaled_add(p1, (-p2[0], p2[1]))
        top = np.maximum(p1[1], p2[1])
        with np.errstate(invalid="ignore", over="ignore"):
            rel = np.where(s == 0, 0.0, s * np.exp(np.minimum(lg - top, 0.0)))
        rel = np.where(np.isnan(p1[0]) | np.isnan(p2[0]), np.nan, rel)
        return rel, p1[1]

    def gap_sign(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """sign(B - A) and the relative size of that gap, via ``W``."""
        rel, _ = self.w_rel(xs)
        sg = self.sc(self.p.g, xs)[0] * self.sc(self.p.gp, xs)[0]
        return np.sign(rel) * sg, np.abs(rel)

    @cached_property
    def hop_log_derivative(self) -> Callable:
        """d/dx of the monotone transform used to segment ``B``."""
        p = self.p
        fpp = differentiate(p.fp, p.var)
        gpp = differentiate(p.gp, p.var)
        num = simplify(BinOp("-", BinOp("*", fpp, p.gp), BinOp("*", p.fp, gpp)))
        return lambda xs: self._quot(self.sc(num, xs), self._prod(self.sc(p.fp, xs), self.sc(p.gp, xs)))

    def hop_derivative_sign(self, xs) -> np.ndarray:
        """sign((f'/g')')."""
        s, _ = self.hop_log_derivative(xs)
        return s * self.hop_sc(xs)[0]

    # high precision, for limits that converge too slowly in doubles
    def exact_point(self, which: str):
        import mpmath as mp

        e = self.p.a_exact if which == "a" else self.p.b_exact
        x = self.p.a if which == "a" else self.p.b
        if e is not None:
            with mp.workdps(60):
                return evaluate_mp(e, 0, 60)
        return mp.mpf(x)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EndpointValue:
    """Value or one-sided limit of a quantity at an interval end."""

    value: float
    status: str  # value | limit | diverges | unstable | undefined
    method: str = "value"
    error: float = 0.0

    @property
    def known(self) -> bool:
        return self.status in ("value", "limit", "diverges")

    def to_dict(self) -> dict:
        v = self.value
        return {"value": v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan"),
                "status": self.status, "method": self.method, "error": self.error if math.isfinite(self.error) else None}


def _json_float(v: float):
    if v is None:
        return None
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass(frozen=True)
class TurningPoint:
    c: float
    sense: str  # down-to-up | up-to-down
    residual: float
    bracket: tuple[float, float]

    def to_dict(self) -> dict:
        return {"c": self.c, "sense": self.sense, "residual": self.residual, "bracket": list(self.bracket)}

    def mirrored(self, a: float, b: float) -> "TurningPoint":
        lo, hi = self.bracket
        return TurningPoint(a + b - self.c, self.sense, self.residual, (a + b - hi, a + b - lo))


@dataclass(frozen=True)
class HypothesisReport:
    g_sign: str
    g_changes: tuple[float, ...]
    gprime_sign: str
    gprime_changes: tuple[float, ...]
    hopital_segments: tuple[MonotoneSegment, ...] | None
    endpoint_data: dict
    strictness: str
    flat_stretches: tuple[tuple[float, float], ...] = ()
    errors: dict = field(default_factory=dict)

    @property
    def eligible(self) -> bool:
        return (self.g_sign in ("positive", "negative") and self.gprime_sign in ("positive", "negative")
                and self.hopital_segments is not None)

    @property
    def split_points(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.g_changes) | set(self.gprime_changes)))

    @property
    def breakpoints(self) -> tuple[float, ...]:
        segs = self.hopital_segments or ()
        return tuple(s.hi for s in segs[:-1])

    def to_dict(self) -> dict:
        return {
            "g_sign": self.g_sign,
            "g_changes": list(self.g_changes),
            "gprime_sign": self.gprime_sign,
            "gprime_changes": list(self.gprime_changes),
            "hopital_segments": None if self.hopital_segments is None else
            [s.to_dict() for s in self.hopital_segments],
            "endpoint_data": {k: {q: v.to_dict() for q, v in d.items()} for k, d in self.endpoint_data.items()},
            "strictness": self.strictness,
            "flat_stretches": [list(s) for s in self.flat_stretches],
            "split_points": list(self.split_points),
            "errors": dict(self.errors),
        }


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectedSegment:
    lo: float
    hi: float
    direction: str

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": _json_float(self.hi), "direction": self.direction}


class ShapeClass:
    """Base for verdicts; ``directions()`` lists the monotone stretches in order."""

    name = "shape"

    def directions(self) -> list[str]:
        raise NotImplementedError

    def turning_points(self) -> list[TurningPoint]:
        return []

    @property
    def changes(self) -> int:
        return max(len([d for d in self.directions() if d != FLAT]) - 1, 0)

    def to_dict(self) -> dict:
        return {"kind": self.name, "directions": self.directions(),
                "turning_points": [t.to_dict() for t in self.turning_points()]}

    def mirrored(self, a: float, b: float) -> "ShapeClass":
        raise NotImplementedError

    def __str__(self) -> str:
        tps = ", ".join(f"{t.c:.12g}" for t in self.turning_points())
        return f"{self.name}" + (f" (turning at {tps})" if tps else "")


@dataclass(frozen=True)
class Increasing(ShapeClass):
    name = "Increasing"

    def directions(self):
        return [UP]

    def mirrored(self, a, b):
        return Decreasing()


@dataclass(frozen=True)
class Decreasing(ShapeClass):
    name = "Decreasing"

    def directions(self):
        return [DOWN]

    def mirrored(self, a, b):
        return Increasing()


@dataclass(frozen=True)
class DownUp(ShapeClass):
    turning: TurningPoint
    name = "DownUp"

    def directions(self):
        return [DOWN, UP]

    def turning_points(self):
        return [self.turning]

    def mirrored(self, a, b):
        return DownUp(self.turning.mirrored(a, b))


@dataclass(frozen=True)
class UpDown(ShapeClass):
    turning: TurningPoint
    name = "UpDown"

    def directions(self):
        return [UP, DOWN]

    def turning_points(self):
        return [self.turning]

    def mirrored(self, a, b):
        return UpDown(self.turning.mirrored(a, b))


@dataclass(frozen=True)
class ConstantPrefix(ShapeClass):
    """``f = lam * g`` on ``[a, alpha]``; ``tail`` describes the rest (None if empty)."""

    alpha: float
    lam: float
    tail: ShapeClass | None = None
    name = "ConstantPrefix"

    def directions(self):
        return [FLAT] + (self.tail.directions() if self.tail else [])

    def turning_points(self):
        return self.tail.turning_points() if self.tail else []

    def to_dict(self):
        d = super().to_dict()
        d.update(alpha=_json_float(self.alpha), lam=self.lam, tail=self.tail.to_dict() if self.tail else None)
        return d

    def mirrored(self, a, b):
        if self.tail is None:
            return self
        raise NotImplementedError("mirroring a partial constant prefix")


@dataclass(frozen=True)
class Piecewise(ShapeClass):
    segments: tuple[DirectedSegment, ...]
    turns: tuple[TurningPoint, ...] = ()
    name = "Piecewise"

    def directions(self):
        return [s.direction for s in self.segments]

    def turning_points(self):
        return list(self.turns)

    def to_dict(self):
        d = super().to_dict()
        d["segments"] = [s.to_dict() for s in self.segments]
        return d

    def mirrored(self, a, b):
        segs = tuple(DirectedSegment(a + b - s.hi, a + b - s.lo, _flip(s.direction)) for s in reversed(self.segments))
        return Piecewise(segs, tuple(t.mirrored(a, b) for t in reversed(self.turns)))


def shape_from_runs(directions: Sequence[str], turns: Sequence[TurningPoint], edges: Sequence[float]) -> ShapeClass:
    """Canonical shape for alternating runs; ``edges`` has ``len(directions)+1`` entries."""
    if len(directions) == 1:
        return Increasing() if directions[0] == UP else Decreasing()
    if len(directions) == 2:
        return DownUp(turns[0]) if directions[0] == DOWN else UpDown(turns[0])
    segs = tuple(DirectedSegment(edges[i], edges[i + 1], d) for i, d in enumerate(directions))
    return Piecewise(segs, tuple(turns))


# ---------------------------------------------------------------------------
# Hypotheses
# ---------------------------------------------------------------------------


def _sign_scan(ctx: _Ctx, e: Expr, xs: np.ndarray) -> tuple[str, tuple[float, ...]]:
    s, _ = ctx.sc(e, xs)
    if np.isnan(s).any():
        raise DomainError(f"{render(e)} undefined on the probe grid", float(xs[np.isnan(s)][0]))
    nz = np.flatnonzero(s)
    if nz.size == 0:
        return "zero", ()
    changes = []
    for j, k in zip(nz[:-1], nz[1:]):
        if s[j] != s[k]:
            def fn(x):
                return float(_from_scaled(*ctx.sc(e, [x]))[0])
            try:
                changes.append(find_root(fn, xs[j], xs[k], ctx.cfg).root)
            except RootError:
                changes.append(0.5 * (xs[j] + xs[k]))
    if changes:
        return "mixed", tuple(float(c) for c in changes)
    return ("positive" if s[nz[0]] > 0 else "negative"), ()


def _endpoint(ctx: _Ctx, which: str, kind: str, p: RatioProblem | None = None,
              second_level: bool = True) -> EndpointValue:
    """Value of f, g, ratio (f/g) or hopital (f'/g') at an end, via limits when needed."""
    p = p or ctx.p
    cfg = p.cfg
    exprs = {"f": (p.f, None), "g": (p.g, None), "ratio": (p.f, p.g), "hopital": (p.fp, p.gp)}[kind]
    num, den = exprs

    def value_at(xs):
        if den is None:
            return ctx.val(num, xs)
        return _from_scaled(*ctx._quot(ctx.sc(num, xs), ctx.sc(den, xs)))

    at_inf = which == "b" and p.infinite
    open_end = p.open_left if which == "a" else p.open_right
    x = p.a if which == "a" else p.b
    if not at_inf and not open_end:
        v = float(value_at([x])[0])
        if math.isfinite(v):
            return EndpointValue(v, "value")
    side = "right" if which == "a" else "left"
    fn = lambda t: float(value_at([t])[0])  # noqa: E731
    hp_fn = None
    if not at_inf:
        import mpmath as mp

        exact = ctx.exact_point(which)
        sgn = 1 if which == "a" else -1
        target = num if den is None else BinOp("/", num, den)
        hp_fn = lambda h: evaluate_mp(target, exact + sgn * h, 60, p.var)  # noqa: E731
    h0 = min(1e-2 * max(1.0, abs(x)) if not at_inf else 1.0, 0.05 * p.width)
    try:
        lim = limit_at(fn, math.inf if at_inf else x, side, cfg, h0=h0, hp_fn=hp_fn)
    except (NumericsError, ZeroDivisionError, ValueError, OverflowError) as exc:
        return EndpointValue(math.nan, "undefined", str(exc))
    if lim.converged:
        return EndpointValue(lim.value, "limit", lim.method, lim.error)
    if lim.diverges:
        return EndpointValue(math.copysign(math.inf, lim.value), "diverges", lim.method, math.inf)
    if kind == "hopital" and second_level and not at_inf:
        # one more Hopital level, (f''/g''), when f'/g' itself is 0/0
        second = replace(p, f=p.fp, g=p.gp)
        sctx = _Ctx(second)
        if _endpoint(sctx, which, "f", second_level=False).value == 0 == _endpoint(sctx, which, "g",
                                                                                    second_level=False).value:
            sec = _endpoint(sctx, which, "hopital", second_level=False)
            if sec.known:
                return replace(sec, method="second-level-" + sec.method)
    return EndpointValue(lim.value, "unstable", lim.method, lim.error)


def check_hypotheses(p: RatioProblem) -> HypothesisReport:
    """Sign of ``g`` and ``g'``, monotone stretches of ``f'/g'``, endpoint data.

    Failures are captured per facet in ``errors``; a failed facet is reported
    as ``unknown`` and makes the problem ineligible.
    """
    ctx = _Ctx(p)
    cfg = p.cfg
    lo, hi = p.inset
    xs = np.linspace(lo, hi, cfg.grid_n)
    errors: dict[str, str] = {}

    def facet(name, fn, fallback):
        try:
            return fn()
        except (NumericsError, ValueError, ZeroDivisionError, OverflowError) as exc:
            errors[name] = str(exc)
            return fallback

    f_sign, _ = facet("f_domain", lambda: _sign_scan(ctx, p.f, xs), ("unknown", ()))
    g_sign, g_changes = facet("g_sign", lambda: _sign_scan(ctx, p.g, xs), ("unknown", ()))
    gp_sign, gp_changes = facet("gprime_sign", lambda: _sign_scan(ctx, p.gp, xs), ("unknown", ()))
    segments = None
    flats: tuple[tuple[float, float], ...] = ()
    strict = "unknown"
    if gp_sign in ("positive", "negative") and g_sign in ("positive", "negative") and f_sign != "unknown":
        seg = facet("hopital", lambda: _hop_segments(ctx, lo, hi), None)
        if seg is not None:
            segments = tuple(seg)
            nonstrict = [s for s in segments if not s.strict or s.direction == FLAT]
            flats = tuple((s.lo, s.hi) for s in nonstrict)
            strict = "strict" if not nonstrict else "non-strict"
    endpoint_data = {}
    for which in ("a", "b"):
        endpoint_data[which] = {}
        for kind in ("f", "g", "ratio", "hopital"):
            endpoint_data[which][kind] = facet(f"endpoint_{which}_{kind}", lambda: _endpoint(ctx, which, kind),
                                               EndpointValue(math.nan, "undefined"))
    return HypothesisReport(g_sign, g_changes, gp_sign, gp_changes, segments, endpoint_data, strict, flats, errors)


def _hop_segments(ctx: _Ctx, lo: float, hi: float) -> list[MonotoneSegment]:
    """Segment ``f'/g'`` via an order-preserving log transform (underflow-proof)."""
    p = ctx.p
    probe = np.linspace(lo, hi, p.cfg.grid_n)
    s, lg = ctx.hop_sc(probe)
    if np.isnan(s).any():
        raise DomainError("f'/g' undefined on the probe grid", float(probe[np.isnan(s)][0]))
    nonzero = s[s != 0]
    if nonzero.size == s.size and (np.all(nonzero > 0) or np.all(nonzero < 0)):
        sign = float(nonzero[0])

        def fn(xs):
            return sign * ctx.hop_sc(xs)[1]

        def dfn(xs):
            ds, dl = ctx.hop_log_derivative(xs)
            return sign * _from_scaled(ds, np.minimum(dl, 700.0))
    else:
        def fn(xs):
            return softlog(*ctx.hop_sc(xs))

        def dfn(xs):
            # d softlog(B) = (B'/B) * B / (1 + |B|)
            ds, dl = ctx.hop_log_derivative(xs)
            hs, hl = ctx.hop_sc(xs)
            with np.errstate(over="ignore"):
                damp = hl - np.logaddexp(0.0, hl)
            return _from_scaled(ds * hs, np.minimum(dl + damp, 700.0))
    segs = segment_monotone(fn, lo, hi, p.cfg, dfn=dfn)
    # stretch the outer segments over the inset so the segmentation tiles [a, upper]
    first, last = segs[0], segs[-1]
    segs[0] = replace(first, lo=p.a)
    segs[-1] = replace(segs[-1] if len(segs) > 1 else segs[0], hi=p.upper)
    return segs


# ---------------------------------------------------------------------------
# Boundary criterion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryCheck:
    """Ordering of ``f/g`` against ``f'/g'`` at ``x``.

    ``relation`` is ``le`` (ratio <= hopital), ``ge`` or ``inconclusive``;
    ``equal`` marks a tie that persists on a neighbourhood (f = lam*g there).
    ``method`` tells how it was decided: ``values``, ``limits`` or
    ``neighborhood`` (values tied within margin; decided by the sign of
    ``W`` just inside the interval).
    """

    endpoint: str
    x: float
    ratio: EndpointValue
    hopital: EndpointValue
    relation: str
    gap: float
    method: str
    equal: bool = False

    def to_dict(self) -> dict:
        return {"endpoint": self.endpoint, "x": _json_float(self.x), "ratio": self.ratio.to_dict(),
                "hopital": self.hopital.to_dict(), "relation": self.relation, "gap": _json_float(self.gap),
                "method": self.method, "equal": self.equal}

    def holds(self, wanted: str) -> bool | None:
        """Whether ``ratio <wanted> hopital`` holds; None when undecided."""
        if self.equal:
            return True
        if self.relation == "inconclusive":
            return None
        return self.relation == wanted


def _compare_at(ctx: _Ctx, x: float, inward: int, width: float, label: str,
                ratio_v: EndpointValue | None = None, hop_v: EndpointValue | None = None) -> BoundaryCheck:
    cfg = ctx.cfg
    margin = cfg.margin
    method = "values"
    if ratio_v is None or hop_v is None:
        ratio_v = EndpointValue(float(ctx.ratio([x])[0]), "value")
        hop_v = EndpointValue(float(ctx.hop([x])[0]), "value")
    if ratio_v.status == "limit" or hop_v.status in ("limit", "diverges") or ratio_v.status == "diverges":
        method = "limits"
    A, B = ratio_v.value, hop_v.value
    decided = None
    gap = math.nan
    if ratio_v.known and hop_v.known and not (math.isnan(A) or math.isnan(B)):
        if math.isinf(A) or math.isinf(B):
            if A != B:
                decided = "le" if A < B else "ge"
                gap = math.inf
        else:
            # for plain values, compare through W = f'g - f g', which needs no division
            finite_point = method == "values" and math.isfinite(x)
            if finite_point:
                rel, _ = ctx.w_rel([x])
                sgn = ctx.gap_sign([x])[0][0]
                gap = float(abs(rel[0]))
                if math.isfinite(gap) and gap > margin and sgn != 0:
                    decided = "le" if sgn > 0 else "ge"
            else:
                scale = max(abs(A), abs(B))
                floor = 4.0 * ((ratio_v.error or 0.0) + (hop_v.error or 0.0))
                gap = abs(B - A) / scale if scale > 0 else 0.0
                if abs(B - A) > margin * scale + floor:
                    decided = "le" if A < B else "ge"
    if decided is not None:
        return BoundaryCheck(label, x, ratio_v, hop_v, decided, gap, method)
    # tie (or endpoint values unavailable): look just inside the interval
    signs = []
    for k in range(6):
        d = width * 1e-2 * 4.0 ** -k
        t = x + inward * d
        try:
            sgn, rel = ctx.gap_sign([t])
        except NumericsError:
            continue
        if np.isfinite(rel[0]) and rel[0] > margin and sgn[0] != 0:
            signs.append(int(sgn[0]))
    if not signs:
        return BoundaryCheck(label, x, ratio_v, hop_v, "inconclusive", gap, "neighborhood", equal=True)
    if all(s == signs[-1] for s in signs):
        return BoundaryCheck(label, x, ratio_v, hop_v, "le" if signs[-1] > 0 else "ge", gap, "neighborhood")
    return BoundaryCheck(label, x, ratio_v, hop_v, "inconclusive", gap, "neighborhood")


def boundary_criterion(p: RatioProblem, endpoint: str) -> BoundaryCheck:
    """Compare ``(f/g)`` with ``(f'/g')`` at ``a`` or ``b`` (limits at 0/0 ends).

    A relative gap below ``cfg.margin`` is not decided from the endpoint
    values; see :class:`BoundaryCheck` for how the tie is handled.
    """
    if endpoint not in ("a", "b"):
        raise ValueError("endpoint must be 'a' or 'b'")
    ctx = _Ctx(p)
    return _boundary(ctx, endpoint)


def _boundary(ctx: _Ctx, endpoint: str) -> BoundaryCheck:
    p = ctx.p
    x = p.a if endpoint == "a" else p.b
    ratio_v = _endpoint(ctx, endpoint, "ratio")
    hop_v = _endpoint(ctx, endpoint, "hopital")
    xn = x if math.isfinite(x) else p.upper
    use_values = ratio_v.status == "value" and hop_v.status == "value"
    if use_values:
        return _compare_at(ctx, xn, 1 if endpoint == "a" else -1, p.width, endpoint)
    return _compare_at(ctx, xn, 1 if endpoint == "a" else -1, p.width, endpoint, ratio_v, hop_v)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass
class Certificate:
    """Which rule and case fired, and the numbers that support it."""

    rule: str
    case: list[str] = field(default_factory=list)
    endpoint_checks: list[BoundaryCheck] = field(default_factory=list)
    segments: list[MonotoneSegment] = field(default_factory=list)
    turning_points: list[TurningPoint] = field(default_factory=list)
    bound: int | None = None
    notes: list[str] = field(default_factory=list)
    parts: list["Certificate"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "case": list(self.case),
            "endpoint_checks": [c.to_dict() for c in self.endpoint_checks],
            "segments": [s.to_dict() for s in self.segments],
            "turning_points": [t.to_dict() for t in self.turning_points],
            "bound": self.bound,
            "notes": list(self.notes),
            "parts": [c.to_dict() for c in self.parts],
        }


@dataclass
class Classification:
    """Outcome of :func:`classify`.

    ``status`` is ``certified``, ``oracle-assisted`` (rules inconclusive,
    shape observed by sampling), or ``ineligible``.
    """

    shape: ShapeClass | None
    certificate: Certificate
    report: HypothesisReport | None
    status: str
    reasons: list[str] = field(default_factory=list)
    interval: tuple[float, float] = (0.0, 1.0)

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "shape": self.shape.to_dict() if self.shape else None,
            "certificate": self.certificate.to_dict(),
            "reasons": list(self.reasons),
            "interval": [self.interval[0], _json_float(self.interval[1])],
        }


@dataclass
class _Piece:
    directions: list[str]
    turns: list[TurningPoint]
    case: str
    checks: list[BoundaryCheck]
    inconclusive: bool = False
    note: str | None = None


def _tie_zero(v: EndpointValue, scale: float) -> bool:
    return v.known and math.isfinite(v.value) and abs(v.value) <= 1e-12 * max(scale, 1e-300) + 4 * v.error


def _turning_point(ctx: _Ctx, lo: float, hi: float, width: float) -> TurningPoint | None:
    """Root of ``W`` strictly inside ``(lo, hi)``."""
    cfg = ctx.cfg
    eps = max(cfg.endpoint_eps * width, 8 * np.finfo(float).eps * max(abs(lo), abs(hi), 1.0))
    xs = np.linspace(lo + eps, hi - eps, 257)
    rel, _ = ctx.w_rel(xs)
    ok = np.isfinite(rel)
    xs, rel = xs[ok], rel[ok]
    sg = np.sign(rel)
    idx = [i for i in range(len(xs) - 1) if sg[i] != 0 and sg[i + 1] != 0 and sg[i] != sg[i + 1]]
    zeros = np.flatnonzero(sg == 0)
    if not idx:
        if zeros.size:
            c = float(xs[zeros[0]])
            return TurningPoint(c, "down-to-up", 0.0, (c, c))
        return None
    i = idx[0]

    def fn(x):
        return float(ctx.w_rel([x])[0][0])
    r = find_root(fn, float(xs[i]), float(xs[i + 1]), cfg)
    a_dir = UP if sg[i] > 0 else DOWN
    sense = "up-to-down" if a_dir == UP else "down-to-up"
    return TurningPoint(r.root, sense, abs(fn(r.root)), r.bracket)


def _classify_piece(ctx: _Ctx, seg: MonotoneSegment, g_up: bool, first: bool, last: bool,
                    end_checks: dict) -> _Piece:
    """One stretch of monotone f'/g': the case table in g-increasing orientation."""
    p = ctx.p
    lo, hi = seg.lo, seg.hi
    hop_dir = seg.direction if seg.direction != FLAT else UP
    d_or = hop_dir if g_up else _flip(hop_dir)
    convex = d_or == UP
    # origin: where g is smallest
    o_is_lo = g_up
    o_is_end = first if o_is_lo else last
    o_label = ("a" if o_is_lo else "b") if o_is_end else None
    width = hi - lo

    def check(at_lo: bool) -> BoundaryCheck:
        is_end = first if at_lo else last
        x = lo if at_lo else hi
        key = ("lo" if at_lo else "hi", x)
        if key in end_checks:
            return end_checks[key]
        if is_end:
            c = _boundary(ctx, "a" if at_lo else "b")
            if at_lo is False and p.infinite:
                c = replace(c, x=p.upper)
        else:
            c = _compare_at(ctx, x, 1 if at_lo else -1, width, f"b={x:.12g}")
        end_checks[key] = c
        return c

    def orient(seq: list[str]) -> list[str]:
        return seq if g_up else [_flip(d) for d in reversed(seq)]

    labels = {"i": "(2)i", "ii": "(2)ii"} if g_up else {"i": "(2)ii", "ii": "(2)i"}
    checks: list[BoundaryCheck] = []
    # case (1): g vanishes at the origin
    if o_is_end:
        gv = _endpoint(ctx, o_label, "g")
        g_scale = float(np.nanmax(np.abs(ctx.val(p.g, np.linspace(*p.inset, 64)))))
        if _tie_zero(gv, g_scale):
            fv = _endpoint(ctx, o_label, "f")
            f_scale = float(np.nanmax(np.abs(ctx.val(p.f, np.linspace(*p.inset, 64)))))
            f_zero = _tie_zero(fv, f_scale)
            if fv.known and (f_zero or (fv.value < 0 if convex else fv.value > 0)):
                return _Piece(orient([UP if convex else DOWN]), [], "(1)", checks,
                              note=f"g({o_label})=0, f({o_label})={fv.value:.3g}")
            g_origin_zero = True
        else:
            g_origin_zero = False
    else:
        g_origin_zero = False
    want_o = "le" if convex else "ge"
    if not g_origin_zero:
        co = check(o_is_lo)
        checks.append(co)
        if co.holds(want_o):
            return _Piece(orient([UP if convex else DOWN]), [], labels["i"], checks)
    else:
        co = None
    cf = check(not o_is_lo)
    checks.append(cf)
    want_far = "ge" if convex else "le"
    if cf.holds(want_far):
        return _Piece(orient([DOWN if convex else UP]), [], labels["ii"], checks)
    if (co is not None and co.holds(want_o) is None) or cf.holds(want_far) is None:
        return _Piece([], [], "inconclusive", checks, inconclusive=True)
    tp = _turning_point(ctx, lo, hi, p.width)
    if tp is None:
        return _Piece([], [], "(2)iii", checks, inconclusive=True, note="turning point not bracketed")
    seq = orient([DOWN, UP] if convex else [UP, DOWN])
    tp = replace(tp, sense="down-to-up" if seq[0] == DOWN else "up-to-down")
    return _Piece(seq, [tp], "(2)iii", checks)


def _constant_prefix(ctx: _Ctx, lo: float, hi: float) -> tuple[float, float] | None:
    """Maximal start ``[a, alpha]`` on which f/g is constant (f = lam*g)."""
    p = ctx.p
    xs = np.linspace(lo, hi, p.cfg.grid_n)
    r = ctx.ratio(xs)
    if not np.isfinite(r[:3]).all():
        return None
    lam = r[0]
    tol = 1e-10 * max(1.0, abs(lam))
    off = np.flatnonzero(~(np.abs(r - lam) <= tol))
    if off.size == 0:
        return p.upper, float(lam)
    k = int(off[0])
    if k < 3:
        return None
    a0, a1 = xs[k - 1], xs[k]
    for _ in range(60):
        m = 0.5 * (a0 + a1)
        if abs(ctx.ratio([m])[0] - lam) <= tol:
            a0 = m
        else:
            a1 = m
    if not _exactly_constant(ctx, lo, float(a0)):
        return None
    return float(a0), float(lam)


def _exactly_constant(ctx: _Ctx, lo: float, hi: float) -> bool:
    """Float flatness can be a high-order tangency; confirm f/g is constant at 50 digits."""
    p = ctx.p
    ratio = BinOp("/", p.f, p.g)
    try:
        r1 = evaluate_mp(ratio, lo + 0.25 * (hi - lo), 50, p.var)
        r2 = evaluate_mp(ratio, lo + 0.75 * (hi - lo), 50, p.var)
    except (NumericsError, ValueError, ZeroDivisionError):
        return False
    scale = max(abs(r1), abs(r2), 1e-300)
    return float(abs(r1 - r2) / scale) <= 1e-30


def oscillation_bound(p: RatioProblem, report: HypothesisReport | None = None) -> "OscillationProfile":
    """Upper bound on the direction changes of f/g from those of f'/g'.

    ``n`` breakpoints give at most ``n`` changes when g vanishes at its
    small end and f has the sign that makes the first stretch monotone
    there; otherwise at most ``n + 1``.
    """
    report = report or check_hypotheses(p)
    if not report.eligible:
        raise IneligibleError("g and g' must keep one sign; split at " +
                              ", ".join(f"{s:.12g}" for s in report.split_points))
    segs = list(report.hopital_segments)
    n = len(segs) - 1
    g_up = (report.gprime_sign == "positive") == (report.g_sign == "positive")
    ctx = _Ctx(_positive_g(p, report))
    origin = "a" if g_up else "b"
    first = segs[0] if g_up else segs[-1]
    d_or = first.direction if g_up else _flip(first.direction)
    conv = 1.0 if d_or in (UP, FLAT) else -1.0
    gv = _endpoint(ctx, origin, "g")
    fv = _endpoint(ctx, origin, "f")
    g_scale = float(np.nanmax(np.abs(ctx.val(ctx.p.g, np.linspace(*p.inset, 64)))))
    f_scale = float(np.nanmax(np.abs(ctx.val(ctx.p.f, np.linspace(*p.inset, 64)))))
    tight = _tie_zero(gv, g_scale) and (fv.known and (_tie_zero(fv, f_scale) or fv.value * conv <= 0))
    bound = n if tight else n + 1
    senses = []
    for left, right in zip(segs[:-1], segs[1:]):
        senses.append("up-to-down" if left.direction == UP else "down-to-up")
    return OscillationProfile(n, bound, tuple(senses), tuple(s.hi for s in segs[:-1]), conv > 0)


@dataclass(frozen=True)
class OscillationProfile:
    n: int
    bound: int
    senses: tuple[str, ...]
    breakpoints: tuple[float, ...]
    first_convex: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _positive_g(p: RatioProblem, report: HypothesisReport) -> RatioProblem:
    if report.g_sign == "negative":
        return replace(p, f=simplify(Neg(p.f)), g=simplify(Neg(p.g)))
    return p


def _stitch(pieces: list[tuple[float, float, _Piece]]) -> tuple[list[str], list[TurningPoint], list[float], list[str]]:
    """Merge per-stretch run lists into alternating runs, inserting turning points at joints."""
    dirs: list[str] = []
    turns: list[TurningPoint] = []
    edges: list[float] = []
    notes: list[str] = []
    for lo, hi, pc in pieces:
        local_edges = [lo] + [t.c for t in pc.turns] + [hi]
        for k, d in enumerate(pc.directions):
            if dirs and dirs[-1] == d:
                edges[-1] = local_edges[k + 1]
                continue
            if dirs:
                if k == 0:
                    # direction flips exactly at a stretch boundary
                    turns.append(TurningPoint(lo, "up-to-down" if dirs[-1] == UP else "down-to-up", 0.0, (lo, lo)))
                    notes.append(f"turning point at breakpoint {lo:.12g}")
                else:
                    turns.append(pc.turns[k - 1])
            if not dirs:
                edges.append(local_edges[k])
            dirs.append(d)
            edges.append(local_edges[k + 1])
    return dirs, turns, edges, notes


def _tail_check(ctx: _Ctx, last_dir: str, g_up: bool, far_relation: str | None) -> list[str]:
    """For b = inf: confirm at 2B and 4B what was established at the cap B."""
    p = ctx.p
    cap = p.cfg.infinity_cap
    xs = np.array([cap, 2 * cap, 4 * cap])
    problems = []
    gs = ctx.sc(p.g, xs)[0]
    gps = ctx.sc(p.gp, xs)[0]
    if len(set(gs)) != 1 or len(set(gps)) != 1:
        problems.append("sign of g or g' changes beyond the cap")
    hd = ctx.hop_derivative_sign(xs)
    want = 1.0 if last_dir == UP else -1.0
    if not np.all((hd == want) | (hd == 0)):
        problems.append("f'/g' changes direction beyond the cap")
    if far_relation in ("le", "ge"):
        sgn, rel = ctx.gap_sign(xs)
        rel_ok = [("le" if s > 0 else "ge") == far_relation for s, r in zip(sgn, rel) if r > p.cfg.margin]
        if not all(rel_ok):
            problems.append("boundary comparison at the cap does not persist on the ladder")
    return problems


def classify(p: RatioProblem, oracle_fallback: bool = True, report: HypothesisReport | None = None) -> Classification:
    """Shape of f/g certified by the monotone-rule case analysis.

    Stretches of monotone f'/g' are classified one by one; a single stretch
    is the plain rule, several make the oscillation rule.  If any boundary
    comparison stays undecided, the shape is taken from the sampling oracle
    and flagged ``oracle-assisted``.
    """
    report = report or check_hypotheses(p)
    interval = (p.a, p.b)
    if report.g_sign not in ("positive", "negative") or report.gprime_sign not in ("positive", "negative") \
            or report.hopital_segments is None:
        reasons = []
        if report.g_sign not in ("positive", "negative"):
            reasons.append(f"g is {report.g_sign} on the interval")
        if report.gprime_sign not in ("positive", "negative"):
            reasons.append(f"g' is {report.gprime_sign} on the interval")
        if report.split_points:
            reasons.append("split at " + ", ".join(f"{s:.12g}" for s in report.split_points))
        for k, v in report.errors.items():
            reasons.append(f"{k}: {v}")
        return Classification(None, Certificate("ineligible"), report, "ineligible", reasons, interval)
    q = _positive_g(p, report)
    ctx = _Ctx(q)
    notes = []
    if q is not p:
        notes.append("g < 0: analysed as (-f)/(-g)")
    g_up = report.gprime_sign == ("positive" if report.g_sign == "positive" else "negative")
    segs = list(report.hopital_segments)
    rule = "lhopital-increasing-g" if g_up else "lhopital-decreasing-g"
    if len(segs) > 1:
        rule = "oscillation"
    cert = Certificate(rule, segments=segs, notes=notes)
    try:
        cert.bound = oscillation_bound(q, report).bound
    except NumericsError as exc:
        notes.append(f"oscillation bound unavailable: {exc}")

    # f = lam*g prefix: only possible when f'/g' is not strictly monotone at the start
    if g_up and (not segs[0].strict or segs[0].direction == FLAT):
        pref = _constant_prefix(ctx, *q.inset)
        if pref is not None:
            alpha, lam = pref
            if alpha >= q.inset[1] - 1e-12 * q.width:
                cert.rule = "constant-multiple"
                cert.case = ["lambda-g"]
                return Classification(ConstantPrefix(p.b, lam, None), cert, report, "certified", [], interval)
            sub = classify(p.with_interval(alpha, p.b, open_left=True), oracle_fallback)
            cert.rule = "constant-multiple"
            cert.case = ["lambda-g"] + sub.certificate.case
            cert.parts = [sub.certificate]
            return Classification(ConstantPrefix(alpha, lam, sub.shape), cert, report, sub.status, sub.reasons,
                                  interval)

    end_checks: dict = {}
    pieces = []
    inconclusive = False
    for i, seg in enumerate(segs):
        try:
            pc = _classify_piece(ctx, seg, g_up, i == 0, i == len(segs) - 1, end_checks)
        except (NumericsError, ValueError) as exc:
            pc = _Piece([], [], "error", [], inconclusive=True, note=str(exc))
        pieces.append((seg.lo, seg.hi, pc))
        cert.case.append(pc.case)
        for c in pc.checks:
            if c not in cert.endpoint_checks:
                cert.endpoint_checks.append(c)
        if pc.note:
            cert.notes.append(f"[{seg.lo:.6g}, {seg.hi:.6g}] {pc.note}")
        inconclusive |= pc.inconclusive
    if not inconclusive:
        dirs, turns, edges, stitch_notes = _stitch(pieces)
        cert.notes.extend(stitch_notes)
        cert.turning_points = turns
        shape = shape_from_runs(dirs, turns, edges)
        status = "certified"
        reasons: list[str] = []
        if q.infinite:
            far = pieces[-1][2].checks[-1].relation if pieces[-1][2].checks else None
            tail = _tail_check(ctx, segs[-1].direction, g_up, far)
            cert.notes.append("tail ladder " + ("settled" if not tail else "not settled: " + "; ".join(tail)))
            if tail:
                status = "oracle-assisted"
                reasons.extend(tail)
        if report.strictness == "non-strict":
            cert.notes.append("f'/g' has flat stretches; monotonicity may be non-strict there")
        return Classification(shape, cert, report, status, reasons, interval)
    reasons = ["boundary criterion inconclusive on at least one stretch"]
    if not oracle_fallback:
        return Classification(None, cert, report, "inconclusive", reasons, interval)
    from .oracle import detect_shape, sample_ratio

    obs = detect_shape(sample_ratio(p, max(p.cfg.grid_n, 4096)))
    cert.rule = "oracle-assisted"
    return Classification(obs.shape, cert, report, "oracle-assisted", reasons, interval)


def classify_split(p: RatioProblem, oracle_fallback: bool = True) -> Classification:
    """Split where g or g' changes sign, classify each piece, stitch the verdicts."""
    report = check_hypotheses(p)
    points = [s for s in report.split_points if p.a < s < p.upper]
    if not points:
        return classify(p, oracle_fallback, report)
    edges = [p.a] + points + [p.b]
    parts = []
    for i in range(len(edges) - 1):
        sub = p.with_interval(edges[i], edges[i + 1], open_left=True if i > 0 else p.open_left,
                              open_right=True if i < len(edges) - 2 else p.open_right)
        parts.append(classify(sub, oracle_fallback))
    cert = Certificate("split", notes=["split at " + ", ".join(f"{s:.12g}" for s in points)],
                       parts=[c.certificate for c in parts])
    statuses = {c.status for c in parts}
    if any(c.shape is None for c in parts):
        return Classification(None, cert, report, "inconclusive" if "ineligible" not in statuses else "ineligible",
                              [r for c in parts for r in c.reasons], (p.a, p.b))
    pieces = []
    for c, lo, hi in zip(parts, edges[:-1], edges[1:]):
        hi_w = p.upper if math.isinf(hi) else hi
        pieces.append((lo, hi_w, _Piece(_directions_only(c.shape), list(c.shape.turning_points()), "", [])))
    dirs, turns, ed, notes = _stitch(pieces)
    cert.notes.extend(notes)
    cert.turning_points = turns
    cert.case = [x for c in parts for x in c.certificate.case]
    status = "certified" if statuses == {"certified"} else "oracle-assisted"
    return Classification(shape_from_runs(dirs, turns, ed), cert, report, status,
                          [r for c in parts for r in c.reasons], (p.a, p.b))


def _directions_only(shape: ShapeClass) -> list[str]:
    d = [x for x in shape.directions() if x != FLAT]
    if not d:
        raise ValueError("constant pieces cannot be stitched")
    return d


# ---------------------------------------------------------------------------
# Oscillation rules
# ---------------------------------------------------------------------------


def _require_increasing_g(report: HypothesisReport) -> None:
    if report.g_sign != "positive" or report.gprime_sign != "positive":
        raise IneligibleError(f"needs g > 0 and g' > 0 (g is {report.g_sign}, g' is {report.gprime_sign})")
    if report.hopital_segments is None:
        raise IneligibleError("f'/g' could not be segmented: " + "; ".join(report.errors.values()))


@dataclass(frozen=True)
class ExtremumResult:
    location: float
    value: float
    kind: str  # maximum | minimum
    shape: ShapeClass
    certificate: Certificate
    certified: bool

    def to_dict(self) -> dict:
        return {"location": self.location, "value": self.value, "kind": self.kind,
                "shape": self.shape.to_dict(), "certificate": self.certificate.to_dict(),
                "certified": self.certified}


def extremum_certificate(p: RatioProblem) -> ExtremumResult:
    """Unique global maximum (minimum) of f/g when f'/g' rises then falls (falls then rises)."""
    report = check_hypotheses(p)
    _require_increasing_g(report)
    segs = report.hopital_segments
    dirs = [s.direction for s in segs]
    if len(segs) != 2 or FLAT in dirs:
        raise IneligibleError(f"f'/g' must change direction exactly once; stretches: {dirs}")
    kind = "maximum" if dirs[0] == UP else "minimum"
    cls = classify(p, oracle_fallback=False, report=report)
    if cls.shape is None:
        raise IneligibleError("case analysis inconclusive: " + "; ".join(cls.reasons))
    ctx = _Ctx(p)
    shape = cls.shape
    if isinstance(shape, (UpDown, DownUp)):
        loc = shape.turning.c
        value = float(ctx.ratio([loc])[0])
    else:
        at_right = (shape.directions()[0] == UP) == (kind == "maximum")
        which = "b" if at_right else "a"
        ev = _endpoint(ctx, which, "ratio")
        loc = p.b if at_right else p.a
        value = ev.value
    cert = cls.certificate
    cert.rule = "single-change-extremum"
    return ExtremumResult(loc, value, kind, shape, cert, cls.certified)


@dataclass(frozen=True)
class CertifyResult:
    status: str  # certified-increasing | certified-decreasing | not-certified | inconclusive
    reasons: tuple[str, ...]
    checks: tuple[BoundaryCheck, ...]
    certificate: Certificate
    constant: bool = False

    @property
    def certified(self) -> bool:
        return self.status.startswith("certified")

    def to_dict(self) -> dict:
        return {"status": self.status, "reasons": list(self.reasons), "checks": [c.to_dict() for c in self.checks],
                "certificate": self.certificate.to_dict(), "constant": self.constant}


def _boundary_certify(p: RatioProblem, changes: int, rule: str) -> CertifyResult:
    report = check_hypotheses(p)
    _require_increasing_g(report)
    segs = report.hopital_segments
    ctx = _Ctx(p)
    cert = Certificate(rule, segments=list(segs))
    flat = len(segs) == 1 and segs[0].direction == FLAT
    if flat:
        pref = _constant_prefix(ctx, *p.inset)
        if changes == 1 and pref is not None and pref[0] >= p.inset[1] - 1e-12 * p.width:
            cert.notes.append(f"f = {pref[1]:.12g} g: both conditions hold with equality")
            return CertifyResult("certified-increasing", ("ratio is constant",), (), cert, constant=True)
        return CertifyResult("inconclusive", ("f'/g' is constant: no direction changes to locate",), (), cert)
    dirs = [s.direction for s in segs]
    if len(segs) != changes + 1:
        raise IneligibleError(f"f'/g' must change direction exactly {changes} time(s); stretches: {dirs}")
    want = "le" if dirs[0] == UP else "ge"
    target = "increasing" if dirs[0] == UP else "decreasing"
    left = _boundary(ctx, "a")
    if changes == 1:
        right = _boundary(ctx, "b")
        right_label = "b"
    else:
        b2 = segs[1].hi
        right = _compare_at(ctx, b2, -1, segs[1].hi - segs[1].lo, f"b2={b2:.12g}")
        right_label = f"b2={b2:.12g}"
    checks = (left, right)
    cert.endpoint_checks = list(checks)
    reasons = []
    verdicts = []
    for c, label in ((left, "a"), (right, right_label)):
        h = c.holds(want)
        verdicts.append(h)
        sign = ">=" if want == "le" else "<="
        if h is None:
            reasons.append(f"at {label}: comparison within margin ({c.method})")
        elif h:
            reasons.append(f"at {label}: f'g {sign} f g' holds ({c.method})")
        else:
            reasons.append(f"at {label}: f'g {sign} f g' fails")
    if all(verdicts):
        return CertifyResult(f"certified-{target}", tuple(reasons), checks, cert,
                             constant=all(c.equal for c in checks))
    if any(v is False for v in verdicts):
        return CertifyResult("not-certified", tuple(reasons), checks, cert)
    return CertifyResult("inconclusive", tuple(reasons), checks, cert)


def one_change_certify(p: RatioProblem) -> CertifyResult:
    """f/g monotone although f'/g' changes direction once, from two endpoint inequalities.

    With f'/g' rising first: f'g >= f g' at ``a`` and at ``b`` gives f/g
    increasing.  With f'/g' falling first both inequalities flip and f/g is
    decreasing.
    """
    return _boundary_certify(p, 1, "one-change-boundary")


def two_change_certify(p: RatioProblem) -> CertifyResult:
    """As :func:`one_change_certify` for two changes, checking ``a`` and the second breakpoint."""
    return _boundary_certify(p, 2, "two-change-boundary")


# ---------------------------------------------------------------------------
# Reflection
# ---------------------------------------------------------------------------


def reflect(p: RatioProblem) -> RatioProblem:
    """The problem under ``x -> a + b - x`` (finite ``b`` only)."""
    if p.infinite:
        raise ValueError("reflection needs a finite interval")
    if p.a_exact is not None or p.b_exact is not None:
        s_a = p.a_exact if p.a_exact is not None else Const(p.a)
        s_b = p.b_exact if p.b_exact is not None else Const(p.b)
        total = simplify(BinOp("+", s_a, s_b))
    else:
        total = Const(p.a + p.b)
    image = BinOp("-", total, Var(p.var))
    f = simplify(substitute(p.f, p.var, image))
    g = simplify(substitute(p.g, p.var, image))
    return replace(p, f=f, g=g, open_left=p.open_right, open_right=p.open_left)


def mirror_shape(shape: ShapeClass, a: float, b: float) -> ShapeClass:
    return shape.mirrored(a, b)


__all__ = [
    "RatioProblem", "HypothesisReport", "EndpointValue", "TurningPoint", "BoundaryCheck", "Certificate",
    "Classification", "ShapeClass", "Increasing", "Decreasing", "DownUp", "UpDown", "ConstantPrefix",
    "Piecewise", "DirectedSegment", "OscillationProfile", "ExtremumResult", "CertifyResult", "IneligibleError",
    "check_hypotheses", "boundary_criterion", "classify", "classify_split", "oscillation_bound",
    "extremum_certificate", "one_change_certify", "two_change_certify", "reflect", "mirror_shape",
    "parse_bound", "shape_from_runs", "UP", "DOWN", "FLAT",
]

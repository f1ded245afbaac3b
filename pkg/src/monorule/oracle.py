"""Brute-force verifier: observe the shape of f/g by dense sampling.

Nothing here uses the rule engine's reasoning.  The quotient is sampled on
a uniform grid, direction changes are read off with a hysteresis threshold,
and the result is compared against a verdict from :mod:`monorule.shape`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import qmc

from .expr import BinOp, Expr
from .numerics import DomainError, NumericsError, evaluate_array, evaluate_mp
from .shape import (
    DOWN,
    FLAT,
    UP,
    ConstantPrefix,
    RatioProblem,
    ShapeClass,
    TurningPoint,
    _Ctx,
    _endpoint,
    _json_float,
    shape_from_runs,
)

DEFAULT_HYSTERESIS = 1e-9
_GUARD_INDICES = (0, 1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64)


@dataclass(frozen=True)
class SampleTrace:
    """Samples of f/g.  ``refine`` re-evaluates the ratio on new abscissae."""

    xs: np.ndarray
    ys: np.ndarray
    step: float
    hopital: np.ndarray | None = None
    refine: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.xs)


def _mp_ratio(p: RatioProblem, x: float) -> float:
    return float(evaluate_mp(BinOp("/", p.f, p.g), x, 30, p.var))


def _guard_end(p: RatioProblem, xs: np.ndarray, ys: np.ndarray, from_left: bool, skip_first: bool = False) -> None:
    """Replace end samples spoiled by cancellation with 30-digit values.

    Probes inward until double and extended precision agree to 1e-11; every
    sample before that point is recomputed.  ``skip_first`` leaves a
    limit-filled end sample alone.
    """
    n = len(xs)
    first = 1 if skip_first else 0
    bad_until = 0
    for k in _GUARD_INDICES:
        if k < first:
            continue
        if k >= n // 4:
            break
        i = k if from_left else n - 1 - k
        try:
            ref = _mp_ratio(p, float(xs[i]))
        except (NumericsError, ValueError, ZeroDivisionError):
            return
        if abs(ref - ys[i]) <= 1e-11 * max(abs(ref), 1e-300) or ref == ys[i]:
            break
        bad_until = k + 1
    for k in range(first, bad_until):
        i = k if from_left else n - 1 - k
        ys[i] = _mp_ratio(p, float(xs[i]))


def sample_ratio(p: RatioProblem, n: int | None = None, guard: bool = True) -> SampleTrace:
    """f/g on a uniform grid over the inset interval; non-finite end samples are limit-filled.

    Raises :class:`DomainError` naming the first interior point where the
    ratio cannot be evaluated.
    """
    n = p.cfg.grid_n if n is None else int(n)
    if n < 16:
        raise ValueError("need at least 16 samples")
    ctx = _Ctx(p)
    lo, hi = p.inset
    xs = np.linspace(lo, hi, n)
    ys = np.array(ctx.ratio(xs), dtype=float)
    filled = {}
    for which, idx in (("a", 0), ("b", n - 1)):
        # a float value that survived is kept; cancellation is the guard's business
        filled[which] = False
        if math.isfinite(ys[idx]) or (which == "b" and p.infinite):
            continue
        ev = _endpoint(ctx, which, "ratio")
        if ev.known and math.isfinite(ev.value):
            ys[idx] = ev.value
            filled[which] = True
    bad = ~np.isfinite(ys)
    if bad.any():
        raise DomainError("ratio is undefined on the sampling grid", float(xs[np.flatnonzero(bad)[0]]))
    if guard:
        _guard_end(p, xs, ys, True, skip_first=filled["a"])
        _guard_end(p, xs, ys, False, skip_first=filled["b"])
    with np.errstate(all="ignore"):
        hop = np.array(ctx.hop(xs), dtype=float)
    return SampleTrace(xs, ys, float(xs[1] - xs[0]), hop, refine=lambda t: ctx.ratio(np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class ObservedShape:
    shape: ShapeClass
    changes: int
    change_points: tuple[float, ...]
    directions: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"shape": self.shape.to_dict(), "changes": self.changes, "change_points": list(self.change_points),
                "directions": list(self.directions), "warnings": list(self.warnings)}


def _runs(ys: np.ndarray, tol: float, floor: float) -> tuple[list[str], list[int]]:
    """Directions and indices of the extremes where they switch.

    A reversal counts once it exceeds ``tol`` relative to the running extreme
    (never less than ``floor``).
    """
    def thr(v: float) -> float:
        return max(tol * abs(v), floor)

    direction = None
    lo_i = hi_i = 0
    ext = 0
    dirs: list[str] = []
    turns: list[int] = []
    for i in range(1, len(ys)):
        y = ys[i]
        if direction is None:
            if y < ys[lo_i]:
                lo_i = i
            if y > ys[hi_i]:
                hi_i = i
            if y - ys[lo_i] > thr(ys[lo_i]):
                direction, ext = UP, i
            elif ys[hi_i] - y > thr(ys[hi_i]):
                direction, ext = DOWN, i
            if direction:
                dirs.append(direction)
            continue
        if direction == UP:
            if y >= ys[ext]:
                ext = i
            elif ys[ext] - y > thr(ys[ext]):
                turns.append(ext)
                direction, ext = DOWN, i
                dirs.append(direction)
        else:
            if y <= ys[ext]:
                ext = i
            elif y - ys[ext] > thr(ys[ext]):
                turns.append(ext)
                direction, ext = UP, i
                dirs.append(direction)
    return dirs, turns


def _vertex(x: np.ndarray, y: np.ndarray, k: int) -> float:
    """Abscissa of the parabola through samples k-1, k, k+1."""
    if k <= 0 or k >= len(x) - 1:
        return float(x[k])
    x0, x1, x2 = x[k - 1:k + 2]
    y0, y1, y2 = y[k - 1:k + 2]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    B = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den
    if A == 0:
        return float(x1)
    v = -B / (2 * A)
    return float(v) if x0 <= v <= x2 else float(x1)


def detect_shape(trace: SampleTrace, tol: float = DEFAULT_HYSTERESIS) -> ObservedShape:
    """Monotone runs of a trace, counted as changes of direction.

    A move against the current direction registers only once it exceeds
    ``tol`` times the running extreme.  Each change point is refined by
    resampling its neighbourhood ten times more densely.
    """
    xs, ys = trace.xs, trace.ys
    scale = float(np.max(np.abs(ys))) if len(ys) else 0.0
    dirs, turns = _runs(ys, tol, 1e-15 * scale if scale > 0 else 1e-300)
    warnings = []
    if not dirs:
        return ObservedShape(ConstantPrefix(float(xs[-1]), float(ys[0]), None), 0, (), (FLAT,))
    points = []
    tps = []
    for i, k in enumerate(turns):
        peak = dirs[i] == UP
        lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
        c = float(xs[k])
        if trace.refine is not None:
            fine_x = np.linspace(lo, hi, 21)
            fine_y = np.asarray(trace.refine(fine_x), dtype=float)
            if np.isfinite(fine_y).all():
                j = int(np.argmax(fine_y) if peak else np.argmin(fine_y))
                c = _vertex(fine_x, fine_y, j)
        else:
            c = _vertex(xs, ys, k)
        points.append(c)
        sense = "up-to-down" if peak else "down-to-up"
        tps.append(TurningPoint(c, sense, 0.0, (float(lo), float(hi))))
    for i, j in zip(turns, turns[1:]):
        if j - i <= 1:
            warnings.append(f"two changes within one grid step near x={xs[i]:.6g}")
    for k in turns:
        if k <= 1 or k >= len(xs) - 2:
            warnings.append(f"change at the grid edge near x={xs[k]:.6g}")
    edges = [float(xs[0])] + points + [float(xs[-1])]
    return ObservedShape(shape_from_runs(dirs, tps, edges), len(turns), tuple(points), tuple(dirs), tuple(warnings))


@dataclass(frozen=True)
class VerificationResult:
    predicted: ShapeClass | None
    observed: ShapeClass
    oscillations_observed: int
    agreement: bool
    worst_discrepancy: float
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "predicted": self.predicted.to_dict() if self.predicted else None,
            "observed": self.observed.to_dict(),
            "oscillations_observed": self.oscillations_observed,
            "agreement": self.agreement,
            "worst_discrepancy": _json_float(self.worst_discrepancy),
            "notes": list(self.notes),
        }


def _predicted_runs(shape: ShapeClass, lo: float, hi: float, min_len: float) -> tuple[list[str], list[float]]:
    """Non-flat runs of a verdict, dropping ones too short to resolve on the grid."""
    dirs = [d for d in shape.directions() if d != FLAT]
    tps = [t.c for t in shape.turning_points()]
    if len(tps) != max(len(dirs) - 1, 0):
        return dirs, tps
    while len(dirs) > 1 and tps[0] - lo < min_len:
        dirs.pop(0)
        tps.pop(0)
    while len(dirs) > 1 and hi - tps[-1] < min_len:
        dirs.pop()
        tps.pop()
    return dirs, tps


def verify(p: RatioProblem, verdict: ShapeClass | None, n: int = 8192,
           tol: float = DEFAULT_HYSTERESIS, trace: SampleTrace | None = None) -> VerificationResult:
    """Compare a verdict against the sampled shape.

    Agreement needs the same run directions and every turning point within
    ``1e-4 * (b - a)`` of the observed one (``b`` is the cap when infinite).
    Runs shorter than three grid steps at either end are ignored on both sides.
    """
    trace = trace or sample_ratio(p, n)
    obs = detect_shape(trace, tol)
    lo, hi = float(trace.xs[0]), float(trace.xs[-1])
    min_len = 3 * trace.step
    notes = list(obs.warnings)
    o_dirs, o_tps = _predicted_runs(obs.shape, lo, hi, min_len)
    if verdict is None:
        return VerificationResult(None, obs.shape, obs.changes, False, math.inf, tuple(notes + ["no verdict"]))
    p_dirs, p_tps = _predicted_runs(verdict, lo, hi, min_len)
    if len(o_dirs) < len(obs.directions) and obs.directions != (FLAT,):
        notes.append("ignored a resolution-limited run at an end of the grid")
    if p_dirs != o_dirs and not (not p_dirs and o_dirs == []):
        return VerificationResult(verdict, obs.shape, obs.changes, False, math.inf,
                                  tuple(notes + [f"directions differ: predicted {p_dirs}, observed {o_dirs}"]))
    worst = max((abs(a - b) for a, b in zip(p_tps, o_tps)), default=0.0)
    limit = 1e-4 * p.width
    agree = worst <= limit
    if not agree:
        notes.append(f"turning point off by {worst:.3g} > {limit:.3g}")
    return VerificationResult(verdict, obs.shape, obs.changes, agree, worst, tuple(notes))


def _halton_pairs(m: int) -> np.ndarray:
    return qmc.Halton(d=2, scramble=False).random(m + 1)[1:]


def _as_callable(e: Expr | Callable, var: str) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(e, Expr):
        return lambda xs: evaluate_array(e, xs, var=var)
    return lambda xs: np.asarray(e(np.asarray(xs, dtype=float)), dtype=float)


def convexity_probe(e: Expr | Callable, lo: float, hi: float, m: int = 256, tol: float = 1e-10,
                    var: str = "x") -> str:
    """Midpoint chord test on ``m`` low-discrepancy pairs.

    Returns ``convex``, ``concave``, ``linear`` (no pair departs from its
    chord beyond ``tol``), or ``mixed``.
    """
    fn = _as_callable(e, var)
    pts = lo + (hi - lo) * _halton_pairs(m)
    x1, x2 = pts[:, 0], pts[:, 1]
    f1, f2, fm = fn(x1), fn(x2), fn(0.5 * (x1 + x2))
    scale = max(float(np.max(np.abs(np.concatenate([f1, f2, fm])))), 1e-300)
    gap = fm - 0.5 * (f1 + f2)
    above = bool(np.any(gap > tol * scale))
    below = bool(np.any(gap < -tol * scale))
    if above and below:
        return "mixed"
    if below:
        return "convex"
    if above:
        return "concave"
    return "linear"


def change_of_variable(p: RatioProblem, lo: float, hi: float, n: int = 2048):
    """``phi(u) = f(g^-1(u))`` on ``[g(lo), g(hi)]`` and its u-range.

    ``g`` is inverted by monotone cubic interpolation of samples and then
    polished with Newton steps on ``g(x) - u``.
    """
    ctx = _Ctx(p)
    xs = np.linspace(lo, hi, n)
    gs = ctx.val(p.g, xs)
    if not (np.all(np.diff(gs) > 0) or np.all(np.diff(gs) < 0)):
        raise ValueError("g is not strictly monotone on the probe interval")
    order = np.argsort(gs)
    inv = PchipInterpolator(gs[order], xs[order])

    def phi(us):
        us = np.asarray(us, dtype=float)
        x = np.clip(inv(us), lo, hi)
        for _ in range(4):
            r = ctx.val(p.g, x) - us
            d = ctx.val(p.gp, x)
            with np.errstate(all="ignore"):
                step = np.where(d != 0, r / d, 0.0)
            x = np.clip(x - step, lo, hi)
        return ctx.val(p.f, x)

    return phi, (float(gs.min()), float(gs.max()))


def phi_probe(p: RatioProblem, lo: float, hi: float, m: int = 256, tol: float = 1e-10) -> str:
    """Convexity of ``phi = f o g^-1`` on the image of ``[lo, hi]``."""
    phi, (u0, u1) = change_of_variable(p, lo, hi)
    return convexity_probe(phi, u0, u1, m, tol)


def export_csv(trace: SampleTrace, path, hopital: Sequence[float] | None = None) -> int:
    """Write ``x,ratio,hopital`` rows; returns the row count."""
    hop = trace.hopital if hopital is None else np.asarray(hopital)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "ratio", "hopital"])
        for x, y, z in zip(trace.xs, trace.ys, hop):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(z))])
    return len(trace.xs)


__all__ = [
    "SampleTrace", "ObservedShape", "VerificationResult", "sample_ratio", "detect_shape", "verify",
    "convexity_probe", "change_of_variable", "phi_probe", "export_csv", "DEFAULT_HYSTERESIS",
]

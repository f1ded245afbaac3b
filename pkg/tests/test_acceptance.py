"""Acceptance criteria, one PASS/FAIL line each.

The lines are collected in ``conftest.ACCEPTANCE`` and printed in the pytest
terminal summary; they are also printed immediately (visible with ``-s``).
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from monorule import reproduce as rp
from monorule.expr import BinOp, differentiate, parse
from monorule.numerics import evaluate_array, evaluate_scaled, integrate
from monorule.numerics import _from_scaled
from monorule.oracle import detect_shape, sample_ratio, verify
from monorule.problems import NAMED, expression_corpus, named
from monorule.shape import Increasing, UpDown, check_hypotheses, classify, mirror_shape, oscillation_bound, reflect

B1 = math.sqrt(math.sqrt(5) + 1) / 2


def record(criterion: str, label: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {label}  {detail}")
    assert ok, f"{label}: {detail}"


def record_check(criterion: str, rep: rp.Reproduction, label: str, name: str | None = None) -> None:
    c = rep.find(label)
    detail = f"reference {c.expected!r}, computed {c.computed!r}"
    if c.delta is not None:
        detail += f", |d| = {c.delta:.3g}"
    if c.tol is not None:
        detail += f" (tol {c.tol:g})"
    record(criterion, name or label, c.passed, detail)


def record_runtime(criterion: str, rep: rp.Reproduction) -> None:
    record(criterion, f"{rep.name} runtime", rep.within_budget, f"{rep.elapsed:.2f}s < {rep.budget:g}s")


# ------------------------------------------------------------ 1: pipeline example1

@pytest.fixture(scope="module")
def ex1():
    return rp.example1()


def test_1_max_value(ex1):
    record_check("1 k1 maximum", ex1, "max value", "global max of k1 = 1.0541564714695")


@pytest.mark.xfail(strict=True, reason="the reference abscissa is 1.28e-8 from the 40-digit root of f'g - fg'")
def test_1_argmax(ex1):
    record_check("1 k1 maximum", ex1, "argmax", "argmax of k1 = 1.246574335142")


def test_1_argmax_against_high_precision_root(ex1):
    record_check("1 k1 maximum", ex1, "argmax vs 40-digit root of f'g - fg'")


def test_1_certificate(ex1):
    cert = ex1.certificates["extremum"]
    ok = cert["certificate"]["rule"] == "single-change-extremum" and ex1.find("certified").passed
    record("1 k1 maximum", "extremum certificate (one change of f'/g')", ok,
           f"rule {cert['certificate']['rule']}, bound {ex1.find('oscillation bound').computed}")
    record_check("1 k1 maximum", ex1, "b1 = sqrt(sqrt(5)+1)/2", "breakpoint b1 vs closed form")


def test_1_runtime(ex1):
    record_runtime("1 k1 maximum", ex1)


# ------------------------------------------------------------ 2: pipeline example2

@pytest.fixture(scope="module")
def ex2():
    return rp.example2()


def test_2_extremum(ex2):
    record_check("2 k2 maximum and xi1 split", ex2, "max value", "global max of k2 = 1.0785966957414")
    record_check("2 k2 maximum and xi1 split", ex2, "argmax", "argmax of k2 = 0.68355125808421")


def test_2_split(ex2):
    record_check("2 k2 maximum and xi1 split", ex2, "sign of the derivative of xi1's denominator", "(a) mixed-sign g'")
    record_check("2 k2 maximum and xi1 split", ex2, "split point", "(a) breakpoint at x = 1")


def test_2_tail_limit(ex2):
    record_check("2 k2 maximum and xi1 split", ex2, "lim xi1/xi2 as x -> inf", "(b) tail limit")


def test_2_quartic_and_single_change(ex2):
    record_check("2 k2 maximum and xi1 split", ex2, "quartic coefficients are integers", "(c) derived quartic has integer coefficients")
    record_check("2 k2 maximum and xi1 split", ex2, "sigma in (0.19, 0.20)", "(c) sigma located")
    record_check("2 k2 maximum and xi1 split", ex2, "xi2 turns on (0.01, 0.99) at sqrt(sigma)", "(c) xi2 turns at sqrt(sigma)")
    record_check("2 k2 maximum and xi1 split", ex2, "xi1 direction changes", "(c) xi1 changes monotonicity once")
    record_check("2 k2 maximum and xi1 split", ex2, "xi1 certified", "(c) xi1 verdict certified")


def test_2_runtime(ex2):
    record_runtime("2 k2 maximum and xi1 split", ex2)


# ------------------------------------------------------------ 3: pipeline example3

def test_3_narrow_interval():
    p = named("k3")
    from monorule.shape import one_change_certify

    res = one_change_certify(p)
    record("3 k3 one-change rule", "one-change rule certifies k3 increasing on [0, 0.967857163]",
           res.status == "certified-increasing", res.status)
    obs = detect_shape(sample_ratio(p, 8192))
    record("3 k3 one-change rule", "oracle (n=8192) sees no change", obs.changes == 0, f"{obs.changes} changes")


def test_3_wide_interval():
    p = named("k3_wide")
    from monorule.shape import one_change_certify

    res = one_change_certify(p)
    record("3 k3 one-change rule", "same pipeline on [0, 1.2] is not certified", res.status == "not-certified", res.status)
    obs = detect_shape(sample_ratio(p, 8192))
    record("3 k3 one-change rule", "oracle (n=8192) sees >= 1 change on [0, 1.2]", obs.changes >= 1,
           f"{obs.changes} change(s) at {[round(c, 10) for c in obs.change_points]}")


# ------------------------------------------------------------ 4: pipeline example4

@pytest.fixture(scope="module")
def ex4():
    return rp.example4()


def test_4_decomposition(ex4):
    record_check("4 k4 decomposition", ex4, "f'/g' equals the three-term decomposition", "decomposition of f'/g'")
    record_check("4 k4 decomposition", ex4, "(x e^{-x^2})/h decreasing", "reciprocal term decreasing")
    assert "decomposition" in ex4.certificates["k4"]


def test_4_certified_and_oracle(ex4):
    record_check("4 k4 decomposition", ex4, "f/g on [0.01, 40]", "k4 certified increasing")
    record_check("4 k4 decomposition", ex4, "oracle agreement (n=8192)", "oracle agreement")


# -------------------------------------------------------------- 5: sigma ratio

@pytest.fixture(scope="module")
def hlp():
    return rp.hlp147()


def test_5_shape(hlp):
    record_check("5 sigma ratio", hlp, "shape", "sigma increasing on (0, pi/2)")


def test_5_limits(hlp):
    record_check("5 sigma ratio", hlp, "limit at 0+", "limit 1/3 at 0")
    record_check("5 sigma ratio", hlp, "limit at pi/2-", "limit 1/2 at pi/2")


def test_5_runtime(hlp):
    record_runtime("5 sigma ratio", hlp)


# ----------------------------------------------- 6: rule/oracle on the corpus

def test_6_corpus_agreement(corpus, corpus_verdicts):
    kinds = {item.g_kind for item in corpus}
    assert kinds == {"x", "x+1", "h", "1+x^2"}
    assert {item.n for item in corpus} == {0, 1, 2, 3}
    certified = mismatches = over_bound = 0
    for item, cls in zip(corpus, corpus_verdicts):
        bound = oscillation_bound(item.problem).bound
        res = verify(item.problem, cls.shape, 8192)
        if res.oscillations_observed > bound:
            over_bound += 1
        if cls.status == "certified":
            certified += 1
            mismatches += not res.agreement
    record("6 corpus", "certified verdicts match the oracle", mismatches == 0,
           f"{certified - mismatches}/{certified} certified verdicts agree ({len(corpus)} problems)")
    record("6 corpus", "observed changes within the oscillation bound", over_bound == 0,
           f"{len(corpus) - over_bound}/{len(corpus)} within bound")


# ------------------------------------------------------ 7: numerical substrate

def _relative_fd_error(e, xs):
    d = evaluate_array(differentiate(e), xs)
    worst = 0.0
    for x, dv in zip(xs, d):
        h = 1e-4 * (1 + abs(x))
        f = evaluate_array(e, np.array([x - 2 * h, x - h, x + h, x + 2 * h]))
        # fourth-order central difference
        fd = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
        worst = max(worst, abs(dv - fd) / max(1.0, abs(fd)))
    return worst


def test_7_derivatives(corpus):
    exprs = dict(expression_corpus())
    for item in corpus:
        exprs[f"{item.label}.f"] = item.problem.f
        exprs[f"{item.label}.g"] = item.problem.g
    worst, where = 0.0, ""
    for name, e in exprs.items():
        if name.startswith("random"):
            item = corpus[int(name.split("-")[1].split(".")[0])]
            lo, hi = item.problem.inset
        elif name.split(".")[0] in NAMED:
            p = named(name.split(".")[0])
            lo, hi = p.inset
            hi = min(hi, 6.0)
        else:
            lo, hi = 0.1, 0.9
        pad = 1e-2 * (hi - lo)
        err = _relative_fd_error(e, np.linspace(lo + pad, hi - pad, 9))
        if err > worst:
            worst, where = err, name
    record("7 numerics", "symbolic derivative vs central differences", worst <= 1e-6,
           f"worst relative error {worst:.2e} ({where}) over {len(exprs)} expressions")


def test_7_quadrature_vs_erf():
    e = parse("exp(-t^2)", "t")
    xs = np.linspace(0.1, 5.0, 200)
    worst = max(abs(integrate(e, 0.0, x) - math.sqrt(math.pi) / 2 * math.erf(x)) for x in xs)
    record("7 numerics", "quadrature of e^{-t^2} vs erf on [0.1, 5]", worst <= 1e-10, f"max error {worst:.2e}")


def _identity_error(p, xs):
    ratio = BinOp("/", p.f, p.g)
    lhs = _from_scaled(*evaluate_scaled(differentiate(ratio), xs, p.cfg))
    A = _from_scaled(*evaluate_scaled(ratio, xs, p.cfg))
    B = _from_scaled(*evaluate_scaled(p.hopital, xs, p.cfg))
    q = _from_scaled(*evaluate_scaled(BinOp("/", p.gp, p.g), xs, p.cfg))
    rhs = (B - A) * q
    scale = (np.abs(B) + np.abs(A)) * np.abs(q)
    ok = np.isfinite(lhs) & np.isfinite(rhs) & (scale > 0)
    return float(np.max(np.abs(lhs - rhs)[ok] / scale[ok])), int(np.count_nonzero(~ok))


def test_7_quotient_identity(corpus):
    problems = [item.problem for item in corpus]
    problems += [named(n) for n in ("k1", "k2", "k3_wide", "square_over_x", "x_plus_inverse", "sigma")]
    worst, skipped = 0.0, 0
    for p in problems:
        lo, hi = p.inset
        err, bad = _identity_error(p, np.linspace(lo, min(hi, 8.0), 64)[1:-1])
        worst, skipped = max(worst, err), skipped + bad
    record("7 numerics", "d/dx(f/g) = (f'/g' - f/g) g'/g on all corpus grids", worst <= 1e-9,
           f"worst relative gap {worst:.2e} over {len(problems)} problems, {skipped} undefined points skipped")


# ------------------------------------------------------- 8: convex exclusion

def test_8_no_up_down_in_the_convex_regime(corpus, corpus_verdicts):
    considered = violations = 0
    for item, cls in zip(corpus, corpus_verdicts):
        rep = check_hypotheses(item.problem)
        g_up = rep.gprime_sign == "positive" and rep.g_sign == "positive"
        hop_up = rep.hopital_segments is not None and [s.direction for s in rep.hopital_segments] == ["up"]
        if not (g_up and hop_up):
            continue
        considered += 1
        violations += isinstance(cls.shape, UpDown)
    record("8 convex exclusion", "no UpDown verdict with g and f'/g' increasing", violations == 0 and considered > 0,
           f"{considered} problems checked, {violations} UpDown")


# ------------------------------------------------------ 9: reflection duality

def test_9_reflection_duality(corpus, corpus_verdicts):
    pairs = [(item.problem, cls) for item, cls in zip(corpus, corpus_verdicts)]
    for name in ("k3", "k3_wide", "square_over_x", "x_plus_inverse", "reciprocal_over_x", "k4"):
        p = named(name)
        pairs.append((p, classify(p)))
    failures = []
    for p, cls in pairs:
        m = classify(reflect(p))
        if cls.shape is None or m.shape is None:
            failures.append((p.describe()["f"], "no shape"))
            continue
        want = mirror_shape(cls.shape, p.a, p.b)
        same = want.directions() == m.shape.directions()
        for t0, t1 in zip(want.turning_points(), m.shape.turning_points()):
            same &= abs(t0.c - t1.c) <= 1e-6 * p.width
        if not same:
            failures.append((p.describe()["f"], f"{cls.shape} vs {m.shape}"))
    record("9 reflection", "classify(reflect(p)) mirrors classify(p)", not failures,
           f"{len(pairs) - len(failures)}/{len(pairs)} finite problems mirror")


def test_timing_sanity():
    # the suite itself should stay interactive; this is not a criterion
    t0 = time.perf_counter()
    classify(named("square_over_x"))
    assert time.perf_counter() - t0 < 5

import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from monorule.expr import parse
from monorule.numerics import DomainError
from monorule.oracle import (
    SampleTrace,
    convexity_probe,
    detect_shape,
    export_csv,
    phi_probe,
    sample_ratio,
    verify,
)
from monorule.problems import named
from monorule.shape import DownUp, Increasing, RatioProblem, TurningPoint, UpDown

B1 = math.sqrt(math.sqrt(5) + 1) / 2


def trace_of(fn, lo, hi, n):
    xs = np.linspace(lo, hi, n)
    return SampleTrace(xs, fn(xs), float(xs[1] - xs[0]), refine=fn)


# --------------------------------------------------------------- sampling

def test_constant_ratio_samples():
    tr = sample_ratio(RatioProblem.from_strings("x", "x", "0", "1", open_left=True), 16)
    assert len(tr) == 16
    assert np.all(tr.ys == 1.0)


def test_sampling_needs_sixteen_points():
    with pytest.raises(ValueError):
        sample_ratio(named("square_over_x"), 8)


def test_k1_trace_maximum():
    tr = sample_ratio(named("k1"), 4096)
    assert np.max(tr.ys) == pytest.approx(1.0541564714695, abs=1e-5)


def test_sigma_trace_rises_from_a_third_to_a_half():
    tr = sample_ratio(named("sigma"), 512)
    assert tr.ys[0] == pytest.approx(1 / 3, abs=1e-6)
    # the limit 1/2 is approached like 1/log, so the inset sample sits well below it;
    # reference value from 40-digit quadrature at the same abscissa
    assert tr.ys[-1] == pytest.approx(0.4525273483345997, rel=1e-10)
    assert np.all(tr.ys < 0.5)
    assert np.all(np.diff(tr.ys) > 0)


def test_undefined_stretch_is_rejected_with_location():
    p = RatioProblem.from_strings("log(x - 1)", "1 + x", "0", "2")
    with pytest.raises(DomainError) as info:
        sample_ratio(p, 64)
    assert info.value.x < 1


# -------------------------------------------------------- shape detection

def test_flat_trace():
    obs = detect_shape(trace_of(lambda x: np.ones_like(x), 0, 1, 64))
    assert obs.changes == 0 and obs.directions == ("flat",)


@pytest.mark.parametrize("fn, lo, hi, direction", [
    (lambda x: x, 0.0, 1.0, "up"),
    (np.exp, -2.0, 3.0, "up"),
    (lambda x: -np.log(x), 0.01, 5.0, "down"),
])
@pytest.mark.parametrize("n", [64, 100, 257, 1024, 8192])
def test_monotone_closed_forms(fn, lo, hi, direction, n):
    obs = detect_shape(trace_of(fn, lo, hi, n))
    assert obs.changes == 0
    assert obs.directions == (direction,)


@given(st.integers(64, 4000))
def test_self_consistency_any_grid(n):
    assert detect_shape(trace_of(np.exp, 0.0, 2.0, n)).directions == ("up",)


def test_sin_counts_every_reversal():
    obs = detect_shape(trace_of(np.sin, 0.0, 3 * math.pi, 2048))
    assert obs.changes == 3
    np.testing.assert_allclose(obs.change_points, [math.pi / 2, 3 * math.pi / 2, 5 * math.pi / 2], atol=1e-6)


def test_noise_below_hysteresis_is_ignored():
    xs = np.linspace(0, 1, 512)
    ys = xs + 1e-13 * np.sin(400 * xs)
    assert detect_shape(SampleTrace(xs, ys, xs[1] - xs[0])).changes == 0


def test_k1_trace_turns_once():
    obs = detect_shape(sample_ratio(named("k1"), 4096))
    assert obs.directions == ("up", "down")
    assert obs.change_points[0] == pytest.approx(1.2465743479744, abs=1e-4)


def test_x_plus_inverse_trace():
    obs = detect_shape(sample_ratio(named("x_plus_inverse"), 2048))
    assert obs.directions == ("down", "up")
    assert obs.change_points[0] == pytest.approx(1.0, abs=1e-6)


def test_close_changes_are_flagged():
    xs = np.linspace(0, 1, 64)
    ys = xs.copy()
    ys[30] = ys[31] + 0.1
    obs = detect_shape(SampleTrace(xs, ys, xs[1] - xs[0]))
    assert obs.warnings


# ----------------------------------------------------------- verification

def test_verify_agreement():
    assert verify(named("square_over_x"), Increasing(), 1024).agreement
    assert verify(named("k3"), Increasing(), 8192).agreement


def test_verify_turning_point_distance():
    p = named("x_plus_inverse")
    good = DownUp(TurningPoint(1.0, "down-to-up", 0.0, (0.99, 1.01)))
    bad = DownUp(TurningPoint(1.01, "down-to-up", 0.0, (1.0, 1.02)))
    assert verify(p, good, 2048).agreement
    res = verify(p, bad, 2048)
    assert not res.agreement
    assert res.worst_discrepancy == pytest.approx(0.01, abs=1e-5)


def test_verify_wrong_direction():
    res = verify(named("k1"), Increasing(), 2048)
    assert not res.agreement
    assert res.oscillations_observed == 1


def test_verify_none_verdict():
    res = verify(named("k3_wide"), None, 2048)
    assert not res.agreement
    assert isinstance(res.observed, UpDown)


# -------------------------------------------------------------- convexity

def test_convexity_probe_closed_forms():
    assert convexity_probe(parse("x^2"), -1, 1) == "convex"
    assert convexity_probe(parse("sin(x)"), 0, math.pi) == "concave"
    assert convexity_probe(parse("3*x + 1"), 0, 2) == "linear"
    assert convexity_probe(parse("sin(x)"), 0, 2 * math.pi) == "mixed"


def test_change_of_variable_k1():
    p = named("k1")
    assert phi_probe(p, 1e-3, B1) == "convex"
    assert phi_probe(p, B1, 3.0) == "concave"


def test_phi_convex_on_every_monotone_corpus_problem(corpus):
    # increasing f'/g' and increasing g give a convex f o g^-1, with no chord violations
    checked = 0
    for item in corpus:
        if item.n:
            continue
        p = item.problem
        lo, hi = p.inset
        expected = "convex" if item.hop_direction == "up" else "concave"
        assert phi_probe(p, lo, hi, tol=1e-10) in (expected, "linear"), item.label
        checked += 1
    assert checked > 20


# -------------------------------------------------------------------- CSV

def test_export_csv(tmp_path):
    tr = sample_ratio(named("k3_wide"), 512)
    path = tmp_path / "trace.csv"
    assert export_csv(tr, path) == 512
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "ratio", "hopital"]
    assert len(rows) == 513
    assert float(rows[1][0]) == tr.xs[0]

import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from monorule.expr import parse
from monorule.numerics import (
    DEFAULT_CONFIG,
    DomainError,
    NumericConfig,
    RootError,
    evaluate,
    evaluate_array,
    evaluate_mp,
    evaluate_scaled,
    find_root,
    integrate,
    limit_at,
    segment_monotone,
    sign_profile,
)
from monorule.numerics import _from_scaled

SQRT_PI_2 = math.sqrt(math.pi) / 2


# ------------------------------------------------------------- evaluation

def test_evaluate_domain_error_reports_x():
    with pytest.raises(DomainError) as info:
        evaluate(parse("log(x)"), -1.0)
    assert info.value.x == -1.0


def test_evaluate_array_marks_undefined_points_nan():
    with np.errstate(all="ignore"):
        v = evaluate_array(parse("sqrt(x)"), [-1.0, 4.0])
    assert math.isnan(v[0]) and v[1] == 2.0


def test_scaled_evaluation_handles_overflow():
    # e^{x^2} at x = 40 is about e^1600, far beyond float range
    s, lg = evaluate_scaled(parse("exp(x^2)/exp(x^2 - 1)"), [40.0])
    assert float(_from_scaled(s, lg)[0]) == pytest.approx(math.e, rel=1e-12)
    s, lg = evaluate_scaled(parse("exp(x^2)"), [40.0])
    assert s[0] == 1 and lg[0] == pytest.approx(1600.0, rel=1e-15)


def test_scaled_evaluation_keeps_subnormal_products_accurate():
    # e^{-x^2} is subnormal near x = 27; the ratio must not lose digits
    e = parse("x*exp(-x^2)/int(exp(-t^2), t, 0, x)")
    x = 27.0
    ref = float(x * mp.exp(-mp.mpf(x) ** 2) / (mp.sqrt(mp.pi) / 2 * mp.erf(x)))
    assert float(_from_scaled(*evaluate_scaled(e, [x]))[0]) == pytest.approx(ref, rel=1e-12)


def test_mp_evaluation_agrees_with_float():
    e = parse("int(exp(-t^2), t, 0, x^2)/int(exp(-t^2), t, 0, x)")
    with mp.workdps(40):
        v = evaluate_mp(e, mp.mpf("1.25"), 40)
        ref = mp.erf(mp.mpf("1.25") ** 2) / mp.erf(mp.mpf("1.25"))
        assert abs(v - ref) < mp.mpf(10) ** -35
    assert evaluate(e, 1.25) == pytest.approx(float(ref), rel=1e-13)


# -------------------------------------------------------------- quadrature

@pytest.mark.parametrize("x", np.linspace(0.1, 5.0, 50))
def test_gaussian_quadrature_matches_erf(x):
    got = integrate(parse("exp(-t^2)", "t"), 0.0, float(x))
    assert abs(got - SQRT_PI_2 * math.erf(x)) <= 1e-10


def test_integral_nodes_match_erf_on_a_grid():
    xs = np.linspace(0.1, 5.0, 400)
    got = evaluate_array(parse("int(exp(-t^2), t, 0, x)"), xs)
    ref = SQRT_PI_2 * np.array([math.erf(x) for x in xs])
    assert np.max(np.abs(got - ref)) <= 1e-10


def test_integrate_reversed_and_empty():
    e = parse("t^2", "t")
    assert integrate(e, 0.0, 3.0) == pytest.approx(9.0, rel=1e-14)
    assert integrate(e, 3.0, 0.0) == pytest.approx(-9.0, rel=1e-14)
    assert integrate(e, 1.0, 1.0) == 0.0


def test_integrate_rejects_stray_variables():
    with pytest.raises(DomainError):
        integrate(parse("exp(-x^2)"), 0.0, 1.0)


def test_integrable_log_singularity():
    # int_0^1 log(t) dt = -1
    assert integrate(parse("log(t)", "t"), 0.0, 1.0) == pytest.approx(-1.0, abs=1e-12)
    assert integrate(parse("1/sqrt(t)", "t"), 0.0, 1.0) == pytest.approx(2.0, abs=1e-12)


# ------------------------------------------------------------------ roots

def test_find_root_brackets_sqrt2():
    r = find_root(lambda x: x * x - 2, 0.0, 2.0)
    lo, hi = r.bracket
    assert lo <= math.sqrt(2) <= hi
    assert hi - lo <= DEFAULT_CONFIG.root_tol * (1 + r.root)
    assert abs(r.root - math.sqrt(2)) <= 1e-12


def test_find_root_requires_sign_change():
    with pytest.raises(RootError):
        find_root(lambda x: x * x + 1, 0.0, 2.0)


@given(st.floats(-5, 5), st.floats(0.1, 3))
def test_find_root_bracket_always_straddles(c, w):
    fn = lambda x: math.tanh(x - c)  # noqa: E731
    r = find_root(fn, c - w, c + 2 * w)
    lo, hi = r.bracket
    assert fn(lo) * fn(hi) <= 0
    assert lo <= c + 1e-12 and c - 1e-12 <= hi


# ----------------------------------------------------------------- limits

def test_limit_removable_singularity():
    lim = limit_at(lambda x: math.sin(x) / x, 0.0)
    assert lim.converged and lim.value == pytest.approx(1.0, abs=1e-12)


def test_limit_at_infinity():
    lim = limit_at(lambda x: (1 + 1 / x) ** x, math.inf)
    assert lim.converged and lim.value == pytest.approx(math.e, abs=1e-9)


def test_limit_from_the_left():
    lim = limit_at(lambda x: (1 - math.cos(1 - x)) / (1 - x) ** 2, 1.0, side="left")
    assert lim.converged and lim.value == pytest.approx(0.5, abs=1e-8)


def test_limit_divergence_is_reported():
    assert limit_at(lambda x: 1 / x, 0.0).diverges


def test_limit_slow_logarithmic_convergence():
    # x log x -> 0 only logarithmically fast
    lim = limit_at(lambda x: x * math.log(x), 0.0)
    assert lim.converged and abs(lim.value) < 1e-6


# ----------------------------------------------------------- segmentation

def test_segment_monotone_sin():
    segs = segment_monotone(np.sin, 0.0, 3 * math.pi)
    assert [s.direction for s in segs] == ["up", "down", "up", "down"]
    for s, ref in zip(segs, (math.pi / 2, 3 * math.pi / 2, 5 * math.pi / 2)):
        assert s.hi == pytest.approx(ref, abs=1e-9)


@given(st.lists(st.floats(0.1, 0.9), min_size=1, max_size=3, unique=True))
def test_segment_breakpoints_of_polynomials(roots):
    roots = sorted(roots)
    if len(roots) > 1 and min(np.diff(roots)) < 0.05:
        roots = roots[:1]
    # derivative prod(x - r_i), so turning points are exactly the roots
    dp = np.polynomial.Polynomial.fromroots(roots)
    p = dp.integ()
    segs = segment_monotone(lambda x: p(np.asarray(x)), 0.0, 1.0)
    assert len(segs) == len(roots) + 1
    for s, r in zip(segs, roots):
        assert s.hi == pytest.approx(r, abs=1e-6)


def test_flat_stretch_is_non_strict():
    fn = lambda x: np.where(np.asarray(x) < 0.5, 0.0, (np.asarray(x) - 0.5) ** 2)  # noqa: E731
    segs = segment_monotone(fn, 0.0, 1.0)
    assert any(s.direction == "flat" or not s.strict for s in segs)


def test_sign_profile():
    prof = sign_profile(lambda x: np.asarray(x) - 1.0, 0.0, 3.0)
    assert prof.sign == "mixed"
    assert prof.changes[0] == pytest.approx(1.0, abs=1e-12)
    assert sign_profile(lambda x: np.exp(x), 0, 1).sign == "positive"


def test_segmentation_is_deterministic():
    fn = lambda x: np.sin(3 * np.asarray(x)) + 0.1 * np.asarray(x)  # noqa: E731
    assert segment_monotone(fn, 0.0, 5.0) == segment_monotone(fn, 0.0, 5.0)


# ----------------------------------------------------------------- config

def test_config_round_trip(tmp_path, monkeypatch):
    cfg = NumericConfig().replace(quad_tol=1e-10, grid_n=1024)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert NumericConfig.from_file(path) == cfg
    monkeypatch.setenv("MONORULE_CONFIG", str(path))
    assert NumericConfig.from_env() == cfg
    monkeypatch.delenv("MONORULE_CONFIG")
    assert NumericConfig.from_env() == NumericConfig()


def test_config_rejects_unknown_keys():
    with pytest.raises((KeyError, ValueError, TypeError)):
        NumericConfig.from_mapping({"no_such_setting": 1})

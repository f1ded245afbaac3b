import math

import numpy as np
import pytest

from monorule.numerics import NumericConfig
from monorule.oracle import detect_shape, sample_ratio
from monorule.problems import named
from monorule.shape import (
    ConstantPrefix,
    Decreasing,
    DownUp,
    Increasing,
    IneligibleError,
    RatioProblem,
    UpDown,
    boundary_criterion,
    check_hypotheses,
    classify,
    classify_split,
    extremum_certificate,
    one_change_certify,
    two_change_certify,
    mirror_shape,
    oscillation_bound,
    reflect,
)

B1 = math.sqrt(math.sqrt(5) + 1) / 2


def rp(f, g, a, b, **kw):
    return RatioProblem.from_strings(f, g, a, b, **kw)


# ----------------------------------------------------------------- problem

def test_problem_bounds():
    p = rp("x", "1", "0", "inf")
    assert p.b == math.inf and p.infinite
    assert p.upper == NumericConfig().infinity_cap
    q = named("sigma")
    assert q.b == pytest.approx(math.pi / 2, rel=1e-15)
    assert q.b_exact is not None


def test_problem_rejects_reversed_interval():
    with pytest.raises(ValueError):
        rp("x", "1", "2", "1")


def test_hopital_quotient_is_symbolic():
    p = rp("int(exp(-t^2), t, 0, x^2)", "int(exp(-t^2), t, 0, x)", "0", "inf")
    # f'/g' = 2x e^{x^2 - x^4}
    for x in (0.3, 1.0, 1.7):
        from monorule.numerics import evaluate

        assert evaluate(p.hopital, x) == pytest.approx(2 * x * math.exp(x * x - x ** 4), rel=1e-13)


# --------------------------------------------------------------- hypotheses

def test_hypotheses_for_k1():
    rep = check_hypotheses(named("k1"))
    assert rep.g_sign == "positive" and rep.gprime_sign == "positive"
    assert rep.eligible
    assert [s.direction for s in rep.hopital_segments] == ["up", "down"]
    assert rep.breakpoints[0] == pytest.approx(B1, abs=1e-10)
    assert rep.endpoint_data["a"]["ratio"].value == pytest.approx(0.0, abs=1e-12)


def test_hypotheses_detect_mixed_gprime():
    rep = check_hypotheses(named("xi1"))
    assert rep.gprime_sign == "mixed"
    assert rep.gprime_changes[0] == pytest.approx(1.0, abs=1e-10)
    assert not rep.eligible


def test_hypotheses_record_errors_instead_of_raising():
    rep = check_hypotheses(rp("log(x - 1)", "x", "0", "2"))
    assert "f_domain" in rep.errors
    assert rep.g_sign == "positive"  # other facets still reported
    assert not rep.eligible


# --------------------------------------------------------- classification

@pytest.mark.parametrize("f, g, a, b, kind, case", [
    ("x^2", "x", "0", "2", Increasing, "(1)"),
    ("1/(1+x)", "x", "0", "10", Decreasing, "(2)ii"),
    ("x", "x^2", "1", "2", Decreasing, "(2)i"),
    ("sin(x)", "x", "0", "3", Decreasing, "(1)"),
    ("-x^2", "-x", "0", "2", Increasing, "(1)"),
])
def test_monotone_cases(f, g, a, b, kind, case):
    c = classify(rp(f, g, a, b, open_left=True, open_right=True))
    assert c.status == "certified"
    assert type(c.shape) is kind
    assert case in c.certificate.case


def test_turning_point_case():
    c = classify(rp("1 + x^2", "x", "0", "2", open_left=True, open_right=True))
    assert isinstance(c.shape, DownUp)
    assert c.shape.turning.c == pytest.approx(1.0, abs=1e-10)
    assert "(2)iii" in c.certificate.case
    e = classify(rp("exp(x)", "x", "0.5", "3"))
    assert isinstance(e.shape, DownUp) and e.shape.turning.c == pytest.approx(1.0, abs=1e-10)


def test_negative_interval_with_decreasing_g():
    c = classify(rp("x^3", "x", "-1", "-0.5"))
    assert isinstance(c.shape, Decreasing)
    assert c.certificate.rule == "lhopital-decreasing-g"


def test_constant_multiple_prefix():
    c = classify(rp("x + ((x - 1 + abs(x - 1))/2)^3", "x", "0", "2", open_left=True))
    assert isinstance(c.shape, ConstantPrefix)
    assert c.shape.lam == pytest.approx(1.0, abs=1e-12)
    assert c.shape.alpha == pytest.approx(1.0, abs=1e-3)
    assert isinstance(c.shape.tail, Increasing)


def test_exact_constant_ratio():
    c = classify(rp("3*x", "x", "0", "1", open_left=True))
    assert isinstance(c.shape, ConstantPrefix)
    assert c.shape.lam == pytest.approx(3.0)
    assert c.shape.tail is None


def test_near_constant_ratio_is_not_mistaken_for_flat():
    # the hop quotient differs from its limit by O(x^4), within float noise near 0
    c = classify(named("sigma"))
    assert isinstance(c.shape, Increasing)


def test_k1_through_the_oscillation_rule():
    c = classify(named("k1"))
    assert c.status == "certified"
    assert isinstance(c.shape, UpDown)
    assert c.shape.turning.c > B1  # lags the breakpoint of f'/g'


def test_ineligible_without_split():
    c = classify(named("xi1"))
    assert c.status == "ineligible"
    assert any("split" in r for r in c.reasons)


def test_split_and_stitch():
    c = classify_split(named("xi1"))
    assert c.status == "certified"
    assert c.shape.changes == 1
    assert len(c.certificate.parts) == 2


# ----------------------------------------------------------- oscillation

def test_oscillation_bound_k1():
    prof = oscillation_bound(named("k1"))
    assert prof.n == 1 and prof.bound == 1
    assert prof.breakpoints[0] == pytest.approx(B1, abs=1e-10)


def test_oscillation_bound_two_changes():
    prof = oscillation_bound(rp("int(t + 3*sin(t), t, 0, x)", "x", "0.5", "7"))
    assert prof.n == 2
    assert prof.bound in (2, 3)


# ---------------------------------------------------------- endpoint rules

def test_boundary_criterion_k3():
    chk = boundary_criterion(named("k3_wide"), "b")
    assert chk.holds("le") is False
    chk = boundary_criterion(named("k3"), "b")
    assert chk.holds("le") is True


def test_extremum_k1():
    ext = extremum_certificate(named("k1"))
    assert ext.certified and ext.kind == "maximum"
    assert ext.value == pytest.approx(1.0541564714695, abs=1e-12)
    # the 40-digit root of f'g - fg'
    assert ext.location == pytest.approx(1.2465743479744, abs=1e-11)


def test_extremum_requires_a_single_change():
    with pytest.raises(IneligibleError):
        extremum_certificate(rp("x^2", "x", "0", "2", open_left=True))


def test_one_change_certificate():
    assert one_change_certify(named("k3")).status == "certified-increasing"
    wide = one_change_certify(named("k3_wide"))
    assert wide.status == "not-certified"
    assert any("fails" in r for r in wide.reasons)


def test_one_change_certificate_for_a_constant_ratio():
    res = one_change_certify(rp("x", "x", "0", "1", open_left=True))
    assert res.status == "certified-increasing" and res.constant


@pytest.mark.parametrize("c, status, oracle_changes", [
    ("1.5", "certified-increasing", 0),
    ("3", "not-certified", 2),
])
def test_two_change_certificate(c, status, oracle_changes):
    p = rp(f"int(t + {c}*sin(t), t, 0, x)", "x", "0.5", "7")
    res = two_change_certify(p)
    assert res.status == status
    assert detect_shape(sample_ratio(p, 8192)).changes == oracle_changes


def test_two_change_certificate_constant_hopital():
    assert two_change_certify(rp("5*x + 1", "x", "0.5", "7")).status == "inconclusive"


def test_two_change_certificate_wrong_count():
    with pytest.raises(IneligibleError):
        two_change_certify(named("k3"))


# ------------------------------------------------------------- reflection

def test_reflect_substitutes_exactly():
    p = rp("x^2", "x + 1", "0", "2")
    q = reflect(p)
    from monorule.numerics import evaluate

    for x in (0.0, 0.5, 1.7):
        assert evaluate(q.f, x) == pytest.approx(evaluate(p.f, 2 - x), rel=1e-15)
    assert (q.a, q.b) == (p.a, p.b)


def test_reflect_requires_finite_interval():
    with pytest.raises(ValueError):
        reflect(named("k1"))


@pytest.mark.parametrize("f, g, a, b", [
    ("1 + x^2", "x", "0.2", "2"),
    ("x^2", "x", "0.1", "2"),
    ("int(t + 3*sin(t), t, 0, x)", "x", "0.5", "7"),
])
def test_reflection_mirrors_the_verdict(f, g, a, b):
    p = rp(f, g, a, b)
    c = classify(p)
    m = classify(reflect(p))
    assert m.shape.directions() == mirror_shape(c.shape, p.a, p.b).directions()
    for t0, t1 in zip(c.shape.turning_points(), reversed(m.shape.turning_points())):
        assert t0.c == pytest.approx(p.a + p.b - t1.c, abs=1e-8)


# ----------------------------------------------------------- determinism

def test_classification_is_deterministic():
    d1 = classify(named("k3_wide")).to_dict()
    d2 = classify(named("k3_wide")).to_dict()
    assert d1 == d2


def test_convex_regime_never_up_down():
    # f'/g' increasing and g increasing: only Increasing, Decreasing or DownUp
    for k in np.linspace(0.2, 2.0, 7):
        c = classify(rp(f"exp({k}*x) - {0.5 * k}", "x + 1", "0", "3"))
        assert not isinstance(c.shape, UpDown)

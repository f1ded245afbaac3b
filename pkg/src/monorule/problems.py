"""Named problems and the randomized test corpus.

The named functions are built from ``h(x) = int(exp(-t^2), t, 0, x)``.
Random problems fix the Hopital derivative first: with a polynomial ``r``
whose direction changes sit at chosen points, ``f = c0 + int(r(t) g'(t))``
gives ``f'/g' = r`` exactly, so the number of breakpoints is known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .expr import Expr, differentiate, parse, render, simplify
from .numerics import DEFAULT_CONFIG, NumericConfig
from .shape import RatioProblem

H = "int(exp(-t^2), t, 0, x)"
H_SQ = "int(exp(-t^2), t, 0, x^2)"

# name -> (f, g, a, b, open_left, open_right)
NAMED: dict[str, tuple[str, str, str, str, bool, bool]] = {
    "k1": (H_SQ, H, "0", "inf", False, False),
    "k2": (H_SQ, f"x*{H}", "0", "inf", False, False),
    # k2's Hopital derivative as a quotient in its own right
    "xi1": ("2*x*exp(-x^4)", f"{H} + x*exp(-x^2)", "0", "inf", False, False),
    "k3": (f"{H} - x*exp(-x^2)", "x^2", "0", "0.967857163", False, False),
    "k3_wide": (f"{H} - x*exp(-x^2)", "x^2", "0", "1.2", False, False),
    "k4": (f"(2*x^2 - 1)*{H}", f"{H} - x*exp(-x^2)", "0.01", "40", False, False),
    "k4_reciprocal": ("x*exp(-x^2)", H, "0", "40", True, False),
    "sigma": ("int((1 + sec(t))*log(sec(t)), t, 0, x)", "log(sec(x))*int(1 + sec(t), t, 0, x)",
              "0", "pi/2", True, True),
    "square_over_x": ("x^2", "x", "0", "2", True, True),
    "x_plus_inverse": ("1 + x^2", "x", "0", "2", True, True),
    "reciprocal_over_x": ("1/(1+x)", "x", "0", "10", True, True),
}

# rendered once so tests and docs agree on the text form
XI = "2*x*exp(x^2 - x^4)"
XI_PRIME_CLOSED = "2*exp(x^2 - x^4)*(1 + 2*x^2 - 4*x^4)"
XI2_CLOSED = "(4*x^4 - 1)*exp(x^2 - x^4)/(x^2 - 1)"


def named(name: str, cfg: NumericConfig = DEFAULT_CONFIG) -> RatioProblem:
    try:
        f, g, a, b, ol, orr = NAMED[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(NAMED)}") from None
    return RatioProblem.from_strings(f, g, a, b, open_left=ol, open_right=orr, cfg=cfg)


G_TEMPLATES: dict[str, tuple[str, str]] = {
    # name -> (g(x), g'(t) in the bound variable)
    "x": ("x", "1"),
    "x+1": ("x + 1", "1"),
    "h": (H, "exp(-t^2)"),
    "1+x^2": ("1 + x^2", "2*t"),
}


@dataclass(frozen=True)
class CorpusProblem:
    problem: RatioProblem
    label: str
    g_kind: str
    breakpoints: tuple[float, ...]
    hop_direction: str  # direction of r on its first stretch

    @property
    def n(self) -> int:
        return len(self.breakpoints)


def _poly_text(p: Polynomial, var: str) -> str:
    terms = []
    for k, c in enumerate(p.coef):
        if c == 0:
            continue
        c = float(c)
        if k == 0:
            terms.append(f"({c!r})")
        elif k == 1:
            terms.append(f"({c!r})*{var}")
        else:
            terms.append(f"({c!r})*{var}^{k}")
    return " + ".join(terms) if terms else "0"


def _hop_poly(rng: np.random.Generator, a: float, b: float, k: int) -> tuple[Polynomial, tuple[float, ...], int]:
    """Polynomial with exactly ``k`` well-separated direction changes inside ``(a, b)``."""
    w = b - a
    while True:
        cs = np.sort(rng.uniform(a + 0.15 * w, b - 0.15 * w, size=k))
        if k < 2 or np.min(np.diff(cs)) > 0.15 * w:
            break
    sign = int(rng.choice([-1, 1]))
    # r' = sign * s * prod(x - c_i), plus a positive slope when there is no change
    dr = Polynomial([1.0])
    for c in cs:
        dr = dr * Polynomial([-float(c), 1.0])
    if k == 0:
        dr = Polynomial([1.0, float(rng.uniform(0.0, 1.0))]) if a >= -1 else Polynomial([1.0])
    scale = float(rng.uniform(0.5, 2.0)) / max(float(np.max(np.abs(dr(np.linspace(a, b, 64))))), 1e-12)
    dr = sign * scale * dr
    r = dr.integ(k=[float(rng.normal(0.0, 1.0))])
    first = dr(a + 1e-3 * w)
    return r, tuple(float(c) for c in cs), 1 if first > 0 else -1


def random_problem(rng: np.random.Generator, index: int, cfg: NumericConfig = DEFAULT_CONFIG) -> CorpusProblem:
    g_kind = list(G_TEMPLATES)[index % len(G_TEMPLATES)]
    g_text, gp_t = G_TEMPLATES[g_kind]
    k = int(rng.integers(0, 4))
    a = float(rng.choice([0.0, 0.25, 0.5]))
    b = a + float(rng.choice([1.0, 1.5, 2.0, 3.0]))
    r, cs, first = _hop_poly(rng, a, b, k)
    # c0 = 0 exercises the g(a) = 0 branch when g vanishes at a
    c0 = 0.0 if rng.random() < 0.4 else float(rng.normal(0.0, 1.0))
    integrand = f"({_poly_text(r, 't')})*({gp_t})"
    f_text = f"{c0!r} + int({integrand}, t, {a!r}, x)"
    p = RatioProblem.from_strings(f_text, g_text, a, b, open_left=True, cfg=cfg)
    return CorpusProblem(p, f"random-{index:03d}", g_kind, cs, "up" if first > 0 else "down")


def random_corpus(count: int = 200, seed: int = 20240917, cfg: NumericConfig = DEFAULT_CONFIG) -> list[CorpusProblem]:
    """Deterministic list of randomized problems with 0-3 breakpoints of ``f'/g'``."""
    rng = np.random.default_rng(seed)
    return [random_problem(rng, i, cfg) for i in range(count)]


def expression_corpus() -> dict[str, Expr]:
    """Every expression the tools are exercised on, for derivative checks."""
    out: dict[str, Expr] = {"xi": parse(XI), "xi2": parse(XI2_CLOSED), "h": parse(H)}
    for name, (f, g, *_rest) in NAMED.items():
        out[f"{name}.f"] = parse(f)
        out[f"{name}.g"] = parse(g)
    return out


def hop_factor_polynomial(xi2_prime: Expr, degree: int = 4, n: int = 41) -> np.ndarray:
    """Coefficients (in ``y = x^2``, lowest first) of the polynomial factor of ``xi2'``.

    The positive prefactor ``2x e^{x^2-x^4}/(x^2-1)^2`` is divided out
    numerically and the remainder fitted on points ``y`` in ``(0.05, 0.9)``.
    """
    from .numerics import evaluate_array

    xs = np.sqrt(np.linspace(0.05, 0.9, n))
    vals = evaluate_array(xi2_prime, xs)
    pref = 2 * xs * np.exp(xs ** 2 - xs ** 4) / (xs ** 2 - 1) ** 2
    coef = Polynomial.fit(xs ** 2, vals / pref, degree).convert().coef
    return coef


def xi2_expression() -> Expr:
    """``xi2 = F'/G'`` for the k2 pipeline, derived symbolically."""
    F, G = parse(NAMED["xi1"][0]), parse(NAMED["xi1"][1])
    from .expr import BinOp

    return simplify(BinOp("/", differentiate(F), differentiate(G)))


__all__ = [
    "H", "H_SQ", "NAMED", "XI", "XI_PRIME_CLOSED", "XI2_CLOSED", "named", "G_TEMPLATES", "CorpusProblem",
    "random_problem", "random_corpus", "expression_corpus", "hop_factor_polynomial", "xi2_expression",
]

"""Command-line front end.

Usage:
    monorule analyze -f "x^2" -g "x" -a 0 -b 2
    monorule verify -f "1+x^2" -g "x" -a 0 -b 2 --open-left --oracle-n 8192
    monorule reproduce all
    monorule plot-data -f "x^2" -g "x" -a 0 -b 2 -o trace.csv -n 512

Exit codes: 0 certified, 1 error, 2 not certified (inconclusive, ineligible
or oracle-assisted), 3 verdict and oracle disagree (``verify`` only).
"""

from __future__ import annotations

import json
import math
import sys
import time
from typing import Any

import click

from . import __version__
from .expr import ParseError
from .numerics import NumericConfig, NumericsError
from .shape import (
    Certificate,
    Classification,
    Decreasing,
    IneligibleError,
    Increasing,
    RatioProblem,
    check_hypotheses,
    classify,
    classify_split,
    extremum_certificate,
    one_change_certify,
    two_change_certify,
)

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED, EXIT_DISAGREE = 0, 1, 2, 3


def _clean(obj: Any) -> Any:
    """Make a report JSON-safe: non-finite floats become strings."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return _clean(obj.item())
    return obj


def load_config(config_path: str | None, overrides: tuple[str, ...]) -> NumericConfig:
    """Config file (or ``MONORULE_CONFIG``) then ``KEY=VALUE`` overrides."""
    cfg = NumericConfig.from_file(config_path) if config_path else NumericConfig.from_env()
    if not overrides:
        return cfg
    data = cfg.to_dict()
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--tol")
        if key not in data:
            raise click.BadParameter(f"unknown setting {key!r}; known: {', '.join(data)}", param_hint="--tol")
        data[key] = type(data[key])(float(value)) if isinstance(data[key], int) else float(value)
    return NumericConfig.from_mapping(data)


def build_problem(f: str, g: str, a: str, b: str, open_left: bool, open_right: bool,
                  cfg: NumericConfig) -> RatioProblem:
    return RatioProblem.from_strings(f, g, a, b, open_left=open_left, open_right=open_right, cfg=cfg)


def build_report(command: str, p: RatioProblem, cls: Classification, timings: dict,
                 verification: dict | None = None) -> dict:
    report = cls.report
    rep = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "problem": p.describe(),
        "hypotheses": report.to_dict() if report is not None else None,
        "verdict": cls.to_dict(),
        "verification": verification,
        "timings": timings,
    }
    return _clean(rep)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_text(rep: dict) -> str:
    """Human-readable report; numbers are printed with full precision, as in JSON."""
    lines = []
    pr = rep["problem"]
    lines.append(f"f/g = ({pr['f']}) / ({pr['g']})")
    lo = "(" if pr["open_left"] else "["
    hi = ")" if pr["open_right"] or pr["b"] == "inf" else "]"
    lines.append(f"interval: {lo}{_fmt(pr['a'])}, {_fmt(pr['b'])}{hi}")
    lines.append(f"f'/g' = {pr['hopital']}")
    hyp = rep["hypotheses"]
    if hyp:
        lines.append(f"g: {hyp['g_sign']}   g': {hyp['gprime_sign']}   f'/g': {hyp['strictness']}")
        if hyp["split_points"]:
            lines.append("  sign changes at: " + ", ".join(_fmt(x) for x in hyp["split_points"]))
        for s in hyp["hopital_segments"] or []:
            lines.append(f"  f'/g' {s['direction']:<4} on [{_fmt(s['lo'])}, {_fmt(s['hi'])}]")
    v = rep["verdict"]
    shape = v["shape"]
    lines.append(f"status: {v['status']}")
    if shape:
        lines.append(f"shape: {shape['kind']} ({' then '.join(shape['directions'])})")
        for t in shape["turning_points"]:
            lines.append(f"  turning point c = {_fmt(t['c'])} ({t['sense']}), residual {_fmt(t['residual'])}")
    cert = v["certificate"]
    lines.append(f"rule: {cert['rule']}   case: {', '.join(cert['case']) or '-'}   bound: {cert['bound']}")
    for c in cert["endpoint_checks"]:
        lines.append(f"  at {c['endpoint']}: f/g = {_fmt(c['ratio']['value'])}, f'/g' = {_fmt(c['hopital']['value'])}"
                     f" -> {c['relation']} ({c['method']})")
    for part in cert["parts"]:
        lines.append(f"  part: {part['rule']} {', '.join(part['case'])}")
    for n in cert["notes"]:
        lines.append(f"  note: {n}")
    for r in v["reasons"]:
        lines.append(f"  reason: {r}")
    ver = rep.get("verification")
    if ver:
        lines.append(f"oracle: {ver['observed']['kind']} with {ver['oscillations_observed']} change(s); "
                     f"agreement {ver['agreement']}, worst discrepancy {_fmt(ver['worst_discrepancy'])}")
        for t in ver["observed"]["turning_points"]:
            lines.append(f"  observed change at {_fmt(t['c'])}")
    lines.append("timings: " + ", ".join(f"{k} {v:.3f}s" for k, v in rep["timings"].items()))
    return "\n".join(lines)


def _emit(rep: dict, fmt: str) -> None:
    if fmt == "json":
        click.echo(json.dumps(rep, indent=2))
    else:
        click.echo(render_text(rep))


def _fail(exc: Exception, source: dict[str, str] | None = None) -> None:
    if isinstance(exc, ParseError) and source:
        click.echo(f"error: {exc.kind} at position {exc.position}: {exc.message}", err=True)
        for name, text in source.items():
            if text is not None:
                click.echo(f"  {name}: {text}", err=True)
        return
    if isinstance(exc, NumericsError) and getattr(exc, "x", None) is not None:
        click.echo(f"error: {exc} (at x={exc.x!r})", err=True)
        return
    click.echo(f"error: {exc}", err=True)


def problem_options(fn):
    opts = [
        click.option("-f", "f_text", required=True, help="Numerator expression in x."),
        click.option("-g", "g_text", required=True, help="Denominator expression in x."),
        click.option("-a", "a_text", required=True, help="Left end (number or constant expression)."),
        click.option("-b", "b_text", required=True, help="Right end; 'inf' for an unbounded interval."),
        click.option("--open-left", is_flag=True, help="Exclude the left end."),
        click.option("--open-right", is_flag=True, help="Exclude the right end."),
        click.option("--auto-split", is_flag=True, help="Split where g or g' changes sign and stitch."),
        click.option("--rule", type=click.Choice(list(RULES)), default="classify", show_default=True,
                     help="classify: full case analysis; extremum, one-change, two-change: the oscillation "
                          "certificates."),
        click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True),
        click.option("--tol", "tol", multiple=True, metavar="KEY=VALUE", help="Override a numeric setting."),
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON file of numeric settings (default: $MONORULE_CONFIG)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


RULES = ("classify", "extremum", "one-change", "two-change")


def run_rule(p: RatioProblem, rule: str, auto_split: bool = False) -> Classification:
    """Apply one rule and express the outcome as a :class:`Classification`."""
    if rule == "classify":
        return classify_split(p) if auto_split else classify(p)
    report = check_hypotheses(p)
    try:
        if rule == "extremum":
            ext = extremum_certificate(p)
            cert = ext.certificate
            cert.notes.append(f"global {ext.kind} {ext.value!r} at x = {ext.location!r}")
            return Classification(ext.shape, cert, report, "certified" if ext.certified else "oracle-assisted",
                                  [], (p.a, p.b))
        res = one_change_certify(p) if rule == "one-change" else two_change_certify(p)
    except IneligibleError as exc:
        return Classification(None, Certificate("ineligible"), report, "ineligible", [str(exc)], (p.a, p.b))
    shape = None
    if res.status == "certified-increasing":
        shape = Increasing()
    elif res.status == "certified-decreasing":
        shape = Decreasing()
    status = "certified" if shape is not None else res.status
    return Classification(shape, res.certificate, report, status, list(res.reasons), (p.a, p.b))


def _analyze(f_text, g_text, a_text, b_text, open_left, open_right, auto_split, rule, tol, config_path):
    cfg = load_config(config_path, tol)
    t0 = time.perf_counter()
    p = build_problem(f_text, g_text, a_text, b_text, open_left, open_right, cfg)
    cls = run_rule(p, rule, auto_split)
    return p, cls, {"classify": time.perf_counter() - t0}


@click.group()
@click.version_option(__version__, prog_name="monorule")
def main() -> None:
    """Decide the monotonicity shape of a quotient f/g on an interval."""


@main.command()
@problem_options
def analyze(f_text, g_text, a_text, b_text, open_left, open_right, auto_split, rule, fmt, tol, config_path):
    """Classify f/g and print the certificate."""
    try:
        p, cls, timings = _analyze(f_text, g_text, a_text, b_text, open_left, open_right, auto_split, rule, tol,
                                   config_path)
    except (ParseError, NumericsError, ValueError) as exc:
        _fail(exc, {"f": f_text, "g": g_text})
        sys.exit(EXIT_ERROR)
    _emit(build_report("analyze", p, cls, timings), fmt)
    sys.exit(EXIT_OK if cls.certified else EXIT_UNCERTIFIED)


@main.command()
@problem_options
@click.option("--oracle-n", default=8192, show_default=True, help="Oracle sample count.")
def verify(f_text, g_text, a_text, b_text, open_left, open_right, auto_split, rule, fmt, tol, config_path,
           oracle_n):
    """Classify f/g and check the verdict against dense sampling."""
    from . import oracle

    try:
        p, cls, timings = _analyze(f_text, g_text, a_text, b_text, open_left, open_right, auto_split, rule, tol,
                                   config_path)
        t0 = time.perf_counter()
        ver = oracle.verify(p, cls.shape, oracle_n)
        timings["oracle"] = time.perf_counter() - t0
    except (ParseError, NumericsError, ValueError) as exc:
        _fail(exc, {"f": f_text, "g": g_text})
        sys.exit(EXIT_ERROR)
    _emit(build_report("verify", p, cls, timings, ver.to_dict()), fmt)
    if cls.shape is not None and not ver.agreement:
        sys.exit(EXIT_DISAGREE)
    sys.exit(EXIT_OK if cls.certified else EXIT_UNCERTIFIED)


@main.command()
@click.argument("name", type=click.Choice(["example1", "example2", "example3", "example4", "hlp147", "all"]))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.option("--tol", "tol", multiple=True, metavar="KEY=VALUE", help="Override a numeric setting.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
def reproduce(name, fmt, tol, config_path):
    """Run the canned worked-example pipelines; compare reference and computed values."""
    from .reproduce import reproduce as run

    cfg = load_config(config_path, tol)
    results = run(name, cfg)
    if fmt == "json":
        click.echo(json.dumps(_clean({"schema_version": SCHEMA_VERSION, "results": [r.to_dict() for r in results],
                                      "passed": all(r.passed for r in results)}), indent=2))
    else:
        for r in results:
            budget = f" (budget {r.budget:g}s)" if r.budget else ""
            click.echo(f"{r.name}: {'PASS' if r.passed else 'FAIL'} in {r.elapsed:.2f}s{budget}")
            for c in r.checks:
                delta = "" if c.delta is None else f"  |d| = {c.delta:.3g}"
                tol_s = "" if c.tol is None else f" (tol {c.tol:g})"
                click.echo(f"  [{'ok' if c.passed else 'FAIL'}] {c.label}: reference {_fmt(c.expected)}, "
                           f"computed {_fmt(c.computed)}{delta}{tol_s}  [{c.source}]")
            for n in r.notes:
                click.echo(f"  note: {n}")
        if len(results) > 1:
            n_ok = sum(r.passed for r in results)
            click.echo(f"{n_ok}/{len(results)} pipelines passed")
    sys.exit(EXIT_OK if all(r.passed for r in results) else EXIT_UNCERTIFIED)


@main.command("plot-data")
@problem_options
@click.option("-o", "output", required=True, type=click.Path(dir_okay=False, writable=True), help="CSV path.")
@click.option("-n", "count", default=512, show_default=True, help="Number of rows.")
def plot_data(f_text, g_text, a_text, b_text, open_left, open_right, auto_split, rule, fmt, tol, config_path,
              output, count):
    """Write x, ratio, hopital columns on the inset grid."""
    from .oracle import export_csv, sample_ratio

    try:
        cfg = load_config(config_path, tol)
        p = build_problem(f_text, g_text, a_text, b_text, open_left, open_right, cfg)
        rows = export_csv(sample_ratio(p, count), output)
    except (ParseError, NumericsError, ValueError) as exc:
        _fail(exc, {"f": f_text, "g": g_text})
        sys.exit(EXIT_ERROR)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo(f"wrote {rows} rows to {output}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()

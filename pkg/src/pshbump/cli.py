"""pshbump command line.

Exit codes: 0 certified/ok, 2 violated or failed, 3 inconclusive, 1 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from typing import List, Optional

import numpy as np

from .certify import cells_csv, certify_psd, set_threads
from .exceptional import Inconclusive, InvalidInput, PshViolation
from .polyring import ParseError, RealityError, format_poly, parse_poly
from .structure import StructureError, check_property_A, check_property_B, factor_levelsets
from . import pipeline
from .pipeline import EXIT, FIXTURES, Outcome, UsageError

COMMANDS = ("analyze", "lines", "classify", "factor", "bump", "certify", "examples")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pshbump", description="Analyze and bump plurisubharmonic polynomials on C^2.")
    ap.add_argument("command", choices=COMMANDS)
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--poly", help='polynomial, e.g. "abs2(z1^2 - z2^2)"')
    src.add_argument("--example", choices=sorted(FIXTURES), help="built-in fixture")
    ap.add_argument("--weights", help="m1,m2 for weighted-homogeneous input")
    ap.add_argument("--tol", type=float, default=1e-8, help="line enclosure width")
    ap.add_argument("--grid", type=int, default=64, help="certification grid per axis")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", help="write the report here instead of stdout")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    return ap


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None, complex to pairs."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _weights(text: Optional[str]):
    if text is None:
        return None
    try:
        m1, m2 = (int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--weights expects m1,m2 with integers, got {text!r}")
    return m1, m2


def _input(args):
    if args.example:
        src, w, _ = FIXTURES[args.example]
        weights = _weights(args.weights) or w
        return parse_poly(src, real=True), weights, args.example
    if args.poly is None:
        raise UsageError("--poly or --example is required")
    return parse_poly(args.poly, real=True), _weights(args.weights), "poly"


def _finish(out: Outcome, verdict: str, reason: str = "") -> Outcome:
    out.verdict = verdict
    out.report["verdict"] = verdict
    out.report["reason"] = reason
    out.report["exit_code"] = EXIT[verdict]
    return out


def run_lines(args) -> Outcome:
    p, weights, source = _input(args)
    w = pipeline.resolve_weights(p, weights)
    out = Outcome("ok", pipeline.header("lines", p, source))
    out.report["weights"] = w.to_dict()
    try:
        exc = pipeline.lines_stage(p, w, args.tol)
    except PshViolation as err:
        return _finish(out, "violated", str(err))
    except Inconclusive as err:
        return _finish(out, "inconclusive", str(err))
    out.report["exceptional"] = pipeline.exceptional_to_dict(exc)
    out.csv = pipeline.lines_csv(exc)
    return _finish(out, "ok")


def run_classify(args) -> Outcome:
    p, weights, source = _input(args)
    w = pipeline.resolve_weights(p, weights)
    q = pipeline.pullback(p, w)
    out = Outcome("ok", pipeline.header("classify", p, source))
    out.report["weights"] = w.to_dict()
    if check_property_B(q):
        out.report["degeneracy"] = {"property_b": True, "property_a": {"status": "not-applicable"}}
        return _finish(out, "ok")
    try:
        exc = pipeline.lines_stage(p, w, args.tol)
    except PshViolation as err:
        return _finish(out, "violated", str(err))
    except Inconclusive as err:
        return _finish(out, "inconclusive", str(err))
    out.report["exceptional"] = pipeline.exceptional_to_dict(exc)
    rep = check_property_A(p, exc, weights=(w.m1, w.m2))
    out.report["degeneracy"] = rep.to_dict()
    status = rep.property_a.status
    verdict = {"holds": "ok", "fails": "failed", "inconclusive": "inconclusive"}[status]
    return _finish(out, verdict, rep.property_a.note if verdict != "ok" else "")


def run_factor(args) -> Outcome:
    p, weights, source = _input(args)
    w = pipeline.resolve_weights(p, weights)
    q = pipeline.pullback(p, w)
    out = Outcome("ok", pipeline.header("factor", p, source))
    out.report["weights"] = w.to_dict()
    try:
        fact = factor_levelsets(q)
    except StructureError as err:
        return _finish(out, "failed", str(err))
    out.report["factorization"] = fact.to_dict()
    return _finish(out, "ok")


def run_certify(args) -> Outcome:
    p, weights, source = _input(args)
    w = pipeline.resolve_weights(p, weights)
    q = pipeline.pullback(p, w)
    out = Outcome("ok", pipeline.header("certify", p, source))
    out.report["weights"] = w.to_dict()
    cert = certify_psd(q, grid=args.grid)
    out.certificate = cert
    out.report["certificates"] = {"psh": cert.to_dict()}
    reason = "" if cert.certified else "Levi form of the pullback on the unit sphere"
    return _finish(out, cert.verdict, reason)


def run_analyze(args, command: str = "analyze") -> Outcome:
    p, weights, source = _input(args)
    return pipeline.analyze(p, weights, args.tol, args.grid, source, command)


def run_examples(args) -> Outcome:
    if args.poly is not None:
        raise UsageError("examples takes --example, not --poly")
    names = [args.example] if args.example else sorted(FIXTURES)
    report = {"schema": 1, "command": "examples", "conventions": pipeline.CONVENTIONS,
              "tool": {"name": "pshbump", "version": pipeline.__version__}, "fixtures": []}
    out = Outcome("ok", report)
    worst = "ok"
    for name in names:
        src, weights, desc = FIXTURES[name]
        p = parse_poly(src, real=True)
        w = pipeline.resolve_weights(p, weights)
        cert = certify_psd(pipeline.pullback(p, w), grid=args.grid)
        report["fixtures"].append({
            "name": name, "poly": format_poly(p), "source": src, "weights": [w.m1, w.m2],
            "description": desc, "psh": cert.to_dict(),
        })
        if EXIT[cert.verdict] > EXIT[worst]:
            worst = cert.verdict
        out.certificate = cert
    return _finish(out, worst, "" if worst == "ok" else "fixture failed re-verification")


RUNNERS = {
    "analyze": run_analyze,
    "bump": lambda args: run_analyze(args, "bump"),
    "lines": run_lines,
    "classify": run_classify,
    "factor": run_factor,
    "certify": run_certify,
    "examples": run_examples,
}


def load_schema() -> dict:
    """JSON schema (draft 2020-12) for every report this CLI writes."""
    path = resources.files("pshbump").joinpath("report.schema.json")
    return json.loads(path.read_text())


def _error(kind: str, message: str) -> dict:
    return {"schema": 1, "error": {"type": kind, "message": message}, "exit_code": 1, "verdict": "error"}


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            pass


def _join_values(argv: List[str]) -> List[str]:
    # argparse reads "--poly -abs2(z1)" as two options; bind the value explicitly
    out: List[str] = []
    i = 0
    while i < len(argv):
        if argv[i] == "--poly" and i + 1 < len(argv):
            out.append(f"--poly={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[List[str]] = None) -> int:
    out_path = None
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_values(argv))
        out_path = args.out
        set_threads(args.threads)
        outcome = RUNNERS[args.command](args)
    except (UsageError, ParseError, RealityError, InvalidInput) as err:
        _emit(dumps(_error(type(err).__name__, str(err))), out_path)
        return 1
    if args.format == "csv":
        text = outcome.csv
        if text is None:
            text = cells_csv(outcome.certificate) if outcome.certificate is not None else "t,theta1,theta2,min_eig\n"
    else:
        text = dumps(outcome.report)
    _emit(text, out_path)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())

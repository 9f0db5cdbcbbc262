"""End-to-end analysis: weights, psh check, exceptional curves, structure, bump, delta0.

Every stage returns plain dicts for the JSON report.  Verdicts map onto exit codes
in the CLI: certified 0, violated/failed 2, inconclusive 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, Optional, Tuple

from . import __version__
from .bump import (
    BumpError,
    SymmetrizedView,
    cone_bump,
    levelset_bump,
    patch_bumps,
    subharmonic_profile,
    symmetrize_and_descend,
    wedge_bump,
)
from .certify import Certificate, certify_psd
from .exceptional import ExceptionalSet, Inconclusive, InvalidInput, PshViolation, harmonic_curves
from .levi import complex_hessian
from .polyring import MixedPoly, format_poly, infer_weights, pluriharmonic_part, power_map
from .structure import StructureError, check_property_A, check_property_B, factor_levelsets

CONVENTIONS = ("Levi form h_jk = d^2 P / dz_j dconj(z_k); Laplacian = 4 d dbar; "
               "sphere points z = (cos t e^{i th1}, sin t e^{i th2})")

EXIT = {"certified": 0, "ok": 0, "violated": 2, "failed": 2, "inconclusive": 3}

FIXTURES = {
    "kn": ("abs2(z1)^4 + (15/7)*abs2(z1)*Re(z1^6)", (8, 8),
           "the subharmonic model G(z1) in one variable, viewed on C^2"),
    "ex1": ("abs2(z1)^3*abs2(z2) + abs2(z1)^4 + (15/7)*abs2(z1)*Re(z1^6)", (8, 8),
            "homogeneous core with a single exceptional line z1 = 0"),
    "ex2": ("abs2(z1*z2)^4 + (15/7)*abs2(z1*z2)*Re(z1^6*z2^6)", (16, 16),
            "G(z1 z2): harmonic along the level sets of z1 z2"),
    "weighted": ("abs2(z1)*abs2(z2) + abs2(z2)^3", (3, 6),
                 "weighted-homogeneous case, pullback |z1|^4|z2|^2 + |z2|^6"),
}


class UsageError(ValueError):
    pass


@dataclass
class Outcome:
    verdict: str
    report: Dict = field(default_factory=dict)
    certificate: Optional[Certificate] = None
    csv: Optional[str] = None
    bump: Optional[object] = None
    exceptional: Optional[ExceptionalSet] = None
    pullback_bump: Optional[object] = None

    @property
    def exit_code(self) -> int:
        return EXIT[self.verdict]


@dataclass(frozen=True)
class Weights:
    m1: int
    m2: int
    sigma: Tuple[int, int]
    inferred: bool

    def to_dict(self) -> dict:
        return {"m1": self.m1, "m2": self.m2, "sigma": list(self.sigma), "inferred": self.inferred}


def resolve_weights(p: MixedPoly, weights: Optional[Tuple[int, int]] = None) -> Weights:
    """Explicit weights are checked; otherwise homogeneous degree d gives (d, d), else inference."""
    if p.is_zero():
        raise UsageError("zero polynomial")
    inferred = weights is None
    if weights is None:
        d = p.homogeneous_degree()
        if d:
            weights = (d, d)
        else:
            sig = infer_weights(p)
            if sig is None:
                raise UsageError("weights are ambiguous or do not exist; pass --weights m1,m2")
            weights = (sig.m1, sig.m2)
    m1, m2 = Fraction(weights[0]), Fraction(weights[1])
    if m1 <= 0 or m2 <= 0 or m1.denominator != 1 or m2.denominator != 1:
        raise UsageError("weights must be positive integers")
    m1, m2 = int(m1), int(m2)
    for s, t in p.bidegrees():
        if Fraction(s, m1) + Fraction(t, m2) != 1:
            raise UsageError(f"polynomial is not ({m1},{m2})-homogeneous of weight 1")
    K = m1 * m2 // math.gcd(m1, m2)
    return Weights(m1, m2, (K // m1, K // m2), inferred)


def pullback(p: MixedPoly, w: Weights) -> MixedPoly:
    return p if w.sigma == (1, 1) else power_map(p, *w.sigma)


def _pair(z) -> list:
    return [float(z.real), float(z.imag)]


def exceptional_to_dict(exc: ExceptionalSet) -> dict:
    lines = []
    for e in exc.lines:
        lines.append({
            "at_infinity": e.at_infinity,
            "center": None if e.at_infinity else _pair(e.center),
            "radius": e.radius,
            "width": e.width,
            "exact": None if e.exact is None else str(e.exact),
        })
    curves = [{
        "equation": c.describe(),
        "zeta": None if c.at_infinity else _pair(c.zeta),
        "at_infinity": c.at_infinity,
        "exponents": list(c.exponents),
        "lines": len(c.members),
    } for c in exc.curves]
    return {"sigma": list(exc.sigma), "lines": lines, "curves": curves, "note": exc.orbit_note}


def lines_csv(exc: ExceptionalSet) -> str:
    rows = ["re,im,radius,at_infinity"]
    for e in exc.lines:
        c = 0j if e.at_infinity else e.center
        rows.append(f"{c.real:.15g},{c.imag:.15g},{e.radius:.6e},{int(e.at_infinity)}")
    return "\n".join(rows) + "\n"


def header(command: str, p: MixedPoly, source: str) -> dict:
    return {
        "schema": 1,
        "tool": {"name": "pshbump", "version": __version__},
        "command": command,
        "conventions": CONVENTIONS,
        "input": {"poly": format_poly(p), "source": source},
    }


def psh_stage(q: MixedPoly, grid: int) -> Certificate:
    return certify_psd(q, grid=grid)


def pluriharmonic_stage(p: MixedPoly) -> dict:
    part = pluriharmonic_part(p)
    levi = complex_hessian(p)
    zero = levi.h11.is_zero() and levi.h22.is_zero() and levi.h12.is_zero()
    return {"pluriharmonic_part": format_poly(part), "levi_identically_zero": zero}


def lines_stage(p: MixedPoly, w: Weights, tol: float) -> ExceptionalSet:
    return harmonic_curves(p, w.m1, w.m2, tol)


def analyze(p: MixedPoly, weights: Optional[Tuple[int, int]] = None, tol: float = 1e-8,
            grid: int = 64, source: str = "poly", command: str = "analyze") -> Outcome:
    w = resolve_weights(p, weights)
    q = pullback(p, w)
    deg = q.homogeneous_degree()
    if deg is None or deg % 2:
        raise UsageError("pullback must be homogeneous of even degree")
    report = header(command, p, source)
    report["weights"] = w.to_dict()
    report["pullback"] = format_poly(q)
    certs: Dict[str, dict] = {}
    report["certificates"] = certs

    built: Dict[str, object] = {}

    def finish(verdict: str, reason: str = "", cert: Optional[Certificate] = None) -> Outcome:
        report["verdict"] = verdict
        report["reason"] = reason
        report["exit_code"] = EXIT[verdict]
        return Outcome(verdict, report, cert, bump=built.get("bump"), exceptional=built.get("exc"),
                       pullback_bump=built.get("pullback_bump"))

    plh = pluriharmonic_stage(q)
    report["pluriharmonic"] = plh
    if plh["levi_identically_zero"]:
        return finish("failed", "pluriharmonic: every line is harmonic, no bump exists")

    psh = psh_stage(q, grid)
    certs["psh"] = psh.to_dict()
    report["psh"] = {"verdict": psh.verdict, "certificate": "psh"}
    if psh.verdict != "certified":
        return finish(psh.verdict, "pullback is not certified plurisubharmonic", psh)

    try:
        exc = lines_stage(p, w, tol)
    except PshViolation as err:
        return finish("violated", str(err))
    except Inconclusive as err:
        return finish("inconclusive", str(err))
    report["exceptional"] = exceptional_to_dict(exc)
    built["exc"] = exc

    k = deg // 2
    if check_property_B(q):
        report["degeneracy"] = {"property_b": True, "property_a": {"status": "not-applicable"}}
        return _levelset_route(q, w, report, certs, grid, finish, built)

    deg_report = check_property_A(p, exc, weights=(w.m1, w.m2))
    report["degeneracy"] = deg_report.to_dict()
    report["factorization"] = None
    status = deg_report.property_a.status
    if status == "fails":
        return finish("failed", "property A fails: " + deg_report.property_a.note)
    if status == "inconclusive":
        return finish("inconclusive", "property A: " + deg_report.property_a.note)
    return _patch_route(q, w, exc, deg_report, k, report, certs, grid, finish, built)


def _levelset_route(q, w, report, certs, grid, finish, built) -> Outcome:
    try:
        fact = factor_levelsets(q)
    except StructureError as err:
        report["factorization"] = None
        return finish("failed", f"factorization: {err}")
    report["factorization"] = fact.to_dict()
    j = fact.u.homogeneous_degree()
    if j is None or j % 2:
        return finish("failed", "U must be homogeneous of even degree for a level-set bump")
    try:
        prof, C = subharmonic_profile(fact.u)
        bump = levelset_bump(fact.f, j // 2, prof)
    except BumpError as err:
        return finish("failed", f"profile: {err}")
    report["profile"] = {"C": C, "degree": j, "coefficients": prof.to_dict()}
    built["bump"] = built["pullback_bump"] = bump
    cert = certify_psd((q, bump, 1.0), grid=grid)
    certs["bump_psd"] = cert.to_dict()
    report["bump"] = bump.to_dict()
    report["delta0"] = {"value": 1.0 if cert.certified else None, "bracket": [1.0, None],
                        "certificate": "bump_psd"}
    return finish(cert.verdict, "" if cert.certified else "level-set bump at delta = 1", cert)


def _patch_route(q, w, exc, deg_report, k, report, certs, grid, finish, built) -> Outcome:
    cones = []
    try:
        for line in exc.lines:
            b, _, sigma = cone_bump(q, line)
            cones.append((b, sigma))
        wedge_part = None
        wedge = deg_report.wedge
        if wedge is not None and (wedge.everything or wedge.centers):
            wedge_part = wedge_bump(q, replace(wedge, sigma=(1, 1)), k, exc)
        res = patch_bumps(q, cones, wedge_part, exc, grid=max(16, grid // 2))
    except BumpError as err:
        return finish("failed", f"bump construction: {err}")
    lo, hi = res.delta_bracket
    bump = res.bump
    built["bump"] = built["pullback_bump"] = bump
    certs["bump_psd"] = res.certificate.to_dict()
    certs["bump_strict"] = res.strict.to_dict()
    final = certify_psd((q, bump, lo), grid=grid)
    certs["bump_psd_final"] = final.to_dict()
    if w.sigma != (1, 1):
        try:
            desc = symmetrize_and_descend(bump, w.sigma)
        except BumpError as err:
            return finish("failed", f"descent: {err}")
        built["bump"] = desc
        final = certify_psd((q, SymmetrizedView(desc), lo), grid=grid)
        certs["descended_psd"] = final.to_dict()
        report["bump"] = desc.to_dict()
        ref = "descended_psd"
    else:
        report["bump"] = bump.to_dict()
        ref = "bump_psd_final"
    report["strict"] = {"verdict": res.strict.verdict, "constant": res.strict.constant,
                        "certificate": "bump_strict", "informational": True}
    report["delta0"] = {"value": lo if final.certified else None, "bracket": [lo, hi], "certificate": ref}
    return finish(final.verdict, "" if final.certified else "final bump certificate", final)

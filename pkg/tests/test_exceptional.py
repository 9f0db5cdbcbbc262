import math
import time
from fractions import Fraction

import numpy as np
import pytest

from pshbump.exceptional import (
    InvalidInput,
    PshViolation,
    curve_distance,
    harmonic_curves,
    harmonic_lines,
    normalize_coordinates,
)
from pshbump.levi import phi_coefficients
from pshbump.polyring import ComplexRational, MixedPoly, linear_change, parse_poly, power_map, restrict_line

EX1 = "abs2(z1)^3*abs2(z2) + abs2(z1)^4 + (15/7)*abs2(z1)*Re(z1^6)"
EX2 = "abs2(z1*z2)^4 + (15/7)*abs2(z1*z2)*Re(z1^6*z2^6)"


def _finite(exc):
    return sorted((e for e in exc.lines if not e.at_infinity), key=lambda e: e.center.real)


def test_normalize_examples():
    c, _ = normalize_coordinates(parse_poly("abs2(z1)^2 + abs2(z1)*abs2(z2)"))
    assert c == 0
    c, q = normalize_coordinates(parse_poly("abs2(z1*z2)"))
    assert c == 1
    # restriction to {z2 = 0} of the sheared polynomial is |z1|^4, not harmonic
    assert q.coefficient((2, 2, 0, 0)) == 1
    with pytest.raises(InvalidInput):
        normalize_coordinates(parse_poly("Re(z1^4)"))


def test_two_lines_at_plus_minus_one():
    exc = harmonic_lines(parse_poly("abs2(z1^2 - z2^2)"), tol=1e-8)
    lines = _finite(exc)
    assert len(exc.lines) == 2 and len(lines) == 2
    assert lines[0].contains(-1) and lines[1].contains(1)
    assert all(e.width <= 1e-8 for e in lines)
    assert [e.exact for e in lines] == [ComplexRational(-1), ComplexRational(1)]


def test_both_axes():
    exc = harmonic_lines(parse_poly("abs2(z1*z2)"))
    assert len(exc.lines) == 2
    assert exc.lines[0].contains(0) and exc.lines[1].at_infinity


def test_no_lines():
    assert len(harmonic_lines(parse_poly("abs2(z1)^2 + abs2(z2)^2")).lines) == 0


def test_rejects_non_psh_with_witness():
    with pytest.raises(PshViolation) as err:
        harmonic_lines(parse_poly("abs2(z1)^2 - 3*abs2(z1*z2) + abs2(z2)^2"))
    zeta = err.value.witness
    phi = phi_coefficients(parse_poly("abs2(z1)^2 - 3*abs2(z1*z2) + abs2(z2)^2")).phi_kk
    assert phi(np.array([zeta]), 0)[0].real < 0


def test_rejects_invalid_input():
    with pytest.raises(InvalidInput):
        harmonic_lines(parse_poly("Re(z1^4)"))
    with pytest.raises(InvalidInput):
        harmonic_lines(parse_poly("abs2(z1) + abs2(z2)^2"))


def test_ex2_axes_fast():
    t = time.perf_counter()
    exc = harmonic_lines(parse_poly(EX2), tol=1e-8)
    assert time.perf_counter() - t < 10
    assert len(exc.lines) == 2 and exc.lines[0].contains(0) and exc.lines[1].at_infinity


def test_ex1_single_axis():
    exc = harmonic_lines(parse_poly(EX1))
    assert len(exc.lines) == 1 and exc.lines[0].contains(0)


def test_weighted_curves():
    p = parse_poly("abs2(z1)*abs2(z2) + abs2(z2)^3")
    exc = harmonic_curves(p, 3, 6)
    assert exc.sigma == (2, 1)
    assert [c.describe() for c in exc.curves] == ["z2 = 0"]
    assert power_map(p, 2, 1) == parse_poly("abs2(z1)^2*abs2(z2) + abs2(z2)^3")


def test_homogeneous_curves_match_lines():
    p = parse_poly("abs2(z1^2 - z2^2)")
    a = harmonic_lines(p)
    b = harmonic_curves(p, 4, 4)
    assert b.sigma == (1, 1)
    assert [e.center for e in a.lines] == [e.center for e in b.lines]


def test_ex2_curves():
    exc = harmonic_curves(parse_poly(EX2), 16, 16)
    assert sorted(c.describe() for c in exc.curves) == ["z1 = 0", "z2 = 0"]


def test_orbit_grouping():
    """|z1^2 - z2^4|^2 with weights (4,8): the pullback |w1^4 - w2^4|^2 has four lines,
    which pair up into the two curves z1 = +-z2^2."""
    p = parse_poly("abs2(z1^2 - z2^4)")
    exc = harmonic_curves(p, 4, 8)
    assert exc.sigma == (2, 1)
    centers = sorted((round(e.center.real, 9), round(e.center.imag, 9)) for e in exc.lines)
    assert centers == [(-1, 0), (0, -1), (0, 1), (1, 0)]
    assert len(exc.curves) == 2
    assert all(c.exponents == (1, 2) and len(c.members) == 2 for c in exc.curves)
    assert sorted(round(c.zeta.real, 9) for c in exc.curves) == [-1, 1]


def test_tolerance_refinement_nests():
    p = parse_poly("abs2(z1^2 - 2*z2^2)")
    coarse = _finite(harmonic_lines(p, tol=1e-6))
    fine = _finite(harmonic_lines(p, tol=1e-7))
    assert len(coarse) == len(fine) == 2
    for c, f in zip(coarse, fine):
        assert c.contains(f.center)
        assert abs(abs(f.center) - math.sqrt(2)) < 1e-7


def test_unitary_covariance():
    """Rotating the polynomial moves the lines by the matching Moebius map."""
    p = parse_poly("abs2(z1^2 - z2^2)*abs2(z1 - 2*z2)")
    # U = [[3/5, -4/5], [4/5, 3/5]], p'(w) = p(U^T w)
    a, b = Fraction(3, 5), Fraction(4, 5)
    z1 = MixedPoly({(1, 0, 0, 0): a, (0, 0, 1, 0): b})
    z2 = MixedPoly({(1, 0, 0, 0): -b, (0, 0, 1, 0): a})
    rotated = linear_change(p, z1, z2)
    base = harmonic_lines(p, tol=1e-9)
    moved = harmonic_lines(rotated, tol=1e-9)
    expected = []
    for e in base.lines:
        zeta = e.center
        expected.append((float(a) * zeta - float(b)) / (float(b) * zeta + float(a)))
    got = [e.center for e in moved.lines if not e.at_infinity]
    assert len(got) == len(expected) == 3
    for z in expected:
        assert min(abs(z - g) for g in got) < 1e-8


def test_reported_lines_are_harmonic():
    for text in ("abs2(z1^2 - z2^2)", "abs2(z1*z2)", EX1, "abs2(z1^3 - z2^3)*abs2(z1)"):
        p = parse_poly(text)
        for e in harmonic_lines(p).lines:
            if e.at_infinity:
                coeffs = restrict_line(p.__class__({(m, n, a, b): c for (a, b, m, n), c in p.terms.items()}), 0)
            elif e.exact is not None:
                coeffs = restrict_line(p, e.exact)
            else:
                phi = phi_coefficients(p)(e.center)
                assert max(abs(v) for v in phi.values()) <= 1e-10 * max(1.0, p.coeff_norm())
                continue
            # exact: only pluriharmonic (m or n = 0) modes may survive
            assert all(m == 0 or n == 0 for m, n in coeffs)


def test_missing_lines_are_not_harmonic(rng):
    p = parse_poly("abs2(z1^2 - z2^2)")
    phi = phi_coefficients(p)
    exc = harmonic_lines(p)
    zs = rng.normal(size=100) + 1j * rng.normal(size=100)
    far = [z for z in zs if all(abs(z - e.center) > 1e-3 for e in exc.lines if not e.at_infinity)]
    vals = phi(np.array(far))
    worst = np.max(np.abs(np.array(list(vals.values()))), axis=0)
    assert np.all(worst > 0)


def test_curve_distance():
    exc = harmonic_lines(parse_poly("abs2(z1*z2)"))
    d = curve_distance(exc, np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0]))
    assert d[0] == pytest.approx(0.0, abs=1e-9) and d[1] == pytest.approx(0.0, abs=1e-9)
    assert d[2] == pytest.approx(1 / math.sqrt(2), rel=1e-9)

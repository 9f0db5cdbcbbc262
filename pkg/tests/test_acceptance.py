"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import json
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import jsonschema
import numpy as np
import pytest

from pshbump import pipeline
from pshbump.bump import levelset_bump, subharmonic_profile
from pshbump.certify import certify_psd, crosscheck_hessian, max_delta
from pshbump.cli import load_schema, main
from pshbump.exceptional import curve_distance, harmonic_curves, harmonic_lines
from pshbump.levi import complex_hessian, min_eigenvalue_array, phi_coefficients
from pshbump.polyring import compose, parse_poly
from pshbump.structure import check_property_B, circle_laplacian, factor_bidegree

from conftest import random_psh, random_real_poly

G_TEXT = "abs2(z1)^4 + (15/7)*abs2(z1)*Re(z1^6)"
EX2 = "abs2(z1*z2)^4 + (15/7)*abs2(z1*z2)*Re(z1^6*z2^6)"


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(n: int, title: str):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException as err:
            with capsys.disabled():
                print(f"\nFAIL criterion {n}: {title} ({type(err).__name__}: {str(err).splitlines()[0][:160]})")
            raise
        with capsys.disabled():
            print(f"\nPASS criterion {n}: {title} ({time.perf_counter() - t0:.2f} s)")
    return run


@pytest.fixture(scope="module")
def fixture_outcomes():
    out = {}
    for name, (text, weights, _) in pipeline.FIXTURES.items():
        out[name] = pipeline.analyze(parse_poly(text, real=True), weights, grid=64, source=name)
    return out


def test_criterion_1_two_lines(criterion):
    with criterion(1, "harmonic lines of |z1^2 - z2^2|^2"):
        t0 = time.perf_counter()
        exc = harmonic_lines(parse_poly("abs2(z1^2 - z2^2)"), tol=1e-8)
        elapsed = time.perf_counter() - t0
        assert len(exc.lines) == 2
        assert not any(e.at_infinity for e in exc.lines), "z2 = 0 must be excluded"
        assert all(e.width <= 1e-8 for e in exc.lines)
        assert any(e.contains(1) for e in exc.lines) and any(e.contains(-1) for e in exc.lines)
        assert elapsed < 5, f"{elapsed:.2f} s"


def test_criterion_2_example_two_pipeline(criterion):
    with criterion(2, "level-set pipeline for G(z1 z2)"):
        t0 = time.perf_counter()
        p = parse_poly(EX2)
        assert check_property_B(p)
        fact = factor_bidegree(p, 4, 4)
        assert (fact.d, fact.D) == (1, 1)
        assert fact.u == parse_poly(G_TEXT)
        assert fact.residual_zero and compose(fact.u, fact.f) == p
        prof, C = subharmonic_profile(fact.u)
        assert C >= 2, C
        bump = levelset_bump(fact.f, 4, prof)
        cert = certify_psd((p, bump, 1.0), grid=64)
        assert cert.certified and cert.grid == (65, 64, 64)
        assert time.perf_counter() - t0 < 60


def test_criterion_3_delta_threshold(criterion):
    with criterion(3, "delta bracket around the exact threshold 1"):
        p = parse_poly("abs2(z1)^2 + abs2(z1)*abs2(z2)")
        h = parse_poly("abs2(z1)^2")
        lo, hi = max_delta(p, h)
        assert lo >= 0.9 and hi <= 1.1 and lo <= hi, (lo, hi)
        cert = certify_psd((p, h, 1.05))
        assert cert.verdict == "violated"
        z1, z2 = cert.witness
        f = complex_hessian(p - h.scale(Fraction(21, 20)))
        direct = min_eigenvalue_array(*f.arrays(np.array([z1]), np.array([z2])))[0]
        assert direct < 0 and cert.witness_value < 0


def test_criterion_4_kn_laplacian(criterion):
    with criterion(4, "Laplacian of G on the circle has minimum 4"):
        vals = circle_laplacian(parse_poly(G_TEXT), 3600)
        assert len(vals) == 3600
        assert abs(vals.min() - 4.0) <= 1e-9, vals.min()


def test_criterion_5_hessian_crosscheck(criterion):
    with criterion(5, "symbolic vs finite-difference Hessian"):
        rng = np.random.default_rng(5)
        worst = 0.0
        for i in range(20):
            p = random_real_poly(rng, max_degree=8, terms=6)
            assert p.degree() <= 8 and p.is_real()
            worst = max(worst, crosscheck_hessian(p, samples=50, seed=i))
        assert worst <= 1e-6, worst


def _richardson_laplacian(f, z, h):
    def lap(s):
        return (f(z + s) + f(z - s) + f(z + 1j * s) + f(z - 1j * s) - 4 * f(z)) / (s * s)
    return (4 * lap(h / 2) - lap(h)) / 3


def test_criterion_6_weighted_pipeline(criterion, fixture_outcomes):
    with criterion(6, "weighted pullback, curves and descent"):
        p = parse_poly("abs2(z1)*abs2(z2) + abs2(z2)^3")
        w = pipeline.resolve_weights(p, (3, 6))
        q = pipeline.pullback(p, w)
        assert w.sigma == (2, 1)
        assert q == parse_poly("abs2(z1)^2*abs2(z2) + abs2(z2)^3") and q.homogeneous_degree() == 6
        exc = harmonic_curves(p, 3, 6)
        assert [c.describe() for c in exc.curves] == ["z2 = 0"]

        out = fixture_outcomes["weighted"]
        assert out.verdict == "certified"
        g = out.bump
        assert g is not None and g.sigma == (2, 1)
        rng = np.random.default_rng(6)
        w1 = rng.normal(size=1000) + 1j * rng.normal(size=1000)
        w2 = rng.normal(size=1000) + 1j * rng.normal(size=1000)
        sym = g.symmetric(w1, w2)
        descended = g(w1 ** 2, w2)
        assert np.max(np.abs(descended - sym) / (1 + np.abs(sym))) <= 1e-10
        for l in range(2):
            rot = g.symmetric(np.exp(1j * math.pi * l) * w1, w2)
            assert np.all(np.abs(rot - sym) <= 1e-12 * (1 + np.abs(sym)))


def test_criterion_7_phi_properties(criterion):
    with criterion(7, "phi_kk nonnegative and subharmonic"):
        rng = np.random.default_rng(7)
        worst_val, worst_lap = math.inf, math.inf
        for i in range(10):
            p = random_psh(rng, 2 + i % 2)
            p = p.scale(Fraction(1, max(1, round(p.coeff_norm()))))
            phi = phi_coefficients(p).phi_kk
            zeta = (rng.uniform(-2, 2, 10_000) + 1j * rng.uniform(-2, 2, 10_000))
            vals = np.real(phi(zeta, 0))
            worst_val = min(worst_val, float(vals.min()))
            pts = rng.uniform(-2, 2, 1000) + 1j * rng.uniform(-2, 2, 1000)
            lap = _richardson_laplacian(lambda z: np.real(phi(z, 0)), pts, 1e-3)
            worst_lap = min(worst_lap, float(lap.min()))
        assert worst_val >= -1e-12, worst_val
        assert worst_lap >= -1e-6, worst_lap


def test_criterion_8_bump_zero_set(criterion, fixture_outcomes):
    with criterion(8, "bumps nonnegative, small only near the exceptional curves"):
        rng = np.random.default_rng(8)
        failures = []
        for name, out in sorted(fixture_outcomes.items()):
            assert out.bump is not None, name
            # random points of the sphere in the coordinates the bump is homogeneous in
            v = rng.normal(size=(4, 100_000))
            v /= np.linalg.norm(v, axis=0)
            w1, w2 = v[0] + 1j * v[1], v[2] + 1j * v[3]
            s1, s2 = out.exceptional.sigma
            z1, z2 = w1 ** s1, w2 ** s2
            vals = out.bump(z1, z2)
            assert vals.min() >= 0, (name, vals.min())
            small = vals <= 1e-9
            dist = curve_distance(out.exceptional, z1, z2)
            far = int(np.count_nonzero(dist[small] > 1e-3))
            if far:
                failures.append(f"{name}: {far} points with H <= 1e-9 beyond distance 1e-3 "
                                f"(max {dist[small].max():.3g})")
        assert not failures, "; ".join(failures)


def test_criterion_9_cli_determinism(criterion, capsys):
    with criterion(9, "analyze is byte-identical, schema-valid, exit codes match"):
        schema = load_schema()
        for name in sorted(pipeline.FIXTURES):
            runs = []
            for _ in range(2):
                code = main(["analyze", "--example", name])
                runs.append((code, capsys.readouterr().out))
            (c1, a), (c2, b) = runs
            assert a == b, f"{name}: reports differ"
            rep = json.loads(a)
            jsonschema.validate(rep, schema)
            assert c1 == c2 == pipeline.EXIT[rep["verdict"]] == rep["exit_code"]

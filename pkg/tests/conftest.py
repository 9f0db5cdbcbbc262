from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import strategies as st

from pshbump.certify import certify_psd
from pshbump.polyring import ComplexRational, MixedPoly, Monomial

Z1, Z1B, Z2, Z2B = sp.symbols("z1 z1b z2 z2b")


def to_sympy(p: MixedPoly):
    """Independent sympy image with z and conj(z) as separate symbols."""
    expr = sp.Integer(0)
    for mon, c in p.terms.items():
        coeff = sp.Rational(c.re.numerator, c.re.denominator) + sp.I * sp.Rational(c.im.numerator, c.im.denominator)
        expr += coeff * Z1 ** mon.a * Z1B ** mon.b * Z2 ** mon.m * Z2B ** mon.n
    return sp.expand(expr)


def sympy_eval(expr, z1: complex, z2: complex) -> complex:
    subs = {Z1: z1, Z1B: z1.conjugate(), Z2: z2, Z2B: z2.conjugate()}
    return complex(sp.N(expr.subs(subs), 30))


def random_real_poly(rng: np.random.Generator, max_degree: int = 8, terms: int = 6,
                     homogeneous: int = None) -> MixedPoly:
    """Random real MixedPoly: sum of c*m + conj(c*m) with small integer coefficients."""
    out = MixedPoly()
    for _ in range(terms):
        while True:
            exps = rng.integers(0, max_degree + 1, size=4)
            total = int(exps.sum())
            if 0 < total <= max_degree and (homogeneous is None or total == homogeneous):
                break
        a, b, m, n = (int(x) for x in exps)
        c = ComplexRational(int(rng.integers(-5, 6)), int(rng.integers(-5, 6)))
        mono = MixedPoly({Monomial(a, b, m, n): c})
        out = out + mono + mono.conj()
    return out


def random_holomorphic(rng: np.random.Generator, k: int) -> MixedPoly:
    return MixedPoly({(j, 0, k - j, 0): ComplexRational(int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))
                      for j in range(k + 1)})


def random_psh(rng: np.random.Generator, k: int, squares: int = 2) -> MixedPoly:
    """Sum of |h_i|^2 plus a small strictly psh part, plus a random real
    perturbation shrunk until the certifier accepts it with a positive margin."""
    base = (MixedPoly.monomial(1, 1, 0, 0) + MixedPoly.monomial(0, 0, 1, 1)) ** k
    for _ in range(squares):
        h = random_holomorphic(rng, k)
        base = base + h * h.conj()
    pert = random_real_poly(rng, 2 * k, terms=4, homogeneous=2 * k)
    t = Fraction(base.coeff_norm() / (4 * pert.coeff_norm())).limit_denominator(1000)
    for _ in range(30):
        cand = base + pert.scale(t)
        if certify_psd(cand, margin=1e-3, grid=24, budget=24).certified:
            return cand
        t /= 2
    return base


@st.composite
def mixed_polys(draw, max_exp: int = 3, max_terms: int = 4):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        mon = Monomial(*(draw(st.integers(0, max_exp)) for _ in range(4)))
        re = Fraction(draw(st.integers(-6, 6)), draw(st.integers(1, 4)))
        im = Fraction(draw(st.integers(-6, 6)), draw(st.integers(1, 4)))
        terms[mon] = ComplexRational(re, im)
    return MixedPoly(terms)


complex_points = st.tuples(
    st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)
).map(lambda t: (complex(t[0], t[1]), complex(t[2], t[3])))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

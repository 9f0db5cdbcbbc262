import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pshbump.levi import (
    HermitianForm2,
    complex_hessian,
    eigen_ratio_bound,
    fd_levi,
    leading_coefficient_kk,
    min_eigenvalue,
    min_eigenvalue_array,
    phi_coefficients,
)
from pshbump.polyring import parse_poly

from conftest import Z1, Z1B, Z2, Z2B, complex_points, mixed_polys, random_psh, to_sympy


def test_hessian_examples():
    f = complex_hessian(parse_poly("abs2(z1)^2 + abs2(z2)^2"))
    assert f.h11 == parse_poly("4*abs2(z1)") and f.h22 == parse_poly("4*abs2(z2)")
    assert f.h12.is_zero()
    assert f.det == parse_poly("16*abs2(z1*z2)")

    g = complex_hessian(parse_poly("abs2(z1*z2)"))
    assert g.h11 == parse_poly("abs2(z2)")
    assert g.h22 == parse_poly("abs2(z1)")
    assert g.h12 == parse_poly("conj(z1)*z2")
    assert g.det.is_zero()

    r = complex_hessian(parse_poly("Re(z1^2)"))
    assert r.h11.is_zero() and r.h12.is_zero() and r.h22.is_zero()


@given(mixed_polys(max_exp=3))
@settings(max_examples=40, deadline=None)
def test_hessian_matches_sympy(p):
    """Entry jk is d^2/dz_j dconj(z_k), computed independently by sympy."""
    expr = to_sympy(p)
    f = complex_hessian(p)
    assert sp.expand(to_sympy(f.h11) - sp.diff(expr, Z1, Z1B)) == 0
    assert sp.expand(to_sympy(f.h22) - sp.diff(expr, Z2, Z2B)) == 0
    assert sp.expand(to_sympy(f.h12) - sp.diff(expr, Z1, Z2B)) == 0


@given(mixed_polys(max_exp=2), complex_points)
@settings(max_examples=40, deadline=None)
def test_hermitian_at_real_points(p, z):
    q = p + p.conj()
    f = complex_hessian(q)
    assert f.h21 == f.h12.conj()
    form = f.at(z)
    m = form.matrix()
    assert np.allclose(m, m.conj().T)


def test_min_eigenvalue_examples():
    assert min_eigenvalue(HermitianForm2(2.0, 1.0, 0j)) == 1.0
    assert min_eigenvalue(HermitianForm2(1.0, 1.0, 1 + 0j)) == pytest.approx(0.0, abs=1e-15)
    assert min_eigenvalue(HermitianForm2(5.0, 1.0, 2j)) == pytest.approx(3 - 2 * math.sqrt(2), rel=1e-14)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
@settings(max_examples=200, deadline=None)
def test_min_eigenvalue_matches_eigvalsh(a, b, re, im):
    h = HermitianForm2(a, b, complex(re, im))
    ref = np.linalg.eigvalsh(h.matrix())[0]
    scale = max(1.0, abs(a), abs(b), abs(complex(re, im)))
    assert min_eigenvalue(h) == pytest.approx(ref, abs=1e-12 * scale)


def test_min_eigenvalue_stable_near_singular():
    # det = 1e-20 with entries of size 1: naive subtraction loses it entirely
    h11, h22 = 1.0, 1.0
    h12 = math.sqrt(1.0 - 1e-20)
    val = min_eigenvalue_array(h11, h22, h12 + 0j)
    assert val >= 0


def test_eigen_ratio_bound():
    h = HermitianForm2(5.0, 1.0, 2j)
    assert eigen_ratio_bound(h) == pytest.approx(3 - 2 * math.sqrt(2), rel=1e-12)


def test_phi_examples():
    phi = phi_coefficients(parse_poly("abs2(z1*z2)"))
    assert phi.nonzero() == {(2, 2): parse_poly("16*abs2(z1)")}
    phi = phi_coefficients(parse_poly("abs2(z1^2 - z2^2)"))
    assert phi.phi_kk == parse_poly("16*abs2(z1^2 - 1)")
    phi = phi_coefficients(parse_poly("abs2(z2)^2"))
    assert phi.phi_kk == parse_poly("16")
    assert set(phi.entries) == {(1, 3), (2, 2), (3, 1)}


def test_phi_rejects_bad_input():
    with pytest.raises(ValueError):
        phi_coefficients(parse_poly("abs2(z1)*z1"))
    with pytest.raises(ValueError):
        phi_coefficients(parse_poly("abs2(z1) + abs2(z2)^2"))


def test_phi_is_restricted_laplacian(rng):
    """phi_mn are the Fourier modes of the Laplacian of the restriction to the line."""
    p = parse_poly("abs2(z1)^3*abs2(z2) + abs2(z1)^4 + (15/7)*abs2(z1)*Re(z1^6) + Re(z1^3*conj(z2))*abs2(z2)^2")
    phi = phi_coefficients(p)
    zeta = 0.3 - 0.7j
    vals = phi(zeta)
    # Laplacian in w of p(zeta w, w) on the unit circle, by finite differences
    th = np.arange(64) * 2 * math.pi / 64
    w = np.exp(1j * th)
    h = 1e-3
    f = lambda w_: p(zeta * w_, w_).real
    lap = (f(w + h) + f(w - h) + f(w + 1j * h) + f(w - 1j * h) - 4 * f(w)) / h ** 2
    recon = sum(v * np.exp(1j * (m - n) * th) for (m, n), v in vals.items())
    assert np.allclose(lap, recon.real, atol=1e-4)


def test_leading_coefficient():
    assert leading_coefficient_kk(parse_poly("3*abs2(z1)^2 + abs2(z2)^2")) == 3


def test_fd_levi_accuracy(rng):
    p = parse_poly("abs2(z1)^3*abs2(z2) + abs2(z1)^4 + (15/7)*abs2(z1)*Re(z1^6)")
    z1 = rng.normal(size=50) + 1j * rng.normal(size=50)
    z2 = rng.normal(size=50) + 1j * rng.normal(size=50)
    fd = fd_levi(lambda a, b: p(a, b).real, z1, z2)
    ex = complex_hessian(p).arrays(z1, z2)
    for a, b in zip(fd, ex):
        scale = np.maximum(1.0, np.abs(b))
        assert np.max(np.abs(a - b) / scale) < 1e-6


def test_psh_samples_nonnegative(rng):
    for _ in range(5):
        p = random_psh(rng, 2)
        t = rng.uniform(0, math.pi / 2, 2000)
        a, b = rng.uniform(0, 2 * math.pi, (2, 2000))
        z1, z2 = np.cos(t) * np.exp(1j * a), np.sin(t) * np.exp(1j * b)
        mins = min_eigenvalue_array(*complex_hessian(p).arrays(z1, z2))
        assert mins.min() >= -1e-9 * (1 + p.coeff_norm())

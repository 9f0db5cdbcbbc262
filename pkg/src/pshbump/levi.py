"""Complex Hessians, pointwise Levi forms and the line-restriction coefficients phi_mn.

Convention: the Levi form of p at z applied to v is sum_jk h_jk v_j conj(v_k) with
h_jk = d^2 p / dz_j dconj(z_k).  Laplacians are Delta = 4 d dbar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Tuple

import numpy as np

from .polyring import MixedPoly, line_coefficients, wirtinger


def _ddbar(p: MixedPoly, j: str, k: str) -> MixedPoly:
    return wirtinger(wirtinger(p, k, "antiholomorphic"), j, "holomorphic")


@dataclass(frozen=True)
class HermitianForm2:
    h11: float
    h22: float
    h12: complex

    @property
    def trace(self) -> float:
        return self.h11 + self.h22

    @property
    def det(self) -> float:
        return self.h11 * self.h22 - abs(self.h12) ** 2

    def matrix(self) -> np.ndarray:
        return np.array([[self.h11, self.h12], [np.conj(self.h12), self.h22]], dtype=complex)

    def apply(self, v) -> float:
        v1, v2 = v
        val = (self.h11 * abs(v1) ** 2 + self.h22 * abs(v2) ** 2
               + 2 * (self.h12 * v1 * np.conj(v2)).real)
        return float(val)


@dataclass(frozen=True)
class LeviField:
    h11: MixedPoly
    h12: MixedPoly
    h22: MixedPoly

    @property
    def h21(self) -> MixedPoly:
        return self.h12.conj()

    @property
    def trace(self) -> MixedPoly:
        return self.h11 + self.h22

    @property
    def det(self) -> MixedPoly:
        return self.h11 * self.h22 - self.h12 * self.h12.conj()

    def at(self, z) -> HermitianForm2:
        z1, z2 = complex(z[0]), complex(z[1])
        return HermitianForm2(float(self.h11(z1, z2).real), float(self.h22(z1, z2).real),
                              complex(self.h12(z1, z2)))

    def arrays(self, z1, z2) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.h11(z1, z2).real, self.h22(z1, z2).real, self.h12(z1, z2)

    def form(self, v1: MixedPoly, v2: MixedPoly) -> MixedPoly:
        """Levi form along a polynomial vector field, as a polynomial."""
        return (self.h11 * v1 * v1.conj() + self.h22 * v2 * v2.conj()
                + self.h12 * v1 * v2.conj() + self.h21 * v2 * v1.conj())


def complex_hessian(p: MixedPoly) -> LeviField:
    return LeviField(_ddbar(p, "z1", "z1"), _ddbar(p, "z1", "z2"), _ddbar(p, "z2", "z2"))


def min_eigenvalue(h: HermitianForm2) -> float:
    """Least eigenvalue; the smaller root comes from det/larger to avoid cancellation."""
    return float(min_eigenvalue_array(np.float64(h.h11), np.float64(h.h22), np.complex128(h.h12)))


def min_eigenvalue_array(h11, h22, h12) -> np.ndarray:
    h11 = np.asarray(h11, dtype=float)
    h22 = np.asarray(h22, dtype=float)
    a12 = np.abs(np.asarray(h12))
    tr = h11 + h22
    det = h11 * h22 - a12 * a12
    disc = np.hypot(h11 - h22, 2.0 * a12)
    big = 0.5 * (tr + disc)
    small_direct = 0.5 * (tr - disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        small_stable = np.where(big != 0, det / np.where(big != 0, big, 1.0), 0.0)
    return np.where(tr >= 0, small_stable, small_direct)


def max_eigenvalue_array(h11, h22, h12) -> np.ndarray:
    h11 = np.asarray(h11, dtype=float)
    h22 = np.asarray(h22, dtype=float)
    a12 = np.abs(np.asarray(h12))
    tr = h11 + h22
    det = h11 * h22 - a12 * a12
    disc = np.hypot(h11 - h22, 2.0 * a12)
    small = 0.5 * (tr - disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        big_stable = np.where(small != 0, det / np.where(small != 0, small, 1.0), 0.0)
    return np.where(tr >= 0, 0.5 * (tr + disc), big_stable)


def eigen_ratio_bound(h: HermitianForm2) -> float:
    """|det| / ||h||_2, the modulus of the least-magnitude eigenvalue."""
    h11, h22, a12 = h.h11, h.h22, abs(h.h12)
    disc = math.hypot(h11 - h22, 2 * a12)
    norm = max(abs(0.5 * (h11 + h22 + disc)), abs(0.5 * (h11 + h22 - disc)))
    return abs(h.det) / norm if norm else 0.0


@dataclass(frozen=True)
class PhiFamily:
    entries: Dict[Tuple[int, int], MixedPoly]
    degree: int

    @property
    def k(self) -> int:
        return self.degree // 2

    @property
    def phi_kk(self) -> MixedPoly:
        return self.entries[(self.k, self.k)]

    def nonzero(self) -> Dict[Tuple[int, int], MixedPoly]:
        return {key: v for key, v in self.entries.items() if not v.is_zero()}

    def __call__(self, zeta) -> Dict[Tuple[int, int], complex]:
        zeta = np.asarray(zeta, dtype=complex)
        return {key: v(zeta, 0) for key, v in self.entries.items()}


def phi_coefficients(p: MixedPoly) -> PhiFamily:
    """phi_mn(zeta) = 4 m n c_mn(zeta) for the restriction p(zeta w, w)."""
    deg = p.homogeneous_degree()
    if deg is None or deg % 2:
        raise ValueError("phi family needs a polynomial homogeneous of even degree")
    if not p.is_real():
        raise ValueError("phi family needs a real polynomial")
    coeffs = line_coefficients(p)
    entries = {}
    for m in range(1, deg):
        n = deg - m
        c = coeffs.get((m, n), MixedPoly())
        entries[(m, n)] = c.scale(4 * m * n)
    return PhiFamily(entries, deg)


def leading_coefficient_kk(p: MixedPoly) -> Fraction:
    """C_kk00, the coefficient of |z1|^(2k) in a homogeneous p of degree 2k."""
    k = p.degree() // 2
    return p.coefficient((k, k, 0, 0)).re


def _disk_laplacian(func, z1, z2, v1, v2, h):
    """5-point Laplacian of s -> func(z + s v) at s = 0."""
    c = func(z1, z2)
    acc = -4.0 * c
    for s in (1, -1, 1j, -1j):
        acc = acc + func(z1 + s * h * v1, z2 + s * h * v2)
    return acc / (h * h)


def fd_levi(func, z1, z2, rel_step: float = 1e-3):
    """Levi matrix of a smooth real function by finite differences.

    Levi(v) = Delta_s f(z + s v) / 4 along v = e1, e2, e1 + e2, e1 + i e2, with one
    Richardson step on the 5-point Laplacian; h12 follows by polarization.
    """
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    norm = np.sqrt(np.abs(z1) ** 2 + np.abs(z2) ** 2)
    h = rel_step * np.where(norm > 0, norm, 1.0)

    def levi(v1, v2):
        coarse = _disk_laplacian(func, z1, z2, v1, v2, h)
        fine = _disk_laplacian(func, z1, z2, v1, v2, h / 2)
        return np.real(4.0 * fine - coarse) / 12.0

    h11 = levi(1.0, 0.0)
    h22 = levi(0.0, 1.0)
    re12 = (levi(1.0, 1.0) - h11 - h22) / 2
    im12 = (levi(1.0, 1j) - h11 - h22) / 2
    return h11, h22, re12 + 1j * im12

"""Levi-degeneracy classification and factorizations P = U o F."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Dict, List, Optional, Tuple

import numpy as np
import sympy

from .exceptional import ExceptionalSet, curve_distance
from .levi import complex_hessian, min_eigenvalue_array, max_eigenvalue_array, phi_coefficients
from .polyring import (
    ComplexRational,
    MixedPoly,
    compose,
    evaluate_array,
    format_poly,
    holomorphic_monomial,
    laplacian1,
    power_map,
    restrict_line,
    wirtinger,
)


class StructureError(ValueError):
    pass


def sphere_point(t, th1, th2):
    """(cos t e^{i th1}, sin t e^{i th2}), broadcasting."""
    return np.cos(t) * np.exp(1j * th1), np.sin(t) * np.exp(1j * th2)


# ------------------------------------------------------------ property B

def check_property_B(p: MixedPoly) -> bool:
    """Exact test that the complex Hessian has rank <= 1 everywhere."""
    return complex_hessian(p).det.is_zero()


# ------------------------------------------------------------ property A

@dataclass(frozen=True)
class WedgeSpec:
    """Union of weighted angular balls around sampled points of the projective line.

    Each center is a slope zeta of z1 = zeta z2 in Psi-preimage coordinates, or None
    for z2 = 0.  Membership depends only on the preimage direction, so the set is
    invariant under the weighted dilations.
    """

    m1: int
    m2: int
    centers: Tuple[Optional[complex], ...] = ()
    halfwidth: float = 0.25
    sigma: Tuple[int, int] = (1, 1)
    everything: bool = False

    def distance(self, z1, z2) -> np.ndarray:
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        w1, w2 = preimage(z1, z2, self.sigma)
        norm = np.sqrt(np.abs(w1) ** 2 + np.abs(w2) ** 2)
        norm = np.where(norm == 0, 1.0, norm)
        best = np.full(np.broadcast(w1, w2).shape, np.inf)
        for c in self.centers:
            if c is None:
                d = np.abs(w2) / norm
            else:
                d = np.abs(w1 - c * w2) / (math.sqrt(1 + abs(c) ** 2) * norm)
            best = np.minimum(best, d)
        return best

    def contains(self, z1, z2) -> np.ndarray:
        if self.everything:
            return np.ones(np.broadcast(np.asarray(z1), np.asarray(z2)).shape, dtype=bool)
        return self.distance(z1, z2) < self.halfwidth

    def to_dict(self) -> dict:
        return {
            "m1": self.m1,
            "m2": self.m2,
            "everything": self.everything,
            "halfwidth": self.halfwidth,
            "centers": [None if c is None else [c.real, c.imag] for c in self.centers],
        }


def preimage(z1, z2, sigma: Tuple[int, int]):
    """Principal-root preimage under Psi = (w1^s1, w2^s2)."""
    s1, s2 = sigma
    w1 = z1 if s1 == 1 else np.abs(z1) ** (1.0 / s1) * np.exp(1j * np.angle(z1) / s1)
    w2 = z2 if s2 == 1 else np.abs(z2) ** (1.0 / s2) * np.exp(1j * np.angle(z2) / s2)
    return w1, w2


@dataclass(frozen=True)
class PropertyA:
    status: str  # holds | fails | inconclusive | not-applicable
    margin: float = 0.0
    witness: Optional[Tuple[complex, complex]] = None
    note: str = ""

    def to_dict(self) -> dict:
        out = {"status": self.status, "margin": self.margin, "note": self.note}
        if self.witness is not None:
            out["witness"] = [[self.witness[0].real, self.witness[0].imag],
                              [self.witness[1].real, self.witness[1].imag]]
        return out


@dataclass(frozen=True)
class DegeneracyReport:
    property_b: bool
    property_a: PropertyA
    wedge: Optional[WedgeSpec] = None
    sigma_samples: Tuple[Tuple[complex, complex], ...] = ()
    cell: float = 0.0

    def to_dict(self) -> dict:
        return {
            "property_b": self.property_b,
            "property_a": self.property_a.to_dict(),
            "wedge": None if self.wedge is None else self.wedge.to_dict(),
            "degenerate_samples": len(self.sigma_samples),
            "cell_diameter": self.cell,
        }


def _normalized_min_eig(field_, t, th1, th2, scale):
    z1, z2 = sphere_point(t, th1, th2)
    h11, h22, h12 = field_.arrays(z1, z2)
    return min_eigenvalue_array(h11, h22, h12) / scale


def _polish(field_, start, scale):
    from scipy.optimize import minimize

    def f(x):
        return float(_normalized_min_eig(field_, x[0], x[1], x[2], scale))

    res = minimize(f, np.asarray(start, dtype=float), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 400})
    x = res.x.copy()
    x[0] = min(max(x[0], 0.0), math.pi / 2)
    return x, f(x)


def _line_is_harmonic(q: MixedPoly, w1: complex, w2: complex, rel: float = 1e-7) -> bool:
    """Numerical harmonicity of q along the line through (w1, w2)."""
    phi = phi_coefficients(q)
    if abs(w2) >= abs(w1):
        zeta = w1 / w2
        vals = [abs(complex(v(np.array([zeta]), 0)[0])) for v in phi.entries.values()]
        norms = [v.coeff_norm() * max(1.0, abs(zeta)) ** phi.degree for v in phi.entries.values()]
    else:
        from .polyring import swap
        phi = phi_coefficients(swap(q))
        zeta = w2 / w1
        vals = [abs(complex(v(np.array([zeta]), 0)[0])) for v in phi.entries.values()]
        norms = [v.coeff_norm() * max(1.0, abs(zeta)) ** phi.degree for v in phi.entries.values()]
    scale = max(norms) or 1.0
    return max(vals) <= rel * scale


def check_property_A(p: MixedPoly, exc: ExceptionalSet, resolution: int = 48,
                     tol: float = 1e-9, weights: Optional[Tuple[int, int]] = None) -> DegeneracyReport:
    """Sample the sphere of the homogeneous pullback for Levi-degenerate points.

    Degenerate samples on the exceptional curves are discarded.  The remaining ones
    must keep a weighted angular distance of more than two grid cells from every curve.
    """
    s1, s2 = exc.sigma
    q = power_map(p, s1, s2) if (s1, s2) != (1, 1) else p
    deg = q.homogeneous_degree()
    if weights is None:
        weights = (deg * s1, deg * s2) if deg else (1, 1)
    m1, m2 = int(weights[0]), int(weights[1])
    if check_property_B(p):
        return DegeneracyReport(True, PropertyA("not-applicable", note="property B holds; regimes are exclusive"))
    field_ = complex_hessian(q)
    N = int(resolution)
    t = np.linspace(0.0, math.pi / 2, N + 1)
    th = np.arange(N) * (2 * math.pi / N)
    T, A, B = np.meshgrid(t, th, th, indexing="ij")
    z1, z2 = sphere_point(T, A, B)
    h11, h22, h12 = field_.arrays(z1, z2)
    mins = min_eigenvalue_array(h11, h22, h12)
    scale = float(np.max(max_eigenvalue_array(h11, h22, h12))) or 1.0
    vals = mins / scale
    cell = math.sqrt((math.pi / 2 / N) ** 2 + 2 * (2 * math.pi / N) ** 2)

    # grid local minima (periodic in the angles) are polished to the degeneracy set
    neigh = [np.roll(vals, s, axis=ax) for ax in (1, 2) for s in (1, -1)]
    up = np.concatenate([vals[1:], vals[-1:]], axis=0)
    down = np.concatenate([vals[:1], vals[:-1]], axis=0)
    is_min = (vals <= up) & (vals <= down)
    for nb in neigh:
        is_min &= vals <= nb
    cand = np.argwhere(is_min & (vals <= 1e-2))
    order = np.argsort(vals[tuple(cand.T)], kind="stable")
    seen = set()
    picked = []
    for idx in cand[order]:
        key = _direction_key(*sphere_point(t[idx[0]], th[idx[1]], th[idx[2]]), cell / 4)
        if key not in seen:
            seen.add(key)
            picked.append(idx)
        if len(picked) >= 400:
            break
    degenerate = []
    for idx in picked:
        i, j, k = idx
        x0 = (t[i], th[j], th[k])
        if vals[i, j, k] <= tol:
            x, v = np.array(x0), float(vals[i, j, k])
        else:
            x, v = _polish(field_, x0, scale)
        if v <= tol:
            degenerate.append(tuple(x))
    pts = [sphere_point(*x) for x in degenerate]
    pts = [(complex(a), complex(b)) for a, b in pts]

    # distances to the exceptional curves, computed in preimage (w) coordinates
    exc_radius = max([e.radius for e in exc.lines] + [0.0])
    on_curve = max(1e-6, 4 * exc_radius)
    off = []
    for w in pts:
        d = float(_w_distance(exc, *w)) if exc.lines else math.inf
        if d > on_curve:
            off.append((w, d))
    samples = tuple((complex(a), complex(b)) for a, b in _forward(pts, (s1, s2)))
    if not off:
        margin = 1.0
        wedge = WedgeSpec(m1, m2, (), 0.0, (s1, s2), everything=False)
        return DegeneracyReport(False, PropertyA("holds", margin, note="no degenerate samples off the curves"),
                                wedge, samples, cell)
    for w, d in off:
        if _line_is_harmonic(q, *w):
            z = _forward([w], (s1, s2))[0]
            return DegeneracyReport(False, PropertyA("fails", d, z, "harmonic line missing from exceptional set"),
                                    None, samples, cell)
    margin = min(d for _, d in off)
    centers = _wedge_centers([w for w, _ in off], cell)
    if not exc.lines:
        wedge = WedgeSpec(m1, m2, tuple(centers), 0.25, (s1, s2), everything=True)
        return DegeneracyReport(False, PropertyA("holds", 1.0, note="no exceptional curves; separation vacuous"),
                                wedge, samples, cell)
    if margin > 2 * cell:
        wedge = WedgeSpec(m1, m2, tuple(centers), margin / 2, (s1, s2))
        return DegeneracyReport(False, PropertyA("holds", margin, note="operational check"), wedge, samples, cell)
    worst = min(off, key=lambda item: item[1])[0]
    z = _forward([worst], (s1, s2))[0]
    return DegeneracyReport(False, PropertyA("inconclusive", margin, z, "separation below grid resolution"),
                            None, samples, cell)


def _w_distance(exc: ExceptionalSet, w1: complex, w2: complex) -> float:
    """Sine distance from the direction (w1, w2) to the lines of the pullback."""
    norm = math.hypot(abs(w1), abs(w2)) or 1.0
    best = math.inf
    for e in exc.lines:
        if e.at_infinity:
            d = abs(w2) / norm
        else:
            lam = e.center
            d = abs(w1 - lam * w2) / (math.sqrt(1 + abs(lam) ** 2) * norm)
        best = min(best, d)
    return best


def _direction_key(z1, z2, q):
    """Rounded point of the Riemann sphere for the direction [z1 : z2]."""
    z1, z2 = complex(z1), complex(z2)
    n = abs(z1) ** 2 + abs(z2) ** 2
    w = 2 * z1 * z2.conjugate() / n
    h = (abs(z1) ** 2 - abs(z2) ** 2) / n
    return (round(w.real / q), round(w.imag / q), round(h / q))


def _forward(pts, sigma):
    s1, s2 = sigma
    return [(w1 ** s1, w2 ** s2) for w1, w2 in pts]


def _wedge_centers(points, cell) -> List[Optional[complex]]:
    centers: List[Optional[complex]] = []
    for w1, w2 in points:
        c = None if abs(w2) < 1e-12 * max(1.0, abs(w1)) else w1 / w2
        dup = False
        for o in centers:
            if (o is None and c is None) or (o is not None and c is not None and abs(o - c) < cell / 4):
                dup = True
                break
        if not dup:
            centers.append(c)
    return centers


# ------------------------------------------------------------ factorizations

@dataclass(frozen=True)
class Factorization:
    f: MixedPoly
    u: MixedPoly
    nu: int
    residual_zero: bool
    d: Optional[int] = None
    D: Optional[int] = None
    min_laplacian: float = 0.0
    crosscheck_error: Optional[float] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "F": format_poly(self.f),
            "U": format_poly(self.u),
            "nu": self.nu,
            "residual_zero": self.residual_zero,
            "d": self.d,
            "D": self.D,
            "min_laplacian_U": self.min_laplacian,
            "crosscheck_error": self.crosscheck_error,
        }


def circle_laplacian(u: MixedPoly, samples: int = 3600) -> np.ndarray:
    """Delta u(e^{i theta}) at equally spaced theta."""
    lap = laplacian1(u)
    theta = np.arange(samples) * (2 * math.pi / samples)
    return np.real(lap(np.exp(1j * theta), 0))


def _check_subharmonic(u: MixedPoly, samples: int) -> float:
    vals = circle_laplacian(u, samples)
    lo = float(vals.min())
    lead = max((mon for mon in u.terms if mon.a == mon.b), default=None, key=lambda m: m.a)
    if lead is None or u.coefficient(lead).re < 0:
        raise StructureError("U has no nonnegative radial leading term")
    if lo < -1e-10 * max(u.coeff_norm(), 1.0):
        raise StructureError(f"U is not subharmonic (min Laplacian {lo:.3e} on the unit circle)")
    return lo


def _bidegree(q: MixedPoly) -> Optional[Tuple[int, int]]:
    degs = {(mon.a + mon.b, mon.m + mon.n) for mon in q.terms}
    return degs.pop() if len(degs) == 1 else None


def factor_bidegree(q: MixedPoly, p_half: int, q_half: int) -> Factorization:
    """Q = U(z1^d z2^D) for Q bihomogeneous of degree 2p in z1 and 2q in z2."""
    p_half, q_half = int(p_half), int(q_half)
    if p_half <= 0 or q_half < 0:
        raise StructureError("bidegree halves must satisfy p >= 1, q >= 0")
    if q.is_zero() or _bidegree(q) != (2 * p_half, 2 * q_half):
        raise StructureError(f"not bihomogeneous of bidegree ({2 * p_half}, {2 * q_half})")
    hess = complex_hessian(q)
    if hess.h11.is_zero() and hess.h12.is_zero() and hess.h22.is_zero():
        raise StructureError("polynomial is pluriharmonic")
    alphas = []
    for mon in q.terms:
        alpha, beta = mon.a, mon.m
        # (2 alpha - 2p)/p = (2 beta - 2q)/q, cross-multiplied
        if q_half * (alpha - p_half) != p_half * (beta - q_half):
            raise StructureError("not of monomial-composite form (support condition fails)")
        alphas.append(alpha)
    d = reduce(math.gcd, alphas, 0)
    if d == 0:
        raise StructureError("not of monomial-composite form (all z1-exponents vanish)")
    if (q_half * d) % p_half:
        raise StructureError("not of monomial-composite form (D is not an integer)")
    D = q_half * d // p_half
    terms = {}
    for mon, c in q.terms.items():
        if mon.a % d or mon.b % d:
            raise StructureError("not of monomial-composite form (exponent not divisible by d)")
        s, t = mon.a // d, mon.b // d
        if mon.m != s * D or mon.n != t * D:
            raise StructureError("not of monomial-composite form (z2-exponents do not match)")
        terms[(s, t, 0, 0)] = c
    u = MixedPoly(terms)
    f = holomorphic_monomial(d, D)
    residual = compose(u, f) - q
    if not residual.is_zero():
        raise StructureError("coefficient transport left a nonzero residual")
    lo = _check_subharmonic(u, 360)
    lo = min(lo, float(circle_laplacian(u, 3600).min()))
    nu = u.degree() // 2
    return Factorization(f, u, nu, True, d, D, lo)


def _to_sympy(f: MixedPoly):
    z1, z2 = sympy.symbols("z1 z2")
    expr = 0
    for mon, c in f.terms.items():
        expr += (sympy.Rational(c.re.numerator, c.re.denominator)
                 + sympy.I * sympy.Rational(c.im.numerator, c.im.denominator)) * z1 ** mon.a * z2 ** mon.m
    return sympy.expand(expr), (z1, z2)


def _from_sympy(expr, syms) -> MixedPoly:
    z1, z2 = syms
    poly = sympy.Poly(sympy.expand(expr), z1, z2)
    terms = {}
    for (a, m), c in poly.terms():
        re, im = sympy.re(c), sympy.im(c)
        terms[(a, 0, m, 0)] = ComplexRational(Fraction(int(re.p), int(re.q)), Fraction(int(im.p), int(im.q)))
    return MixedPoly(terms)


def primitive_root(f: MixedPoly) -> Tuple[MixedPoly, int]:
    """g and the largest M with f = c * g^M for a constant c."""
    expr, syms = _to_sympy(f)
    _, factors = sympy.factor_list(expr, *syms, gaussian=True)
    if not factors:
        return f, 1
    M = reduce(math.gcd, [e for _, e in factors])
    if M <= 1:
        return f, 1
    g = sympy.Integer(1)
    for base, e in factors:
        g *= base ** (e // M)
    return _from_sympy(g, syms), M


def _solve_exact(rows: List[List[ComplexRational]], rhs: List[ComplexRational]) -> Optional[List[ComplexRational]]:
    """Gaussian elimination; None when the system is inconsistent."""
    n = len(rows[0]) if rows else 0
    mat = [list(r) + [b] for r, b in zip(rows, rhs)]
    pivots = []
    row = 0
    for col in range(n):
        piv = next((i for i in range(row, len(mat)) if mat[i][col]), None)
        if piv is None:
            continue
        mat[row], mat[piv] = mat[piv], mat[row]
        inv = ComplexRational(1) / mat[row][col]
        mat[row] = [v * inv for v in mat[row]]
        for i in range(len(mat)):
            if i != row and mat[i][col]:
                fac = mat[i][col]
                mat[i] = [a - fac * b for a, b in zip(mat[i], mat[row])]
        pivots.append(col)
        row += 1
    for i in range(row, len(mat)):
        if mat[i][n]:
            return None
    sol = [ComplexRational(0)] * n
    for i, col in enumerate(pivots):
        sol[col] = mat[i][n]
    return sol


def _recover_u(p: MixedPoly, g: MixedPoly) -> Optional[MixedPoly]:
    dg = g.degree()
    N = p.degree() // dg
    gc = g.conj()
    gp = [MixedPoly.constant(1)]
    gcp = [MixedPoly.constant(1)]
    for _ in range(N):
        gp.append(gp[-1] * g)
        gcp.append(gcp[-1] * gc)
    basis = [(s, t) for s in range(N + 1) for t in range(N + 1) if (s + t) * dg <= p.degree()]
    prods = [gp[s] * gcp[t] for s, t in basis]
    monos = sorted(set(p.terms).union(*[set(b.terms) for b in prods]))
    rows = [[b.coefficient(mon) for b in prods] for mon in monos]
    rhs = [p.coefficient(mon) for mon in monos]
    sol = _solve_exact(rows, rhs)
    if sol is None:
        return None
    return MixedPoly({(s, t, 0, 0): c for (s, t), c in zip(basis, sol) if c})


def _root_crosscheck(p: MixedPoly, f: MixedPoly, u: MixedPoly, points: int = 10, seed: int = 7) -> float:
    """Solve f(z, tau z) = c numerically and compare p there with U(c)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    deg = f.degree()
    for _ in range(points):
        c = complex(rng.normal(), rng.normal()) * 0.7
        tau = complex(rng.normal(), rng.normal())
        coeffs = np.zeros(deg + 1, dtype=complex)
        for mon, v in f.terms.items():
            coeffs[deg - (mon.a + mon.m)] += complex(v) * tau ** mon.m
        coeffs[deg] -= c
        roots = np.roots(np.trim_zeros(coeffs, "f"))
        target = complex(u(np.array([c]), 0)[0]).real
        for z in roots:
            val = complex(p(np.array([z]), np.array([tau * z]))[0]).real
            worst = max(worst, abs(val - target) / max(1.0, abs(target)))
    return worst


def factor_levelsets(p: MixedPoly, f_hint: Optional[MixedPoly] = None) -> Factorization:
    """P = U(F) with F the primitive holomorphic polynomial whose level curves foliate P."""
    if not check_property_B(p):
        raise StructureError("precondition: Levi determinant is not identically zero")
    hess = complex_hessian(p)
    if hess.h11.is_zero() and hess.h12.is_zero() and hess.h22.is_zero():
        raise StructureError("precondition: polynomial is pluriharmonic")
    bideg = _bidegree(p)
    if bideg is not None and bideg[0] % 2 == 0 and bideg[1] % 2 == 0 and bideg[0] > 0:
        try:
            return factor_bidegree(p, bideg[0] // 2, bideg[1] // 2)
        except StructureError:
            if f_hint is None:
                raise
    if f_hint is None:
        raise StructureError("F required: no hint given and polynomial is not bihomogeneous")
    if not f_hint.is_holomorphic() or f_hint.degree() == 0:
        raise StructureError("hint must be a nonconstant holomorphic polynomial")
    v1 = wirtinger(f_hint, "z2")
    v2 = -wirtinger(f_hint, "z1")
    if not hess.form(v1, v2).is_zero():
        raise StructureError("hint fails the harmonicity identity along its level curves")
    g, M = primitive_root(f_hint)
    u = _recover_u(p, g)
    if u is None:
        raise StructureError("linear system inconsistent: hint is not the foliating polynomial")
    residual = compose(u, g) - p
    if not residual.is_zero():
        raise StructureError("recovered U leaves a nonzero residual")
    lo = _check_subharmonic(u, 3600)
    err = _root_crosscheck(p, g, u)
    notes = (f"hint reduced from power {M}",) if M > 1 else ()
    return Factorization(g, u, u.degree() // 2, True, None, None, lo, err, notes)

"""Bump functions H >= 0 with P - delta*H plurisubharmonic.

Five constructions: cone bumps near a harmonic line, wedge surrogates over the
remaining degenerate directions, periodic profiles for level-set bumps |F|^(2nu) h(arg F),
cut-off patching of local pieces with a top-up term, and averaging/descent for
weighted-homogeneous inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .certify import (
    FULL_SPHERE,
    Certificate,
    Region,
    certify_psd,
    certify_strict_off_lines,
    grid_bounds,
    levi_arrays,
    max_delta,
    sphere_grid,
)
from .exceptional import ExceptionalSet, LineEnclosure
from .levi import complex_hessian, fd_levi, max_eigenvalue_array, min_eigenvalue_array
from .polyring import (
    ComplexRational,
    MixedPoly,
    format_poly,
    laplacian1,
    restrict_line,
    shear,
    swap,
    wirtinger,
)
from .structure import WedgeSpec, preimage


class BumpError(ValueError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


# ------------------------------------------------------------ profiles

def _psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), -1.0, 2.0)
    a = _psi(s)
    b = _psi(1.0 - s)
    return a / (a + b)


@dataclass(frozen=True)
class SmoothProfile:
    kind: str  # radial-cutoff | fourier
    inner: float = 0.0
    outer: float = 1.0
    cos: Tuple[float, ...] = ()
    sin: Tuple[float, ...] = ()

    @classmethod
    def cutoff(cls, inner: float, outer: float) -> "SmoothProfile":
        if not 0 <= inner < outer:
            raise ValueError("cutoff needs 0 <= inner < outer")
        return cls("radial-cutoff", inner, outer)

    @classmethod
    def constant(cls, value: float) -> "SmoothProfile":
        return cls("fourier", cos=(float(value),), sin=(0.0,))

    @property
    def coefficients(self) -> Tuple[float, ...]:
        return tuple(self.cos) + tuple(self.sin[1:])

    @property
    def degree(self) -> int:
        return len(self.cos) - 1

    def value(self, x):
        """Radial cut-off: 1 on [0, inner], 0 on [outer, inf)."""
        if self.kind != "radial-cutoff":
            raise ValueError("value() is for radial cut-offs")
        return 1.0 - smoothstep((np.asarray(x, dtype=float) - self.inner) / (self.outer - self.inner))

    def evaluate(self, theta):
        """(h, h', h'') of the trigonometric polynomial."""
        if self.kind != "fourier":
            raise ValueError("evaluate() is for Fourier profiles")
        theta = np.asarray(theta, dtype=float)
        h = np.zeros_like(theta)
        d1 = np.zeros_like(theta)
        d2 = np.zeros_like(theta)
        for n, (a, b) in enumerate(zip(self.cos, self.sin)):
            c, s = np.cos(n * theta), np.sin(n * theta)
            h += a * c + b * s
            d1 += n * (-a * s + b * c)
            d2 += -n * n * (a * c + b * s)
        return h, d1, d2

    def __call__(self, x):
        return self.value(x) if self.kind == "radial-cutoff" else self.evaluate(x)[0]

    def to_dict(self) -> dict:
        if self.kind == "radial-cutoff":
            return {"kind": self.kind, "inner": self.inner, "outer": self.outer}
        return {"kind": self.kind, "cos": list(self.cos), "sin": list(self.sin)}


# ------------------------------------------------------------ bump objects

def base_form(z1, z2, k: int):
    """|z1|^(2k) + |z2|^(2k)."""
    return np.abs(z1) ** (2 * k) + np.abs(z2) ** (2 * k)


def _line_s(z1, z2, zeta: complex, at_infinity: bool):
    """Squared sine distance from [z1 : z2] to the line."""
    n2 = np.abs(z1) ** 2 + np.abs(z2) ** 2
    n2 = np.where(n2 == 0, 1.0, n2)
    if at_infinity:
        return np.abs(z2) ** 2 / n2
    return np.abs(z1 - zeta * z2) ** 2 / ((1 + abs(zeta) ** 2) * n2)


def _cone_rho2(z1, z2, zeta: complex, at_infinity: bool):
    with np.errstate(divide="ignore", invalid="ignore"):
        if at_infinity:
            r = np.abs(z2) ** 2 / np.abs(z1) ** 2
            return np.where(np.abs(z1) == 0, np.inf, r)
        r = np.abs(z1 - zeta * z2) ** 2 / np.abs(z2) ** 2
        return np.where(np.abs(z2) == 0, np.inf, r)


class BumpFunction:
    """Common interface: vectorized values, Levi arrays, homogeneity degree, serialization."""

    kind = "bump"
    degree = 0
    delta0 = 0.0

    def __call__(self, z1, z2) -> np.ndarray:
        raise NotImplementedError

    def levi_arrays(self, z1, z2):
        return fd_levi(self, z1, z2)

    def with_delta0(self, delta0: float) -> "BumpFunction":
        return replace(self, delta0=float(delta0))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "degree": self.degree, "delta0": self.delta0}


@dataclass(frozen=True)
class ConeSpec:
    zeta: complex
    aperture: float
    at_infinity: bool = False

    def contains(self, z1, z2):
        return _cone_rho2(z1, z2, self.zeta, self.at_infinity) < self.aperture ** 2

    def to_dict(self) -> dict:
        return {"zeta": None if self.at_infinity else [self.zeta.real, self.zeta.imag],
                "at_infinity": self.at_infinity, "aperture": self.aperture}


@dataclass(frozen=True)
class ConeBump(BumpFunction):
    """(c1 / 2k^2) |z1 - zeta z2|^(2k), or |z2|^(2k) for the line z2 = 0."""

    spec: ConeSpec
    c1: float
    k: int
    poly: MixedPoly = field(repr=False, compare=False, default=None)
    delta0: float = 0.0
    kind = "cone"

    @property
    def degree(self) -> int:
        return 2 * self.k

    @property
    def coefficient(self) -> float:
        return self.c1 / (2 * self.k ** 2)

    def __call__(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        lin = z2 if self.spec.at_infinity else z1 - self.spec.zeta * z2
        return self.coefficient * np.abs(lin) ** (2 * self.k)

    def levi_arrays(self, z1, z2):
        # H = c |l|^(2k) with l linear: Levi = c k^2 |l|^(2k-2) grad(l) grad(l)^*
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        if self.spec.at_infinity:
            lin, g = z2, (0.0, 1.0)
        else:
            lin, g = z1 - self.spec.zeta * z2, (1.0, -self.spec.zeta)
        w = self.coefficient * self.k ** 2 * np.abs(lin) ** (2 * self.k - 2)
        return (w * abs(g[0]) ** 2, w * abs(g[1]) ** 2, w * g[0] * np.conj(g[1]))

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(cone=self.spec.to_dict(), c1=self.c1, k=self.k, coefficient=self.coefficient)
        return out


@dataclass(frozen=True)
class WedgeBump(BumpFunction):
    """amplitude * (|z1|^(2k) + |z2|^(2k)) * cutoff(distance to the wedge centers)."""

    wedge: WedgeSpec
    amplitude: float
    k: int
    delta0: float = 0.0
    kind = "wedge"

    @property
    def degree(self) -> int:
        return 2 * self.k

    def cutoff(self, z1, z2):
        if self.wedge.everything:
            return np.ones(np.broadcast(z1, z2).shape)
        hw = self.wedge.halfwidth
        d = self.wedge.distance(z1, z2)
        return SmoothProfile.cutoff((hw / 2) ** 2, hw ** 2).value(d ** 2)

    def __call__(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        return self.amplitude * base_form(z1, z2, self.k) * self.cutoff(z1, z2)

    def levi_arrays(self, z1, z2):
        if self.wedge.everything:
            z1 = np.asarray(z1, dtype=complex)
            z2 = np.asarray(z2, dtype=complex)
            c = self.amplitude * self.k ** 2
            return (c * np.abs(z1) ** (2 * self.k - 2), c * np.abs(z2) ** (2 * self.k - 2),
                    np.zeros(np.broadcast(z1, z2).shape, dtype=complex))
        return fd_levi(self, z1, z2)

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(wedge=self.wedge.to_dict(), amplitude=self.amplitude, k=self.k)
        return out


@dataclass(frozen=True)
class LevelsetBump(BumpFunction):
    """|F|^(2 nu) h(arg F), zero where F = 0."""

    f: MixedPoly
    nu: int
    profile: SmoothProfile
    delta0: float = 0.0
    kind = "levelset"

    @property
    def degree(self) -> int:
        d = self.f.homogeneous_degree()
        return 2 * self.nu * (d or 0)

    def __call__(self, z1, z2):
        F = np.asarray(self.f(np.asarray(z1, dtype=complex), np.asarray(z2, dtype=complex)), dtype=complex)
        h = self.profile.evaluate(np.angle(F))[0]
        return np.where(F == 0, 0.0, np.abs(F) ** (2 * self.nu) * h)

    def levi_arrays(self, z1, z2):
        # Levi(U o F) = (Delta U)(F)/4 * dF dF^*, Delta(r^(2nu) h) = r^(2nu-2) ((2nu)^2 h + h'')
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        F = np.asarray(self.f(z1, z2), dtype=complex)
        d1 = np.asarray(wirtinger(self.f, "z1")(z1, z2), dtype=complex)
        d2 = np.asarray(wirtinger(self.f, "z2")(z1, z2), dtype=complex)
        h, _, h2 = self.profile.evaluate(np.angle(F))
        r = np.abs(F)
        lap = r ** (2 * self.nu - 2) * ((2 * self.nu) ** 2 * h + h2)
        if self.nu > 1:
            lap = np.where(F == 0, 0.0, lap)
        w = lap / 4
        return w * np.abs(d1) ** 2, w * np.abs(d2) ** 2, w * d1 * np.conj(d2)

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(F=format_poly(self.f), nu=self.nu, profile=self.profile.to_dict())
        return out


@dataclass(frozen=True)
class CutoffPart:
    bump: ConeBump
    sigma: float

    @property
    def profile(self) -> SmoothProfile:
        return SmoothProfile.cutoff((self.sigma / 4) ** 2, self.sigma ** 2)

    def weight(self, z1, z2):
        spec = self.bump.spec
        return self.profile.value(_cone_rho2(z1, z2, spec.zeta, spec.at_infinity))


@dataclass(frozen=True)
class PatchedBump(BumpFunction):
    """H0 + sum_j Psi_j H_j + alpha |z|^(2k) prod_j s_j^k.

    The top-up vanishes to order 2k on each line, like the cone bumps, so its
    Levi form is of the same order as the strict bound on P near the lines.
    """

    parts: Tuple[CutoffPart, ...]
    base: Optional[WedgeBump]
    k: int
    alpha: float = 0.0
    lines: Tuple[Tuple[complex, bool, float], ...] = ()
    delta0: float = 0.0
    kind = "patched"

    @property
    def degree(self) -> int:
        return 2 * self.k

    def topup(self, z1, z2):
        """|z|^(2k) prod_j s_j^k, s_j the squared sine distance to line j."""
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        out = (np.abs(z1) ** 2 + np.abs(z2) ** 2) ** self.k
        for zeta, at_inf, _ in self.lines:
            out = out * _line_s(z1, z2, zeta, at_inf) ** self.k
        return out

    def untopped(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        total = np.zeros(np.broadcast(z1, z2).shape)
        if self.base is not None:
            total = total + self.base(z1, z2)
        for part in self.parts:
            total = total + part.weight(z1, z2) * part.bump(z1, z2)
        return total

    def __call__(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        total = self.untopped(z1, z2)
        if self.alpha:
            total = total + self.alpha * self.topup(z1, z2)
        return total

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(
            k=self.k,
            parts=[dict(p.bump.to_dict(), sigma=p.sigma, cutoff=p.profile.to_dict()) for p in self.parts],
            base=None if self.base is None else self.base.to_dict(),
            topup={"alpha": self.alpha, "form": "|z|^2k prod_j sin^2k(angle to line j)"},
        )
        return out


@dataclass(frozen=True)
class DescendedBump(BumpFunction):
    """G(w) = H_sym(principal roots of w), H_sym the average of H over the rotations R^{lm}."""

    inner: BumpFunction
    sigma: Tuple[int, int]
    delta0: float = 0.0
    kind = "descended"

    @property
    def degree(self) -> int:
        return self.inner.degree

    def symmetric(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        s1, s2 = self.sigma
        total = np.zeros(np.broadcast(z1, z2).shape)
        for l in range(s1):
            r1 = np.exp(2j * math.pi * l / s1)
            for m in range(s2):
                r2 = np.exp(2j * math.pi * m / s2)
                total = total + self.inner(r1 * z1, r2 * z2)
        return total / (s1 * s2)

    def __call__(self, w1, w2):
        z1, z2 = preimage(np.asarray(w1, dtype=complex), np.asarray(w2, dtype=complex), self.sigma)
        return self.symmetric(z1, z2)

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(sigma=list(self.sigma), inner=self.inner.to_dict(),
                   weight="weighted-homogeneous of weight 1")
        return out


@dataclass(frozen=True)
class SymmetrizedView(BumpFunction):
    """H_sym as a function on the pullback coordinates, for certification against Q."""

    parent: DescendedBump
    kind = "symmetrized"

    @property
    def degree(self) -> int:
        return self.parent.degree

    def __call__(self, z1, z2):
        return self.parent.symmetric(z1, z2)


# ------------------------------------------------------------ cone bump

def _sheared(p: MixedPoly, line: LineEnclosure) -> Tuple[MixedPoly, complex, bool]:
    """Coordinates with the line at {w1 = 0}."""
    if line.at_infinity:
        return swap(p), 0j, True
    if line.exact is not None:
        zeta = line.exact
    else:
        zeta = ComplexRational(Fraction(line.center.real), Fraction(line.center.imag))
    return shear(p, zeta), complex(zeta), False


def cone_bump(p: MixedPoly, line: LineEnclosure, eps: float = 0.5, grid: int = 32,
              retries: int = 4) -> Tuple[ConeBump, float, float]:
    """Cone bump around a harmonic line on which p vanishes.

    c1 is 0.9 times the least ratio mu(F)/r^(2(k-1)) over r in [eps*1e-3, eps] and a
    torus grid, where F = D^-1 h D^-1, D = diag(1, r), h the Levi matrix at
    (r e^{i a}, e^{i b}) in sheared coordinates.
    """
    deg = p.homogeneous_degree()
    if deg is None or deg % 2:
        raise BumpError("cone_bump needs a polynomial homogeneous of even degree")
    k = deg // 2
    q, zeta, at_inf = _sheared(p, line)
    on_line = restrict_line(q, 0)
    # q(0, w) must vanish identically
    resid = sum(math.hypot(float(c.re), float(c.im)) for c in on_line.values())
    if resid > 1e-9 * max(q.coeff_norm(), 1.0):
        raise BumpError("polynomial does not vanish on the line")
    field_ = complex_hessian(q)
    th = np.arange(grid) * (2 * math.pi / grid)
    A, B = np.meshgrid(th, th, indexing="ij")
    for _ in range(retries):
        rs = np.logspace(math.log10(eps * 1e-3), math.log10(eps), 31)
        ratios = []
        for r in rs:
            w1 = r * np.exp(1j * A)
            w2 = np.exp(1j * B)
            h11, h22, h12 = field_.arrays(w1, w2)
            mu = min_eigenvalue_array(h11, h22 / r ** 2, h12 / r)
            val = mu / r ** (2 * (k - 1))
            i = int(np.argmin(val))
            ratios.append(float(val.ravel()[i]))
            if ratios[-1] <= 0:
                wz = (complex(w1.ravel()[i]), complex(w2.ravel()[i]))
                raise BumpError("not strictly plurisubharmonic in the punctured cone", wz)
        last = ratios[:11]  # r in [eps*1e-3, eps*1e-2]
        if max(last) <= 1.1 * min(last):
            c1 = 0.9 * min(ratios)
            spec = ConeSpec(zeta, eps, at_inf)
            return ConeBump(spec, c1, k), c1, eps / 2
        eps /= 2
    raise BumpError("ratio did not stabilize as r -> 0; cone bump inconclusive")


# ------------------------------------------------------------ wedge bump

def wedge_bump(p: MixedPoly, wedge: WedgeSpec, k: int, exc: Optional[ExceptionalSet] = None,
               grid: int = 32) -> WedgeBump:
    """Largest certified amplitude a for a * B_k * cutoff with P - a*... psh (delta = 1)."""
    if exc is not None:
        for e in exc.lines:
            if wedge.everything:
                raise BumpError("wedge covers the sphere but exceptional lines exist")
            z = (1.0 + 0j, 0j) if e.at_infinity else (e.center, 1.0 + 0j)
            if wedge.distance(np.array([z[0]]), np.array([z[1]]))[0] < wedge.halfwidth:
                raise BumpError("wedge overlaps an exceptional line")
    unit = WedgeBump(wedge, 1.0, k)
    lo, hi = max_delta(p, unit, FULL_SPHERE, grid=grid, cap=64.0)
    if lo <= 0:
        cert = certify_psd((p, unit, hi), FULL_SPHERE, 0.0, grid)
        raise BumpError("surrogate insufficient: no positive amplitude certified", cert.witness)
    lo = _confirm(p, unit, lo, grid)
    return WedgeBump(wedge, lo, k, delta0=1.0)


def _confirm(p: MixedPoly, h: BumpFunction, delta: float, grid: int, halvings: int = 12) -> float:
    """Halve delta until certified at twice the search resolution.

    Narrow cut-off transitions can fall between search nodes; psd at 0 and at
    delta implies psd on [0, delta], so halving is safe.
    """
    for _ in range(halvings):
        if certify_psd((p, h, delta), FULL_SPHERE, 0.0, 2 * grid, budget=2 * grid).certified:
            return delta
        delta /= 2
    raise BumpError("certificate does not survive grid refinement")


# ------------------------------------------------------------ profile

def _trig_rows(theta: np.ndarray, j: int):
    n = np.arange(j + 1)
    C = np.cos(np.outer(theta, n))
    S = np.sin(np.outer(theta, n[1:]))
    return C, S


def subharmonic_profile(u: MixedPoly, j: Optional[int] = None, samples: int = 720,
                        h_min: float = 1e-3) -> Tuple[SmoothProfile, float]:
    """Trigonometric h (degree <= j) maximizing C with h_min <= h <= 1, j^2 h + h'' + C <= q.

    q(theta) = Delta u(e^{i theta}).  The returned C is the certified value on a 10x
    finer grid after subtracting a second-derivative allowance.
    """
    if j is None:
        j = u.homogeneous_degree()
        if j is None:
            raise BumpError("profile needs a homogeneous u or an explicit degree")
    lap = laplacian1(u)
    if lap.is_zero():
        raise BumpError("u is harmonic; no profile exists")
    theta = np.arange(samples) * (2 * math.pi / samples)
    q = np.real(lap(np.exp(1j * theta), 0))
    C_, S_ = _trig_rows(theta, j)
    n = np.arange(j + 1)
    m = n[1:]
    nvar = (j + 1) + j + 1
    # rows: j^2 h + h'' + C <= q ; h <= 1 ; -h <= -h_min
    lin_c = np.hstack([C_ * (j * j - n ** 2), S_ * (j * j - m ** 2), np.ones((samples, 1))])
    box = np.hstack([C_, S_, np.zeros((samples, 1))])
    A_ub = np.vstack([lin_c, box, -box])
    b_ub = np.concatenate([q, np.ones(samples), -h_min * np.ones(samples)])
    cost = np.zeros(nvar)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * nvar, method="highs")
    if res.status != 0:
        C0 = float(q.min() - j * j * h_min)
        if C0 <= 0:
            raise BumpError("profile optimization infeasible and h = h_min gives no positive C")
        return SmoothProfile.constant(h_min), C0
    x = res.x
    prof = SmoothProfile("fourier", cos=tuple(float(v) for v in x[:j + 1]),
                         sin=(0.0,) + tuple(float(v) for v in x[j + 1:2 * j + 1]))
    return prof, certify_profile(u, prof, j, samples * 10)


def profile_margin(u: MixedPoly, prof: SmoothProfile, j: int, theta: np.ndarray) -> np.ndarray:
    """q - j^2 h - h'' at the given angles."""
    q = np.real(laplacian1(u)(np.exp(1j * np.asarray(theta)), 0))
    h, _, h2 = prof.evaluate(theta)
    return q - j * j * h - h2


def certify_profile(u: MixedPoly, prof: SmoothProfile, j: int, samples: int = 7200) -> float:
    """Lower bound for min (q - j^2 h - h'') over the circle."""
    theta = np.arange(samples) * (2 * math.pi / samples)
    g = profile_margin(u, prof, j, theta)
    # second-derivative bound of g from its Fourier coefficients
    lap = laplacian1(u)
    M2 = sum(math.hypot(float(c.re), float(c.im)) * (mon.a - mon.b) ** 2 for mon, c in lap.terms.items())
    for n, (a, b) in enumerate(zip(prof.cos, prof.sin)):
        M2 += math.hypot(a, b) * abs(j * j - n * n) * n * n
    step = 2 * math.pi / samples
    return float(g.min() - step * step / 8 * M2)


# ------------------------------------------------------------ level-set bump

def levelset_bump(f: MixedPoly, nu: int, profile: SmoothProfile) -> LevelsetBump:
    if not f.is_holomorphic():
        raise BumpError("level-set bump needs a holomorphic F")
    if profile.kind != "fourier":
        raise BumpError("level-set bump needs a Fourier profile")
    return LevelsetBump(f, int(nu), profile, delta0=1.0)


# ------------------------------------------------------------ patching

def _chordal(a: Tuple[complex, bool], b: Tuple[complex, bool]) -> float:
    (za, ia), (zb, ib) = a, b
    if ia and ib:
        return 0.0
    if ia:
        return 1 / math.sqrt(1 + abs(zb) ** 2)
    if ib:
        return 1 / math.sqrt(1 + abs(za) ** 2)
    return abs(za - zb) / math.sqrt((1 + abs(za) ** 2) * (1 + abs(zb) ** 2))


def _cone_radius(zeta: complex, at_inf: bool, sigma: float) -> float:
    """Chordal radius covering the cone of aperture sigma."""
    return sigma if at_inf else sigma / math.sqrt(1 + abs(zeta) ** 2)


def _disjoint(parts: Sequence[CutoffPart], wedge: Optional[WedgeSpec]) -> bool:
    keys = [(p.bump.spec.zeta, p.bump.spec.at_infinity) for p in parts]
    for i in range(len(parts)):
        ri = _cone_radius(*keys[i], 2 * parts[i].sigma)
        for j in range(i + 1, len(parts)):
            rj = _cone_radius(*keys[j], 2 * parts[j].sigma)
            if _chordal(keys[i], keys[j]) <= ri + rj:
                return False
        if wedge is not None and not wedge.everything:
            for c in wedge.centers:
                ck = (0j, True) if c is None else (c, False)
                if _chordal(keys[i], ck) <= ri + wedge.halfwidth:
                    return False
    return True


@dataclass(frozen=True)
class PatchResult:
    bump: PatchedBump
    delta_bracket: Tuple[float, float]
    certificate: Certificate
    strict: Certificate
    shrinks: int


def patch_bumps(p: MixedPoly, cone_parts: Sequence[Tuple[ConeBump, float]], wedge_part: Optional[WedgeBump],
                exc: ExceptionalSet, grid: int = 32, max_shrink: int = 20,
                max_halvings: int = 30) -> PatchResult:
    """Glue cone bumps and a wedge part with cut-offs, then add a top-up positive off the lines."""
    deg = p.homogeneous_degree()
    if deg is None or deg % 2:
        raise BumpError("patching needs a polynomial homogeneous of even degree")
    k = deg // 2
    parts = [CutoffPart(b, s) for b, s in cone_parts]
    wedge = wedge_part.wedge if wedge_part is not None else None
    shrinks = 0
    while not _disjoint(parts, wedge):
        if shrinks >= max_shrink:
            raise BumpError("disjointness infeasible: exceptional lines too close for the apertures")
        parts = [CutoffPart(pt.bump, pt.sigma / 2) for pt in parts]
        shrinks += 1
    lines = tuple((pt.bump.spec.zeta, pt.bump.spec.at_infinity, pt.sigma) for pt in parts)
    tilde = PatchedBump(tuple(parts), wedge_part, k, 0.0, lines)
    lo, hi = max_delta(p, tilde, FULL_SPHERE, grid=grid, cap=0.5)
    if lo <= 0:
        cert = certify_psd((p, tilde, hi), FULL_SPHERE, 0.0, grid)
        raise BumpError("patched bump is not certified for any delta > 0", cert.witness)
    delta0 = lo
    # the amplitude is searched and checked at twice the resolution used for delta,
    # so the top-up cannot hide a dip between the coarse nodes
    fine = 2 * grid
    alpha = _topup_amplitude(p, tilde, delta0, fine)
    cert = None
    for _ in range(max_halvings):
        cand = replace(tilde, alpha=alpha)
        cert = certify_psd((p, cand, delta0), FULL_SPHERE, 0.0, fine, budget=fine)
        if cert.certified:
            break
        alpha /= 2
    else:
        delta0 = _confirm(p, cand, delta0, grid)
        cert = certify_psd((p, cand, delta0), FULL_SPHERE, 0.0, fine, budget=fine)
    bump = replace(cand, delta0=delta0)
    strict = certify_strict_off_lines((p, bump, delta0), exc, k, grid)
    return PatchResult(bump, (delta0, hi), cert, strict, shrinks)


@dataclass(frozen=True)
class _TopupTerm(BumpFunction):
    owner: PatchedBump

    def __call__(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        return self.owner.topup(z1, z2)


def _topup_amplitude(p: MixedPoly, tilde: PatchedBump, delta0: float, grid: int,
                     tol: float = 1e-4, steps: int = 40) -> float:
    """Largest alpha (up to a factor 2^(1/8)) keeping the grid bound of
    Levi(P - delta0 (tilde + alpha * topup)) above -tol * scale.

    The form is affine in alpha, so the Levi arrays are computed once.
    """
    z1, z2 = sphere_grid(grid)
    P = levi_arrays(p, z1, z2)
    H = levi_arrays(tilde, z1, z2)
    term = _TopupTerm(tilde)
    T = levi_arrays(term, z1, z2)
    A = [P[i] - delta0 * H[i] for i in range(3)]
    S = float(np.max(np.abs(max_eigenvalue_array(*P)))) or 1.0

    def ok(alpha):
        return grid_bounds(*[A[i] - delta0 * alpha * T[i] for i in range(3)])[1] >= -tol * S

    ref = float(np.max(np.abs(np.asarray(p(z1, z2))))) or 1.0
    alpha = ref / (float(np.max(term(z1, z2))) or 1.0)
    for _ in range(steps):
        if ok(alpha):
            break
        alpha /= 2
    else:
        return alpha
    lo, hi = alpha, 2 * alpha
    for _ in range(3):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ------------------------------------------------------------ weighted descent

def symmetrize_and_descend(h_for_q: BumpFunction, sigma: Tuple[int, int],
                           check_points: int = 200, seed: int = 0) -> BumpFunction:
    s1, s2 = int(sigma[0]), int(sigma[1])
    if (s1, s2) == (1, 1):
        return h_for_q
    rng = np.random.default_rng(seed)
    z1 = rng.normal(size=check_points) + 1j * rng.normal(size=check_points)
    z2 = rng.normal(size=check_points) + 1j * rng.normal(size=check_points)
    vals = h_for_q(z1, z2)
    if np.any(vals < -1e-12 * (1 + np.abs(vals).max())):
        raise BumpError("bump is negative somewhere; cannot symmetrize")
    return DescendedBump(h_for_q, (s1, s2), delta0=h_for_q.delta0)

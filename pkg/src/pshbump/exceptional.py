"""Harmonic lines and weighted harmonic curves of plurisubharmonic polynomials.

Lines z1 = zeta*z2 are found by interval subdivision of the zeta-plane against the
family phi_mn; the line z2 = 0 is decided exactly in the swapped chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .levi import PhiFamily, complex_hessian, phi_coefficients
from .polyring import (
    ComplexRational,
    MixedPoly,
    evaluate_exact,
    power_map,
    restrict_line,
    shear2,
    swap,
)


class InvalidInput(ValueError):
    pass


class PshViolation(ValueError):
    def __init__(self, message: str, witness: complex):
        super().__init__(f"{message} (witness zeta = {witness})")
        self.witness = witness


class Inconclusive(RuntimeError):
    pass


@dataclass(frozen=True)
class LineEnclosure:
    center: complex
    radius: float
    at_infinity: bool = False
    exact: Optional[ComplexRational] = None
    box: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    @property
    def width(self) -> float:
        if self.at_infinity:
            return 0.0
        return max(self.box[1] - self.box[0], self.box[3] - self.box[2])

    def contains(self, zeta: complex) -> bool:
        x0, x1, y0, y1 = self.box
        return x0 <= zeta.real <= x1 and y0 <= zeta.imag <= y1


@dataclass(frozen=True)
class ExceptionalCurve:
    """The curve z1^e1 = zeta * z2^e2 with (e1, e2) = (sigma2, sigma1)."""

    zeta: complex
    at_infinity: bool
    exponents: Tuple[int, int]
    exact: Optional[ComplexRational] = None
    members: Tuple[LineEnclosure, ...] = ()

    def describe(self) -> str:
        e1, e2 = self.exponents
        if self.at_infinity:
            return "z2 = 0"
        if self.zeta == 0:
            return "z1 = 0"
        lhs = "z1" if e1 == 1 else f"z1^{e1}"
        rhs = "z2" if e2 == 1 else f"z2^{e2}"
        val = str(self.exact) if self.exact is not None else f"{self.zeta:.12g}"
        return f"{lhs} = ({val})*{rhs}"


@dataclass(frozen=True)
class ExceptionalSet:
    lines: Tuple[LineEnclosure, ...]
    sigma: Tuple[int, int] = (1, 1)
    orbit_note: str = ""
    curves: Tuple[ExceptionalCurve, ...] = ()
    shear: ComplexRational = field(default_factory=lambda: ComplexRational(0))

    def __len__(self):
        return len(self.curves)

    def distance(self, z1, z2) -> np.ndarray:
        return curve_distance(self, z1, z2)


# ------------------------------------------------------------ interval kernel

def _taylor_shift(coef: np.ndarray, z0: np.ndarray) -> np.ndarray:
    """Coefficients of f(z0 + u) in (u, conj u), one set per entry of z0.

    coef[a, b] multiplies zeta^a conj(zeta)^b.  Horner-style shift along each axis.
    """
    d = np.broadcast_to(coef, (len(z0),) + coef.shape).copy()
    A, B = coef.shape
    zc = z0[:, None]
    for i in range(A - 1):
        for a in range(A - 2, i - 1, -1):
            d[:, a, :] += zc * d[:, a + 1, :]
    zb = np.conj(z0)[:, None]
    for i in range(B - 1):
        for b in range(B - 2, i - 1, -1):
            d[:, :, b] += zb * d[:, :, b + 1]
    return d


def _exact_shift(coeffs: Dict[Tuple[int, int], ComplexRational], z0: ComplexRational):
    """Exact version of _taylor_shift for one origin."""
    A = max(a for a, _ in coeffs) + 1
    B = max(b for _, b in coeffs) + 1
    zero = ComplexRational(0)
    d = [[coeffs.get((a, b), zero) for b in range(B)] for a in range(A)]
    zb = z0.conjugate()
    for i in range(A - 1):
        for a in range(A - 2, i - 1, -1):
            row, nxt = d[a], d[a + 1]
            for b in range(B):
                if nxt[b]:
                    row[b] = row[b] + z0 * nxt[b]
    for i in range(B - 1):
        for b in range(B - 2, i - 1, -1):
            for a in range(A):
                if d[a][b + 1]:
                    d[a][b] = d[a][b] + zb * d[a][b + 1]
    return {(a, b): d[a][b] for a in range(A) for b in range(B) if d[a][b]}


class _System:
    """The equations phi_mn = 0 (m <= n), expanded exactly about `origin`.

    A box is tested through the disk form of the Taylor expansion at its center:
    f(box) lies in the disk about f(center) of radius sum |d_ab| r^(a+b).
    """

    def __init__(self, equations, kk_index, origin: ComplexRational = ComplexRational(0), only=None):
        self.equations = equations
        self.kk_index = kk_index
        self.origin = origin
        self.active = list(range(len(equations))) if only is None else list(only)
        self.arrays: List[np.ndarray] = []
        for idx in self.active:
            local = _exact_shift(equations[idx], origin) if origin else equations[idx]
            A = max(a for a, _ in local) + 1
            B = max(b for _, b in local) + 1
            arr = np.zeros((A, B), dtype=complex)
            for (a, b), v in local.items():
                arr[a, b] = complex(v)
            self.arrays.append(arr)
        self.deg = max((sum(a.shape) - 2 for a in self.arrays), default=0)

    @classmethod
    def from_phi(cls, phi: PhiFamily) -> "_System":
        equations, kk_index = [], None
        for (m, n), entry in sorted(phi.entries.items()):
            if m > n or entry.is_zero():
                continue
            if (m, n) == (phi.k, phi.k):
                kk_index = len(equations)
            equations.append({(mon.a, mon.b): c for mon, c in entry.terms.items()})
        return cls(equations, kk_index)

    def recenter(self, ox: Fraction, oy: Fraction, full: bool = False) -> "_System":
        """Re-expand about (ox, oy); by default only phi_kk, whose zeros are the harmonic lines."""
        only = None if full or self.kk_index is None else [self.kk_index]
        return _System(self.equations, self.kk_index, ComplexRational(ox, oy), only)

    @property
    def origin_xy(self) -> Tuple[Fraction, Fraction]:
        return self.origin.re, self.origin.im

    def test(self, boxes: np.ndarray, chunk: int = 4096):
        """Mask of local boxes where every enclosure contains 0, plus phi_kk at centers."""
        keep = np.ones(len(boxes), dtype=bool)
        kk_center = np.zeros(len(boxes))
        for start in range(0, len(boxes), chunk):
            sl = slice(start, start + chunk)
            part = boxes[sl]
            c = 0.5 * (part[:, 0] + part[:, 1]) + 0.5j * (part[:, 2] + part[:, 3])
            r = 0.5 * np.hypot(part[:, 1] - part[:, 0], part[:, 3] - part[:, 2])
            for idx, arr in zip(self.active, self.arrays):
                A, B = arr.shape
                if not keep[sl].any():
                    break
                d = _taylor_shift(arr, c)
                e = np.add.outer(np.arange(A), np.arange(B))
                rp = r[:, None, None] ** e[None]
                absd = np.abs(d)
                rad = (absd * rp).sum(axis=(1, 2)) - absd[:, 0, 0]
                mag = (np.abs(arr)[None] * (np.abs(c)[:, None, None] + r[:, None, None]) ** e[None]).sum(axis=(1, 2))
                slack = rad * (1 + 1e-12) + 1e-13 * mag + 1e-300
                keep[sl] &= np.abs(d[:, 0, 0]) <= slack
                if idx == self.kk_index:
                    kk_center[sl] = d[:, 0, 0].real + 1e-13 * mag
        return keep, kk_center


def _split(boxes: np.ndarray) -> np.ndarray:
    mx = 0.5 * (boxes[:, 0] + boxes[:, 1])
    my = 0.5 * (boxes[:, 2] + boxes[:, 3])
    return np.concatenate([
        np.stack([boxes[:, 0], mx, boxes[:, 2], my], axis=1),
        np.stack([mx, boxes[:, 1], boxes[:, 2], my], axis=1),
        np.stack([boxes[:, 0], mx, my, boxes[:, 3]], axis=1),
        np.stack([mx, boxes[:, 1], my, boxes[:, 3]], axis=1),
    ])


def _subdivide(system: _System, boxes: np.ndarray, target: float, budget: List[int],
               check_kk: bool = False, scale: float = 1.0, max_live: int = 0):
    """Refine until every box is below `target`.

    With `max_live` set, stop early (after at least three halvings) once more than
    `max_live` boxes survive; the caller then re-expands about each cluster.
    Returns (finished boxes, unfinished boxes).
    """
    done = []
    level = 0
    while len(boxes):
        budget[0] -= len(boxes)
        if budget[0] < 0:
            raise Inconclusive("subdivision budget exhausted; zero set may not be isolated")
        keep, kk = system.test(boxes)
        if check_kk and kk is not None:
            cx = 0.5 * (boxes[:, 0] + boxes[:, 1])
            cy = 0.5 * (boxes[:, 2] + boxes[:, 3])
            bound = -1e-9 * scale * np.maximum(1.0, np.hypot(cx, cy)) ** system.deg
            bad = np.nonzero(kk < bound)[0]
            if len(bad):
                raise PshViolation("phi_kk is negative, input is not plurisubharmonic",
                                   complex(cx[bad[0]], cy[bad[0]]))
        boxes = boxes[keep]
        width = np.maximum(boxes[:, 1] - boxes[:, 0], boxes[:, 3] - boxes[:, 2])
        small = width <= target
        done.append(boxes[small])
        boxes = boxes[~small]
        level += 1
        if max_live and level >= 3 and len(boxes) > max_live:
            return np.concatenate(done), boxes
        if len(boxes):
            boxes = _split(boxes)
    return (np.concatenate(done) if done else np.zeros((0, 4))), np.zeros((0, 4))


def _cluster(boxes: np.ndarray) -> List[np.ndarray]:
    """Groups of touching boxes, in a deterministic order."""
    n = len(boxes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = sorted(range(n), key=lambda i: tuple(boxes[i]))
    for pos, i in enumerate(order):
        bi = boxes[i]
        for j in order[pos + 1:]:
            bj = boxes[j]
            if bj[0] > bi[1]:
                break
            if bj[2] <= bi[3] and bi[2] <= bj[3]:
                parent[find(i)] = find(j)
    groups: Dict[int, List[int]] = {}
    for i in order:
        groups.setdefault(find(i), []).append(i)
    out = [boxes[idx] for idx in groups.values()]
    return sorted(out, key=lambda g: (g[:, 0].min(), g[:, 2].min()))


def _widen(boxes: np.ndarray) -> np.ndarray:
    out = boxes.copy()
    out[:, 0] = np.nextafter(np.nextafter(out[:, 0], -np.inf), -np.inf)
    out[:, 2] = np.nextafter(np.nextafter(out[:, 2], -np.inf), -np.inf)
    out[:, 1] = np.nextafter(np.nextafter(out[:, 1], np.inf), np.inf)
    out[:, 3] = np.nextafter(np.nextafter(out[:, 3], np.inf), np.inf)
    return out


def _isolate(system: _System, box, tol: float, scale: float, max_boxes: int = 400000) -> List[tuple]:
    """Global boxes of width <= tol/32 covering the common zeros inside `box`."""
    target = tol / 32.0
    budget = [max_boxes]
    pending = [(system, np.array([box], dtype=float), True)]
    final = []
    while pending:
        sys_, boxes, first = pending.pop(0)
        w = float(np.max(np.maximum(boxes[:, 1] - boxes[:, 0], boxes[:, 3] - boxes[:, 2])))
        stage = max(target, w * 1e-4)
        done, live = _subdivide(sys_, boxes, stage, budget, check_kk=first, scale=scale,
                                max_live=256)
        ox, oy = sys_.origin_xy
        if stage <= target and not len(live):
            shift = np.array([float(ox), float(ox), float(oy), float(oy)])
            final.extend(map(tuple, _widen(done + shift)))
            continue
        for group in _cluster(np.concatenate([done, live])):
            cx = 0.5 * (group[:, 0].min() + group[:, 1].max())
            cy = 0.5 * (group[:, 2].min() + group[:, 3].max())
            nx, ny = ox + Fraction(cx), oy + Fraction(cy)
            delta = np.array([-cx, -cx, -cy, -cy])
            pending.append((system.recenter(nx, ny), _widen(group + delta), False))
    return sorted(final)


def _exact_witness(phi: PhiFamily, box, slack: float) -> Optional[ComplexRational]:
    cx = 0.5 * (box[0] + box[1])
    cy = 0.5 * (box[2] + box[3])
    seen = set()
    for den in (1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 25, 32, 64, 100, 1000):
        cand = (Fraction(round(cx * den), den), Fraction(round(cy * den), den))
        if cand in seen:
            continue
        seen.add(cand)
        if not (box[0] - slack <= cand[0] <= box[1] + slack and box[2] - slack <= cand[1] <= box[3] + slack):
            continue
        zeta = ComplexRational(*cand)
        if all(not evaluate_exact(e, (zeta, 0)) for e in phi.entries.values()):
            return zeta
    return None


def _verify(system: _System, box) -> bool:
    cx = 0.5 * (box[0] + box[1])
    cy = 0.5 * (box[2] + box[3])
    local = system.recenter(Fraction(cx), Fraction(cy), full=True)
    keep, _ = local.test(_widen(np.array([[box[0] - cx, box[1] - cx, box[2] - cy, box[3] - cy]])))
    return bool(keep[0])


def _enclosures(phi: PhiFamily, system: _System, box, tol: float, scale: float) -> List[LineEnclosure]:
    raw = _isolate(system, box, tol, scale)
    out = []
    for group in _cluster(np.array(raw).reshape(-1, 4)):
        cb = (float(group[:, 0].min()), float(group[:, 1].max()),
              float(group[:, 2].min()), float(group[:, 3].max()))
        if not _verify(system, cb):
            continue
        exact = _exact_witness(phi, cb, tol)
        if exact is not None:
            center = complex(exact)
        else:
            center = complex(0.5 * (cb[0] + cb[1]), 0.5 * (cb[2] + cb[3]))
        radius = max(math.hypot(x - center.real, y - center.imag)
                     for x in cb[:2] for y in cb[2:])
        out.append(LineEnclosure(center, radius, False, exact, cb))
    return out


# ------------------------------------------------------------ public API

def restriction_harmonic_at_zero(p: MixedPoly) -> bool:
    """Exact test: p(zeta w, w) at zeta = 0 has no mixed w^m conj(w)^n terms."""
    coeffs = restrict_line(p, 0)
    return all(m == 0 or n == 0 for (m, n) in coeffs)


def harmonic_at_infinity(p: MixedPoly) -> bool:
    """Exact harmonicity of p(z1, 0), tested in the swapped chart."""
    return restriction_harmonic_at_zero(swap(p))


_SHEARS = [ComplexRational(c) for c in (1, -1, 2, -2, Fraction(1, 2), 3)] + [
    ComplexRational(0, 1), ComplexRational(1, 1), ComplexRational(0, -1), ComplexRational(1, -1)]


def normalize_coordinates(p: MixedPoly) -> Tuple[ComplexRational, MixedPoly]:
    """Shear z2 -> z2 + c z1 until the restriction to {z2 = 0} is not harmonic."""
    deg = p.homogeneous_degree()
    if deg is None or deg % 2:
        raise InvalidInput("expected a polynomial homogeneous of even degree")
    k = deg // 2
    field_ = complex_hessian(p)
    if field_.h11.is_zero() and field_.h12.is_zero() and field_.h22.is_zero():
        raise InvalidInput("polynomial is pluriharmonic; no normalizing shear exists")
    if p.coefficient((k, k, 0, 0)).re > 0:
        return ComplexRational(0), p
    for c in _SHEARS:
        q = shear2(p, c)
        if q.coefficient((k, k, 0, 0)).re > 0:
            return c, q
    raise InvalidInput("no shear makes the restriction to z2 = 0 non-harmonic")


def _cauchy_radius(phi_kk: MixedPoly, k: int) -> float:
    lead = phi_kk.coefficient((k, k, 0, 0))
    rest = sum(math.hypot(float(c.re), float(c.im))
               for mon, c in phi_kk.terms.items() if mon != (k, k, 0, 0))
    return rest / float(lead.re) + 1.0


def _lines_in_chart(p: MixedPoly, tol: float) -> List[LineEnclosure]:
    """Finite lines of a polynomial whose |z1|^(2k) coefficient is positive."""
    phi = phi_coefficients(p)
    k = phi.k
    system = _System.from_phi(phi)
    if not system.arrays:
        raise InvalidInput("every line is harmonic; polynomial is degenerate")
    R = _cauchy_radius(phi.phi_kk, k)
    scale = phi.phi_kk.coeff_norm()
    return _enclosures(phi, system, (-R, R, -R, R), tol, scale)


def _local_lines(p: MixedPoly, centers: List[complex], radii: List[float], tol: float) -> List[LineEnclosure]:
    phi = phi_coefficients(p)
    system = _System.from_phi(phi)
    scale = phi.phi_kk.coeff_norm() if not phi.phi_kk.is_zero() else 1.0
    out: List[LineEnclosure] = []
    for c, r in zip(centers, radii):
        h = max(r, tol)
        box = (c.real - h, c.real + h, c.imag - h, c.imag + h)
        for enc in _enclosures(phi, system, box, tol, scale):
            if not any(o.box == enc.box for o in out):
                out.append(enc)
    return out


def harmonic_lines(p: MixedPoly, tol: float = 1e-8) -> ExceptionalSet:
    """All complex lines through 0 along which the homogeneous psh polynomial p is harmonic."""
    deg = p.homogeneous_degree()
    if deg is None or deg % 2 or not p.is_real():
        raise InvalidInput("expected a real polynomial homogeneous of even degree")
    c, q = normalize_coordinates(p)
    lines = []
    if c == 0:
        lines = _lines_in_chart(p, tol)
    else:
        # lines of q (w-coordinates) map back via zeta = eta / (1 + c*eta)
        cc = complex(c)
        centers, radii = [], []
        for enc in _lines_in_chart(q, tol):
            den = 1 + cc * enc.center
            if abs(den) < 1e-9:
                continue
            zeta = enc.center / den
            centers.append(zeta)
            radii.append(4 * (enc.radius / abs(den) ** 2) + 4 * tol)
        if harmonic_at_infinity(q):
            centers.append(1 / cc)
            radii.append(4 * tol)
        lines = _local_lines(p, centers, radii, tol)
    lines = sorted(lines, key=lambda e: (round(e.center.real, 12), round(e.center.imag, 12)))
    if harmonic_at_infinity(p):
        lines.append(LineEnclosure(complex(0), 0.0, True, None, (0.0, 0.0, 0.0, 0.0)))
    curves = tuple(ExceptionalCurve(e.center if not e.at_infinity else complex(0), e.at_infinity, (1, 1),
                                    e.exact, (e,)) for e in lines)
    return ExceptionalSet(tuple(lines), (1, 1), "homogeneous: each line is its own curve", curves, c)


def harmonic_curves(p: MixedPoly, m1: int, m2: int, tol: float = 1e-8) -> ExceptionalSet:
    """Curves z1^sigma2 = zeta z2^sigma1 along which a weighted-homogeneous p is harmonic."""
    m1, m2 = int(m1), int(m2)
    K = m1 * m2 // math.gcd(m1, m2)
    s1, s2 = K // m1, K // m2
    q = power_map(p, s1, s2)
    if q.homogeneous_degree() != K:
        raise InvalidInput(f"polynomial is not ({m1},{m2})-homogeneous of weight 1")
    last_error = None
    for attempt in range(2):
        base = harmonic_lines(q, tol / (10 ** attempt))
        try:
            curves = _group_orbits(base.lines, s1, s2)
        except Inconclusive as err:
            last_error = err
            continue
        note = (f"lines of p o Psi, Psi = (z1^{s1}, z2^{s2}), grouped into orbits of "
                f"{s1 * s2} lines z1 = lambda z2 sharing zeta = lambda^{s1 * s2}")
        return ExceptionalSet(base.lines, (s1, s2), note, tuple(curves), base.shear)
    raise Inconclusive(f"could not separate root-of-unity orbits: {last_error}")


def _group_orbits(lines: Sequence[LineEnclosure], s1: int, s2: int) -> List[ExceptionalCurve]:
    N = s1 * s2
    exps = (s2, s1)
    curves: List[ExceptionalCurve] = []
    finite = []
    for e in lines:
        if e.at_infinity:
            curves.append(ExceptionalCurve(complex(0), True, exps, None, (e,)))
        elif (e.exact is not None and not e.exact) or (e.exact is None and abs(e.center) <= e.radius):
            curves.append(ExceptionalCurve(complex(0), False, exps, ComplexRational(0), (e,)))
        else:
            finite.append(e)
    if N == 1:
        curves.extend(ExceptionalCurve(e.center, False, exps, e.exact, (e,)) for e in finite)
        return _sort_curves(curves)
    zetas = [e.center ** N for e in finite]
    errs = [N * (abs(e.center) + e.radius) ** (N - 1) * e.radius + 1e-12 * abs(z)
            for e, z in zip(finite, zetas)]
    used = [False] * len(finite)
    for i, e in enumerate(finite):
        if used[i]:
            continue
        group = [j for j in range(len(finite))
                 if not used[j] and abs(zetas[j] - zetas[i]) <= 2 * (errs[i] + errs[j])]
        if len(group) != N:
            raise Inconclusive(f"orbit of zeta={zetas[i]:.6g} has {len(group)} lines, expected {N}")
        for j in group:
            used[j] = True
        exact = None
        if e.exact is not None:
            exact = e.exact ** N
        curves.append(ExceptionalCurve(zetas[i] if exact is None else complex(exact), False, exps, exact,
                                       tuple(finite[j] for j in group)))
    return _sort_curves(curves)


def _sort_curves(curves):
    return sorted(curves, key=lambda c: (c.at_infinity, round(c.zeta.real, 10), round(c.zeta.imag, 10)))


def curve_distance(exc: ExceptionalSet, z1, z2) -> np.ndarray:
    """Weighted angular distance (sine of the angle in Psi-preimage coordinates) to the curves."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    s1, s2 = exc.sigma
    w1 = z1 if s1 == 1 else np.abs(z1) ** (1.0 / s1) * np.exp(1j * np.angle(z1) / s1)
    w2 = z2 if s2 == 1 else np.abs(z2) ** (1.0 / s2) * np.exp(1j * np.angle(z2) / s2)
    norm = np.sqrt(np.abs(w1) ** 2 + np.abs(w2) ** 2)
    norm = np.where(norm == 0, 1.0, norm)
    best = np.full(np.broadcast(w1, w2).shape, np.inf)
    for e in exc.lines:
        if e.at_infinity:
            d = np.abs(w2) / norm
        else:
            lam = e.center
            d = np.abs(w1 - lam * w2) / (math.sqrt(1 + abs(lam) ** 2) * norm)
        best = np.minimum(best, d)
    return best

"""Grid certification of Levi positivity for P - delta*H on the unit sphere.

The sphere is parametrized by z = (cos t e^{i th1}, sin t e^{i th2}), t in [0, pi/2].
Every cell gets a lower bound from its corner values minus a curvature allowance
estimated from second differences; only concavity can hide a dip between corners.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .levi import complex_hessian, fd_levi, max_eigenvalue_array, min_eigenvalue_array
from .polyring import MixedPoly

DEFAULT_GRID = 64
DEFAULT_BUDGET = 256
CURVATURE_SAFETY = 1.5


def budget_cap() -> int:
    """Largest per-axis resolution allowed by PSHBUMP_BUDGET (default 256)."""
    raw = os.environ.get("PSHBUMP_BUDGET")
    if not raw:
        return DEFAULT_BUDGET
    try:
        return max(4, int(raw))
    except ValueError:
        return DEFAULT_BUDGET


_THREADS = [os.cpu_count() or 1]


def set_threads(n: Optional[int]) -> None:
    _THREADS[0] = max(1, int(n)) if n else (os.cpu_count() or 1)


@dataclass(frozen=True)
class Region:
    """Part of the unit sphere; cones are measured by rho = |z1 - zeta z2| / |z2|."""

    kind: str = "full-sphere"
    zeta: complex = 0j
    at_infinity: bool = False
    inner: float = 0.0
    outer: float = math.inf
    wedge: object = None
    radius: float = 1.0

    def rho(self, z1, z2):
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.at_infinity:
                return np.where(z1 == 0, np.inf, np.abs(z2) / np.abs(z1))
            return np.where(z2 == 0, np.inf, np.abs(z1 - self.zeta * z2) / np.abs(z2))

    def contains(self, z1, z2) -> np.ndarray:
        shape = np.broadcast(z1, z2).shape
        if self.kind == "full-sphere":
            return np.ones(shape, dtype=bool)
        if self.kind == "cone":
            return self.rho(z1, z2) <= self.outer
        if self.kind == "annulus":
            r = self.rho(z1, z2)
            return (r >= self.inner) & (r <= self.outer)
        if self.kind == "wedge":
            return np.asarray(self.wedge.contains(z1, z2), dtype=bool)
        raise ValueError(f"unknown region kind {self.kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "radius": self.radius}
        if self.kind in ("cone", "annulus"):
            out.update(zeta=None if self.at_infinity else [self.zeta.real, self.zeta.imag],
                       inner=self.inner, outer=None if math.isinf(self.outer) else self.outer)
        if self.kind == "wedge":
            out["wedge"] = self.wedge.to_dict()
        return out


FULL_SPHERE = Region()


@dataclass(frozen=True)
class Certificate:
    region: Region
    grid: Tuple[int, int, int]
    lipschitz: float
    margin: float
    verdict: str  # certified | violated | inconclusive
    evaluations: int
    min_value: float = 0.0
    lower_bound: float = 0.0
    scale: float = 1.0
    tolerance: float = 0.0
    witness: Optional[Tuple[complex, complex]] = None
    witness_value: Optional[float] = None
    rigorous: bool = False
    delta: float = 0.0
    constant: Optional[float] = None
    cells: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def certified(self) -> bool:
        return self.verdict == "certified"

    def to_dict(self) -> dict:
        out = {
            "region": self.region.to_dict(),
            "grid": list(self.grid),
            "lipschitz": self.lipschitz,
            "margin": self.margin,
            "verdict": self.verdict,
            "evaluations": self.evaluations,
            "min_value": self.min_value,
            "lower_bound": self.lower_bound,
            "scale": self.scale,
            "tolerance": self.tolerance,
            "rigorous": self.rigorous,
            "delta": self.delta,
        }
        if self.constant is not None:
            out["constant"] = self.constant
        if self.witness is not None:
            out["witness"] = [[self.witness[0].real, self.witness[0].imag],
                              [self.witness[1].real, self.witness[1].imag]]
            out["witness_value"] = self.witness_value
        return out


# ------------------------------------------------------------ field evaluation

def _grid(N: int):
    t = np.arange(N + 1) * (math.pi / 2 / N)
    th = np.arange(N) * (2 * math.pi / N)
    return t, th


def sphere_grid(N: int, radius: float = 1.0):
    """Grid points (z1, z2) of shape (N+1, N, N), t including both seams."""
    return _points(N, radius)


def grid_bounds(h11, h22, h12) -> Tuple[float, float]:
    """(least node value, least cell lower bound) of the min-eigenvalue field on a sphere grid."""
    vals = min_eigenvalue_array(h11, h22, h12)
    return float(vals.min()), float(_cell_bounds(vals).min())


def _points(N: int, radius: float = 1.0):
    t, th = _grid(N)
    T, A, B = np.meshgrid(t, th, th, indexing="ij")
    return radius * np.cos(T) * np.exp(1j * A), radius * np.sin(T) * np.exp(1j * B)


def _chunked(fn, z1: np.ndarray, z2: np.ndarray, chunk: int = 32768):
    """Apply fn to flattened chunks in a thread pool; results keep their order."""
    f1, f2 = z1.ravel(), z2.ravel()
    pieces = [(f1[i:i + chunk], f2[i:i + chunk]) for i in range(0, len(f1), chunk)]
    workers = min(_THREADS[0], len(pieces)) or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), pieces))
    else:
        parts = [fn(*ab) for ab in pieces]
    out = []
    for k in range(len(parts[0])):
        out.append(np.concatenate([p[k] for p in parts]).reshape(z1.shape))
    return tuple(out)


def levi_arrays(obj, z1, z2):
    """(h11, h22, h12) for a MixedPoly (symbolic) or a bump (own method or finite differences)."""
    if isinstance(obj, MixedPoly):
        field_ = complex_hessian(obj)
        return _chunked(lambda a, b: tuple(np.asarray(x) for x in field_.arrays(a, b)), z1, z2)
    if hasattr(obj, "levi_arrays"):
        return _chunked(obj.levi_arrays, z1, z2)
    return _chunked(lambda a, b: fd_levi(obj, a, b), z1, z2)


class _Field:
    """Levi data of P and H on one grid, cached because the form is affine in delta."""

    def __init__(self, p: MixedPoly, h, N: int, radius: float):
        self.N = N
        self.z1, self.z2 = _points(N, radius)
        self.P = levi_arrays(p, self.z1, self.z2)
        self.H = None if h is None else levi_arrays(h, self.z1, self.z2)
        mx = max_eigenvalue_array(*self.P)
        mn = min_eigenvalue_array(*self.P)
        self.scale = float(max(np.max(np.abs(mx)), np.max(np.abs(mn)))) or 1.0
        self.evaluations = self.z1.size * (1 if h is None else 2)

    def min_eig(self, delta: float) -> np.ndarray:
        if self.H is None or delta == 0:
            return min_eigenvalue_array(*self.P)
        h11 = self.P[0] - delta * self.H[0]
        h22 = self.P[1] - delta * self.H[1]
        h12 = self.P[2] - delta * self.H[2]
        return min_eigenvalue_array(h11, h22, h12)


def _cell_bounds(vals: np.ndarray) -> np.ndarray:
    """Lower bound per cell: corner minimum minus the concavity allowance."""
    # second differences; t is clamped at the seams, angles are periodic
    up = np.concatenate([vals[1:], vals[-1:]], axis=0)
    down = np.concatenate([vals[:1], vals[:-1]], axis=0)
    d2t = up - 2 * vals + down
    d2t[0] = d2t[1]
    d2t[-1] = d2t[-2]
    d2a = np.roll(vals, -1, 1) - 2 * vals + np.roll(vals, 1, 1)
    d2b = np.roll(vals, -1, 2) - 2 * vals + np.roll(vals, 1, 2)
    conc = [CURVATURE_SAFETY * np.maximum(0.0, -d) for d in (d2t, d2a, d2b)]

    def corners(arr, reducer):
        a = arr[:-1]
        b = arr[1:]
        out = None
        for base in (a, b):
            for s1 in (0, -1):
                for s2 in (0, -1):
                    v = np.roll(np.roll(base, s1, 1), s2, 2)
                    out = v if out is None else reducer(out, v)
        return out

    low = corners(vals, np.minimum)
    allowance = sum(corners(c, np.maximum) for c in conc) / 8.0
    return low - allowance


def _cell_mask(region: Region, z1, z2) -> np.ndarray:
    inside = region.contains(z1, z2)
    a, b = inside[:-1], inside[1:]
    out = np.zeros(a.shape, dtype=bool)
    for base in (a, b):
        for s1 in (0, -1):
            for s2 in (0, -1):
                out |= np.roll(np.roll(base, s1, 1), s2, 2)
    return out


def apriori_lipschitz(p: MixedPoly) -> float:
    """Sum over Hessian entries of sum |coeff| * deg * (deg + 2)."""
    field_ = complex_hessian(p)
    total = 0.0
    for entry, mult in ((field_.h11, 1), (field_.h22, 1), (field_.h12, 2)):
        for mon, c in entry.terms.items():
            d = mon.degree
            total += mult * math.hypot(float(c.re), float(c.im)) * d * (d + 2)
    return total


def _evaluate(fld: _Field, region: Region, delta: float, margin: float, tol: float, lip: float):
    vals = fld.min_eig(delta)
    N = fld.N
    mask_nodes = region.contains(fld.z1, fld.z2)
    cells = _cell_bounds(vals)
    mask = _cell_mask(region, fld.z1, fld.z2)
    S = fld.scale
    if not mask.any():
        return "certified", math.inf, math.inf, None, None, cells, False
    lower = float(cells[mask].min())
    node_vals = np.where(mask_nodes, vals, np.inf)
    flat = int(np.argmin(node_vals))
    vmin = float(node_vals.ravel()[flat])
    witness = None
    wval = None
    if vmin < -10 * tol * S:
        idx = np.unravel_index(flat, vals.shape)
        witness = (complex(fld.z1[idx]), complex(fld.z2[idx]))
        wval = vmin
        return "violated", vmin, lower, witness, wval, cells, False
    diam = math.sqrt((math.pi / 2 / N) ** 2 + 2 * (2 * math.pi / N) ** 2)
    rigorous = vmin - lip * diam / 2 >= margin * S
    if lower >= margin * S - tol * S:
        return "certified", vmin, lower, None, None, cells, rigorous
    return "inconclusive", vmin, lower, None, None, cells, False


def _verify_witness(p: MixedPoly, h, delta: float, witness) -> float:
    z1 = np.array([witness[0]])
    z2 = np.array([witness[1]])
    P = levi_arrays(p, z1, z2)
    if h is None or delta == 0:
        return float(min_eigenvalue_array(*P)[0])
    H = levi_arrays(h, z1, z2)
    return float(min_eigenvalue_array(P[0] - delta * H[0], P[1] - delta * H[1], P[2] - delta * H[2])[0])


def _unpack(target):
    if isinstance(target, MixedPoly):
        return target, None, 0.0
    p, h, delta = target
    return p, h, float(delta)


def certify_psd(target, region: Region = FULL_SPHERE, margin: float = 0.0, grid: int = DEFAULT_GRID,
                tol: float = 1e-4, budget: Optional[int] = None, _cache: Optional[dict] = None) -> Certificate:
    """Certify min eig Levi(P - delta H) >= margin * scale on the region.

    `target` is a MixedPoly or a triple (P, H, delta).  Resolution doubles on an
    undecided grid until `budget` (per axis) is reached.
    """
    p, h, delta = _unpack(target)
    cap = budget if budget is not None else budget_cap()
    lip = apriori_lipschitz(p)
    N = int(grid)
    evaluations = 0
    while True:
        key = (N, region.radius)
        fld = None if _cache is None else _cache.get(key)
        if fld is None:
            fld = _Field(p, h, N, region.radius)
            evaluations += fld.evaluations
            if _cache is not None:
                _cache[key] = fld
        verdict, vmin, lower, witness, wval, cells, rigorous = _evaluate(fld, region, delta, margin, tol, lip)
        if verdict == "violated":
            wval = _verify_witness(p, h, delta, witness)
        if verdict != "inconclusive" or 2 * N > cap:
            return Certificate(region, (N + 1, N, N), lip, margin, verdict, evaluations, vmin, lower,
                               fld.scale, tol, witness, wval, rigorous, delta, None, cells)
        N *= 2


def max_delta(p: MixedPoly, h, region: Region = FULL_SPHERE, grid: int = DEFAULT_GRID,
              width: float = 1 / 64, cap: float = 64.0, tol: float = 1e-4,
              budget: Optional[int] = None) -> Tuple[float, float]:
    """Bisection bracket (delta_lo certified, delta_hi not) of width <= `width`."""
    cache: dict = {}

    def ok(d):
        return certify_psd((p, h, d), region, 0.0, grid, tol, budget, cache).certified

    if not ok(0.0):
        return 0.0, 0.0
    lo, hi = 0.0, min(1.0, cap)
    while ok(hi):
        lo = hi
        if hi >= cap:
            return cap, cap
        hi = min(2 * hi, cap)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def certify_strict_off_lines(target, exc, k: int, grid: int = DEFAULT_GRID, near: float = 1e-3,
                             region: Region = FULL_SPHERE) -> Certificate:
    """Best c with min eig >= c * dist^(2(k-1)) at grid points away from the curves."""
    p, h, delta = _unpack(target)
    fld = _Field(p, h, grid, region.radius)
    vals = fld.min_eig(delta)
    if exc is not None and len(exc.lines):
        dist = exc.distance(fld.z1, fld.z2)
    else:
        dist = np.ones(vals.shape)
    use = (dist > near) & region.contains(fld.z1, fld.z2)
    ratio = np.where(use, vals / np.maximum(dist, near) ** (2 * (k - 1)), np.inf)
    flat = int(np.argmin(ratio))
    c = float(ratio.ravel()[flat])
    S = fld.scale
    N = grid
    lip = apriori_lipschitz(p)
    if c > 1e-9 * S:
        return Certificate(region, (N + 1, N, N), lip, 0.0, "certified", fld.evaluations,
                           float(vals[use].min()), c, S, 1e-9, None, None, False, delta, c)
    idx = np.unravel_index(flat, vals.shape)
    w = (complex(fld.z1[idx]), complex(fld.z2[idx]))
    return Certificate(region, (N + 1, N, N), lip, 0.0, "violated", fld.evaluations,
                       float(vals[use].min()), c, S, 1e-9, w, float(vals[idx]), False, delta, max(c, 0.0))


def _fd_real_hessian(f, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference Hessian of f: R^4 -> R."""
    D = np.zeros((4, 4))
    fx = f(x)
    for i in range(4):
        ei = np.zeros(4)
        ei[i] = h
        D[i, i] = (f(x + ei) - 2 * fx + f(x - ei)) / (h * h)
        for j in range(i + 1, 4):
            ej = np.zeros(4)
            ej[j] = h
            D[i, j] = D[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej)
                                 + f(x - ei - ej)) / (4 * h * h)
    return D


def crosscheck_hessian(p: MixedPoly, samples: int = 50, seed: int = 0, step: float = 1e-3) -> float:
    """Max relative error between symbolic Levi entries and central differences.

    The step is step * (1 + |x|) with one Richardson level, which keeps both the
    truncation and the rounding error near 1e-10 for degrees up to about 8.
    """
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(samples, 4))
    field_ = complex_hessian(p)
    worst = 0.0

    def f(x):
        return float(np.real(p(np.array([x[0] + 1j * x[1]]), np.array([x[2] + 1j * x[3]]))[0]))

    for x in pts:
        h = step * (1 + np.linalg.norm(x))
        D = (4 * _fd_real_hessian(f, x, h / 2) - _fd_real_hessian(f, x, h)) / 3
        fd11 = (D[0, 0] + D[1, 1]) / 4
        fd22 = (D[2, 2] + D[3, 3]) / 4
        fd12 = (D[0, 2] + D[1, 3] + 1j * (D[0, 3] - D[1, 2])) / 4
        z1 = np.array([x[0] + 1j * x[1]])
        z2 = np.array([x[2] + 1j * x[3]])
        s11, s22, s12 = (complex(np.asarray(a)[0]) for a in field_.arrays(z1, z2))
        err = max(abs(fd11 - s11), abs(fd22 - s22), abs(fd12 - s12))
        ref = max(abs(s11), abs(s22), abs(s12))
        if ref == 0 and err == 0:
            continue
        nz = math.hypot(*x)
        floor = 1e-8 * p.coeff_norm() * (1 + nz) ** max(p.degree() - 2, 0)
        worst = max(worst, err / max(ref, floor))
    return worst


def cells_csv(cert: Certificate) -> str:
    """Rows (t, th1, th2, lower bound) for each cell, cell coordinates at the low corner."""
    if cert.cells is None:
        return "t,theta1,theta2,min_eig\n"
    N = cert.grid[1]
    t, th = _grid(N)
    lines = ["t,theta1,theta2,min_eig"]
    cells = cert.cells
    for i in range(cells.shape[0]):
        for j in range(cells.shape[1]):
            for k in range(cells.shape[2]):
                lines.append(f"{t[i]:.6f},{th[j]:.6f},{th[k]:.6f},{cells[i, j, k]:.9e}")
    return "\n".join(lines) + "\n"

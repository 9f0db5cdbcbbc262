"""Exact mixed polynomials in z1, conj(z1), z2, conj(z2) with Gaussian-rational coefficients.

A monomial (a, b, m, n) stands for z1^a conj(z1)^b z2^m conj(z2)^n.  A polynomial
is real-valued when the coefficient at (a, b, m, n) is the conjugate of the one at
(b, a, n, m).  Holomorphic polynomials (b = n = 0 everywhere) share the same type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class RealityError(ValueError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


class ComplexRational:
    """Gaussian rational re + im*i; Fractions keep both parts normalized."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = _frac(re)
        self.im = _frac(im)

    @classmethod
    def of(cls, x) -> "ComplexRational":
        if isinstance(x, ComplexRational):
            return x
        if isinstance(x, complex):
            return cls(Fraction(x.real), Fraction(x.imag))
        return cls(x, 0)

    def __add__(self, other):
        o = ComplexRational.of(other)
        return ComplexRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = ComplexRational.of(other)
        return ComplexRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return ComplexRational.of(other) - self

    def __mul__(self, other):
        o = ComplexRational.of(other)
        return ComplexRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = ComplexRational.of(other)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        num = self * o.conjugate()
        return ComplexRational(num.re / den, num.im / den)

    def __neg__(self):
        return ComplexRational(-self.re, -self.im)

    def conjugate(self) -> "ComplexRational":
        return ComplexRational(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __pow__(self, k: int):
        out = ComplexRational(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        try:
            o = ComplexRational.of(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def is_real(self) -> bool:
        return self.im == 0

    def __repr__(self):
        return f"ComplexRational({self.re}, {self.im})"

    def __str__(self):
        return _format_coeff(self)


class Monomial(NamedTuple):
    a: int  # power of z1
    b: int  # power of conj(z1)
    m: int  # power of z2
    n: int  # power of conj(z2)

    @property
    def degree(self) -> int:
        return self.a + self.b + self.m + self.n

    def conj(self) -> "Monomial":
        return Monomial(self.b, self.a, self.n, self.m)


ZERO = ComplexRational(0)
ONE = ComplexRational(1)


class MixedPoly:
    """Immutable sparse polynomial; `terms` maps Monomial -> ComplexRational."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Dict] = None):
        clean = {}
        if terms:
            for mon, c in terms.items():
                c = ComplexRational.of(c)
                if c:
                    clean[Monomial(*mon)] = c
        self._terms = clean
        self._hash = None

    # construction helpers
    @classmethod
    def constant(cls, c) -> "MixedPoly":
        return cls({(0, 0, 0, 0): c})

    @classmethod
    def monomial(cls, a=0, b=0, m=0, n=0, coeff=1) -> "MixedPoly":
        return cls({(a, b, m, n): coeff})

    @classmethod
    def z1(cls) -> "MixedPoly":
        return cls.monomial(1, 0, 0, 0)

    @classmethod
    def z2(cls) -> "MixedPoly":
        return cls.monomial(0, 0, 1, 0)

    @property
    def terms(self) -> Dict[Monomial, ComplexRational]:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items())

    def coefficient(self, mon) -> ComplexRational:
        return self._terms.get(Monomial(*mon), ZERO)

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    # algebra
    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self._terms)
        for mon, c in other._terms.items():
            out[mon] = out.get(mon, ZERO) + c
        return MixedPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return MixedPoly({mon: -c for mon, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if not isinstance(other, MixedPoly):
            return self.scale(other)
        out: Dict[Tuple[int, int, int, int], ComplexRational] = {}
        for (a1, b1, m1, n1), c1 in self._terms.items():
            for (a2, b2, m2, n2), c2 in other._terms.items():
                key = (a1 + a2, b1 + b2, m1 + m2, n1 + n2)
                prod = c1 * c2
                if key in out:
                    out[key] = out[key] + prod
                else:
                    out[key] = prod
        return MixedPoly(out)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, c) -> "MixedPoly":
        c = ComplexRational.of(c)
        return MixedPoly({mon: v * c for mon, v in self._terms.items()})

    def __pow__(self, k: int) -> "MixedPoly":
        if k < 0:
            raise ValueError("negative power")
        out = MixedPoly.constant(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def conj(self) -> "MixedPoly":
        return MixedPoly({mon.conj(): c.conjugate() for mon, c in self._terms.items()})

    def real_part(self) -> "MixedPoly":
        return (self + self.conj()).scale(Fraction(1, 2))

    def imag_part(self) -> "MixedPoly":
        return (self - self.conj()).scale(ComplexRational(0, Fraction(-1, 2)))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, ComplexRational)):
            other = MixedPoly.constant(other)
        if not isinstance(other, MixedPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # structure
    def is_real(self) -> bool:
        return all(self._terms.get(mon.conj(), ZERO) == c.conjugate() for mon, c in self._terms.items())

    def is_holomorphic(self) -> bool:
        return all(mon.b == 0 and mon.n == 0 for mon in self._terms)

    def degree(self) -> int:
        return max((mon.degree for mon in self._terms), default=0)

    def bidegrees(self) -> set:
        return {(mon.a + mon.b, mon.m + mon.n) for mon in self._terms}

    def total_degrees(self) -> set:
        return {mon.degree for mon in self._terms}

    def homogeneous_degree(self) -> Optional[int]:
        degs = self.total_degrees()
        return degs.pop() if len(degs) == 1 else None

    def coeff_norm(self) -> float:
        return sum(math.hypot(float(c.re), float(c.im)) for c in self._terms.values())

    # evaluation
    def evaluate(self, z):
        return evaluate(self, z)

    def __call__(self, z1, z2):
        return evaluate_array(self, z1, z2)

    def __repr__(self):
        return f"MixedPoly({format_poly(self)!r})"

    def __str__(self):
        return format_poly(self)


def _as_poly(x) -> MixedPoly:
    if isinstance(x, MixedPoly):
        return x
    return MixedPoly.constant(x)


@dataclass(frozen=True)
class WeightSignature:
    m1: Fraction
    m2: Fraction
    r: Fraction


# ---------------------------------------------------------------- formatting

def _format_coeff(c: ComplexRational) -> str:
    if c.im == 0:
        return str(c.re)
    if c.re == 0:
        return f"{c.im}i"
    sign = "-" if c.im < 0 else "+"
    return f"({c.re} {sign} {abs(c.im)}i)"


def _format_monomial(mon: Monomial) -> str:
    parts = []
    for name, power in (("z1", mon.a), ("conj(z1)", mon.b), ("z2", mon.m), ("conj(z2)", mon.n)):
        if power == 1:
            parts.append(name)
        elif power > 1:
            parts.append(f"{name}^{power}")
    return "*".join(parts)


def format_poly(p: MixedPoly) -> str:
    """Canonical text: lexicographic monomials, coefficients as a/b + c/d i."""
    if p.is_zero():
        return "0"
    out = []
    for mon, c in p.items():
        negative = (c.im == 0 and c.re < 0) or (c.re == 0 and c.im < 0)
        mag = -c if negative else c
        body = _format_monomial(mon)
        coeff = _format_coeff(mag)
        if not body:
            text = coeff
        elif mag == ONE:
            text = body
        else:
            text = f"{coeff}*{body}"
        if not out:
            out.append(("-" if negative else "") + text)
        else:
            out.append((" - " if negative else " + ") + text)
    return "".join(out)


# ---------------------------------------------------------------- parsing

_FUNCS = ("conj", "abs2", "Re", "Im")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = self._tokenize(text)
        self.i = 0

    @staticmethod
    def _tokenize(text):
        toks = []
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit():
                j = i
                while j < len(text) and text[j].isdigit():
                    j += 1
                num = Fraction(int(text[i:j]))
                if j < len(text) and text[j] == "/" and j + 1 < len(text) and text[j + 1].isdigit():
                    k = j + 1
                    while k < len(text) and text[k].isdigit():
                        k += 1
                    den = int(text[j + 1:k])
                    if den == 0:
                        raise ParseError("zero denominator", j + 1)
                    num = num / den
                    j = k
                imag = False
                if j < len(text) and text[j] == "i" and not (j + 1 < len(text) and text[j + 1].isalnum()):
                    imag = True
                    j += 1
                toks.append(("num", ComplexRational(0, num) if imag else ComplexRational(num), i))
                i = j
                continue
            if ch.isalpha():
                j = i
                while j < len(text) and text[j].isalnum():
                    j += 1
                word = text[i:j]
                if word in ("z1", "z2") or word in _FUNCS:
                    toks.append(("id", word, i))
                elif word == "i":
                    toks.append(("num", ComplexRational(0, 1), i))
                else:
                    raise ParseError(f"unknown token {word!r}", i)
                i = j
                continue
            if ch in "+-*^()":
                toks.append((ch, ch, i))
                i += 1
                continue
            raise ParseError(f"unexpected character {ch!r}", i)
        toks.append(("end", None, len(text)))
        return toks

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            want = "end of input" if kind == "end" else repr(kind)
            raise ParseError(f"expected {want}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> MixedPoly:
        p = self.expr()
        self.take("end")
        return p

    def expr(self) -> MixedPoly:
        sign = 1
        if self.peek()[0] in "+-":
            sign = -1 if self.take()[0] == "-" else 1
        p = self.term()
        if sign < 0:
            p = -p
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> MixedPoly:
        p = self.factor()
        while self.peek()[0] == "*":
            self.take()
            p = p * self.factor()
        return p

    def factor(self) -> MixedPoly:
        p = self.atom()
        if self.peek()[0] == "^":
            self.take()
            tok = self.peek()
            if tok[0] != "num" or tok[1].im != 0 or tok[1].re.denominator != 1:
                raise ParseError("expected natural exponent", tok[2])
            self.take()
            p = p ** int(tok[1].re)
        return p

    def atom(self) -> MixedPoly:
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return MixedPoly.constant(val)
        if kind == "(":
            self.take()
            p = self.expr()
            self.take(")")
            return p
        if kind == "id":
            self.take()
            if val == "z1":
                return MixedPoly.z1()
            if val == "z2":
                return MixedPoly.z2()
            self.take("(")
            inner = self.expr()
            self.take(")")
            if val == "conj":
                return inner.conj()
            if val == "abs2":
                return inner * inner.conj()
            if val == "Re":
                return inner.real_part()
            return inner.imag_part()
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", pos)


def parse_poly(text: str, real: bool = False) -> MixedPoly:
    """Parse the polynomial grammar; with real=True a non-real result raises RealityError."""
    p = _Parser(text).parse()
    if real and not p.is_real():
        raise RealityError(f"expression is not real-valued: {text!r}")
    return p


# ---------------------------------------------------------------- evaluation

def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, ComplexRational))


def evaluate_exact(p: MixedPoly, z) -> ComplexRational:
    z1 = ComplexRational.of(z[0])
    z2 = ComplexRational.of(z[1])
    w1, w2 = z1.conjugate(), z2.conjugate()
    total = ZERO
    for (a, b, m, n), c in p._terms.items():
        total = total + c * (z1 ** a) * (w1 ** b) * (z2 ** m) * (w2 ** n)
    return total


def evaluate(p: MixedPoly, z):
    """Value of a real polynomial at z = (z1, z2): exact for Gaussian-rational input."""
    if _is_exact(z[0]) and _is_exact(z[1]):
        v = evaluate_exact(p, z)
        if v.im != 0:
            raise RealityError("polynomial is not real-valued at this point")
        return v.re
    v = complex(evaluate_array(p, np.asarray(complex(z[0])), np.asarray(complex(z[1]))))
    return v.real


def evaluate_array(p: MixedPoly, z1, z2) -> np.ndarray:
    """Vectorized complex evaluation; callers take .real for real polynomials."""
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    shape = np.broadcast(z1, z2).shape
    if p.is_zero():
        return np.zeros(shape, dtype=complex)
    cache: Dict[Tuple[int, int], np.ndarray] = {}

    def power(which, k):
        key = (which, k)
        if key not in cache:
            base = (z1, np.conj(z1), z2, np.conj(z2))[which]
            if k == 0:
                cache[key] = np.ones(shape, dtype=complex)
            elif k == 1:
                cache[key] = np.broadcast_to(base, shape)
            else:
                half = power(which, k // 2)
                sq = half * half
                cache[key] = sq * base if k % 2 else sq
        return cache[key]

    out = np.zeros(shape, dtype=complex)
    for (a, b, m, n), c in p._terms.items():
        term = power(0, a) * power(1, b) * power(2, m) * power(3, n)
        out += complex(c) * term
    return out


# ---------------------------------------------------------------- homogeneity

def check_homogeneous(p: MixedPoly, m1, m2) -> Optional[Fraction]:
    """Weight r if every monomial has (a+b)/m1 + (m+n)/m2 = r, else None."""
    if p.is_zero():
        raise ValueError("zero polynomial has no weight")
    m1, m2 = Fraction(m1), Fraction(m2)
    weights = {Fraction(s) / m1 + Fraction(t) / m2 for s, t in p.bidegrees()}
    return weights.pop() if len(weights) == 1 else None


def infer_weights(p: MixedPoly) -> Optional[WeightSignature]:
    """Solve for (m1, m2) with weight 1 from the bidegrees; None when not unique."""
    if p.is_zero():
        raise ValueError("zero polynomial has no weight")
    bideg = sorted(p.bidegrees())
    # unknowns x = 1/m1, y = 1/m2 with s*x + t*y = 1
    for i in range(len(bideg)):
        for j in range(i + 1, len(bideg)):
            (s1, t1), (s2, t2) = bideg[i], bideg[j]
            det = s1 * t2 - s2 * t1
            if det == 0:
                continue
            x = Fraction(t2 - t1, det)
            y = Fraction(s1 - s2, det)
            if x <= 0 or y <= 0:
                return None
            if all(s * x + t * y == 1 for s, t in bideg):
                return WeightSignature(1 / x, 1 / y, Fraction(1))
            return None
    return None


# ---------------------------------------------------------------- calculus

def wirtinger(p: MixedPoly, var: str, kind: str = "holomorphic") -> MixedPoly:
    """Formal d/dz_j (kind='holomorphic') or d/dconj(z_j) ('antiholomorphic')."""
    if var not in ("z1", "z2") or kind not in ("holomorphic", "antiholomorphic"):
        raise ValueError(f"bad derivative spec {var!r}, {kind!r}")
    slot = (0 if var == "z1" else 2) + (0 if kind == "holomorphic" else 1)
    out = {}
    for mon, c in p._terms.items():
        e = mon[slot]
        if e == 0:
            continue
        new = list(mon)
        new[slot] = e - 1
        out[tuple(new)] = c * e
    return MixedPoly(out)


def laplacian1(u: MixedPoly) -> MixedPoly:
    """Delta = 4 d/dz1 d/dconj(z1) for a polynomial in the first slot."""
    return wirtinger(wirtinger(u, "z1", "antiholomorphic"), "z1").scale(4)


# ---------------------------------------------------------------- substitutions

def power_map(p: MixedPoly, s1: int, s2: int) -> MixedPoly:
    """p o Psi with Psi(z1, z2) = (z1^s1, z2^s2)."""
    if s1 < 1 or s2 < 1:
        raise ValueError("power exponents must be positive integers")
    return MixedPoly({(s1 * a, s1 * b, s2 * m, s2 * n): c for (a, b, m, n), c in p._terms.items()})


def swap(p: MixedPoly) -> MixedPoly:
    return MixedPoly({(m, n, a, b): c for (a, b, m, n), c in p._terms.items()})


def linear_change(p: MixedPoly, l1: MixedPoly, l2: MixedPoly) -> MixedPoly:
    """Substitute z1 -> l1(z), z2 -> l2(z) for holomorphic l1, l2."""
    pw = {}

    def power(idx, k):
        if (idx, k) not in pw:
            base = (l1, l1.conj(), l2, l2.conj())[idx]
            pw[(idx, k)] = base ** k
        return pw[(idx, k)]

    out = MixedPoly()
    for (a, b, m, n), c in p._terms.items():
        out = out + (power(0, a) * power(1, b) * power(2, m) * power(3, n)).scale(c)
    return out


def shear(p: MixedPoly, c) -> MixedPoly:
    """p(z1 + c*z2, z2)."""
    c = ComplexRational.of(c)
    return linear_change(p, MixedPoly({(1, 0, 0, 0): 1, (0, 0, 1, 0): c}), MixedPoly.z2())


def shear2(p: MixedPoly, c) -> MixedPoly:
    """p(z1, z2 + c*z1)."""
    c = ComplexRational.of(c)
    return linear_change(p, MixedPoly.z1(), MixedPoly({(0, 0, 1, 0): 1, (1, 0, 0, 0): c}))


def line_coefficients(p: MixedPoly) -> Dict[Tuple[int, int], MixedPoly]:
    """c_mn(zeta) with p(zeta*w, w) = sum c_mn(zeta) w^m conj(w)^n; zeta sits in slot z1."""
    out: Dict[Tuple[int, int], Dict] = {}
    for (a, b, m, n), c in p._terms.items():
        key = (a + m, b + n)
        bucket = out.setdefault(key, {})
        bucket[(a, b, 0, 0)] = bucket.get((a, b, 0, 0), ZERO) + c
    return {key: MixedPoly(terms) for key, terms in sorted(out.items()) if MixedPoly(terms)._terms}


def restrict_line(p: MixedPoly, zeta) -> Dict[Tuple[int, int], ComplexRational]:
    """Exact c_mn(zeta) for a Gaussian-rational zeta."""
    zeta = ComplexRational.of(zeta)
    out = {}
    for key, c in line_coefficients(p).items():
        v = evaluate_exact(c, (zeta, 0))
        if v:
            out[key] = v
    return out


def substitute(p: MixedPoly, mode: str, *args):
    """Dispatch: line(zeta or None for formal), shear(c), power(s1, s2), swap."""
    if mode == "line":
        zeta = args[0] if args else None
        return line_coefficients(p) if zeta is None else restrict_line(p, zeta)
    if mode == "shear":
        return shear(p, args[0])
    if mode == "power":
        return power_map(p, *args)
    if mode == "swap":
        return swap(p)
    raise ValueError(f"unknown substitution mode {mode!r}")


def pluriharmonic_part(p: MixedPoly) -> MixedPoly:
    """Terms that are purely holomorphic or purely antiholomorphic (constant included)."""
    return MixedPoly({mon: c for mon, c in p._terms.items()
                      if (mon.b == 0 and mon.n == 0) or (mon.a == 0 and mon.m == 0)})


def compose(u: MixedPoly, f: MixedPoly) -> MixedPoly:
    """U(F(z), conj(F(z))) for U in the first slot and holomorphic F."""
    if any(mon.m or mon.n for mon in u._terms):
        raise ValueError("outer polynomial must only use the first variable")
    if not f.is_holomorphic():
        raise ValueError("inner polynomial must be holomorphic")
    fc = f.conj()
    pw: Dict[Tuple[int, int], MixedPoly] = {}

    def power(which, k):
        if (which, k) not in pw:
            pw[(which, k)] = (f if which == 0 else fc) ** k
        return pw[(which, k)]

    out = MixedPoly()
    for (a, b, _, _), c in u._terms.items():
        out = out + (power(0, a) * power(1, b)).scale(c)
    return out


def holomorphic_monomial(d: int, D: int) -> MixedPoly:
    return MixedPoly.monomial(d, 0, D, 0)

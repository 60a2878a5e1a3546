"""Dense univariate polynomials with exact rational or Gaussian-rational coefficients.

Coefficients are stored as integer numerator lists over one positive common
denominator, so products reduce to integer convolutions.  Large convolutions
go through Kronecker substitution: both operands are packed into a single big
integer, multiplied once (GMP when gmpy2 is importable), and unpacked.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

from .scalars import GaussRat

try:  # GMP multiplication is much faster than CPython's Karatsuba at these sizes
    from gmpy2 import mpz as _mpz
except ImportError:  # pragma: no cover
    _mpz = None

_SCHOOLBOOK_CUTOFF = 24


def _schoolbook(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _pack(coeffs, kb):
    pos = b"".join((c if c > 0 else 0).to_bytes(kb, "little") for c in coeffs)
    neg = b"".join((-c if c < 0 else 0).to_bytes(kb, "little") for c in coeffs)
    return int.from_bytes(pos, "little") - int.from_bytes(neg, "little")


def int_convolve(a: list[int], b: list[int]) -> list[int]:
    """Exact product of two integer coefficient lists (low-to-high)."""
    if not a or not b:
        return []
    if min(len(a), len(b)) <= _SCHOOLBOOK_CUTOFF:
        return _schoolbook(a, b)
    ma = max(abs(x) for x in a)
    mb = max(abs(x) for x in b)
    if ma == 0 or mb == 0:
        return [0] * (len(a) + len(b) - 1)
    bits = ma.bit_length() + mb.bit_length() + min(len(a), len(b)).bit_length() + 2
    kb = (bits + 7) // 8
    A = _pack(a, kb)
    if a is b:
        C = int(_mpz(A) ** 2) if _mpz is not None else A * A
    else:
        B = _pack(b, kb)
        C = int(_mpz(A) * _mpz(B)) if _mpz is not None else A * B
    n = len(a) + len(b) - 1
    half = 1 << (8 * kb - 1)
    bias = int.from_bytes((b"\x00" * (kb - 1) + b"\x80") * n, "little")
    raw = (C + bias).to_bytes(n * kb, "little")
    return [int.from_bytes(raw[i * kb:(i + 1) * kb], "little") - half for i in range(n)]


def _trim(xs):
    n = len(xs)
    while n and not xs[n - 1]:
        n -= 1
    return xs[:n] if n != len(xs) else xs


class RatPoly:
    """Polynomial ``(re + i*im)/den`` with integer coefficient lists, low degree first.

    ``im`` is ``None`` for rational polynomials.  Instances are immutable.
    """

    __slots__ = ("re", "im", "den")

    def __init__(self, re, im=None, den=1, _normalized=False):
        if _normalized:
            self.re, self.im, self.den = re, im, den
            return
        re = list(re)
        if im is not None:
            im = list(im)
            n = max(len(re), len(im))
            re += [0] * (n - len(re))
            im += [0] * (n - len(im))
            if not any(im):
                im = None
        if den == 0:
            raise ZeroDivisionError("zero denominator")
        if den < 0:
            re = [-c for c in re]
            im = None if im is None else [-c for c in im]
            den = -den
        # trim jointly
        n = len(re)
        while n and not re[n - 1] and (im is None or not im[n - 1]):
            n -= 1
        re = re[:n]
        im = None if im is None else im[:n]
        g = den
        for c in re:
            if g == 1:
                break
            g = gcd(g, c)
        if im is not None:
            for c in im:
                if g == 1:
                    break
                g = gcd(g, c)
        if not re:
            g = den
        if g > 1:
            re = [c // g for c in re]
            im = None if im is None else [c // g for c in im]
            den //= g
        self.re, self.im, self.den = re, im, den

    # -- construction -------------------------------------------------
    @classmethod
    def from_coeffs(cls, coeffs):
        """Build from a low-to-high list of ints, Fractions or GaussRats."""
        coeffs = list(coeffs)
        if any(isinstance(c, GaussRat) for c in coeffs):
            parts = [c if isinstance(c, GaussRat) else GaussRat(c) for c in coeffs]
            den = 1
            for c in parts:
                den = den * c.re.denominator // gcd(den, c.re.denominator)
                den = den * c.im.denominator // gcd(den, c.im.denominator)
            re = [int(c.re * den) for c in parts]
            im = [int(c.im * den) for c in parts]
            return cls(re, im, den)
        fr = [Fraction(c) for c in coeffs]
        den = 1
        for c in fr:
            den = den * c.denominator // gcd(den, c.denominator)
        return cls([int(c * den) for c in fr], None, den)

    @classmethod
    def constant(cls, c):
        return cls.from_coeffs([c])

    @classmethod
    def monomial(cls, k, c=1):
        return cls.from_coeffs([0] * k + [c])

    # -- basic properties ----------------------------------------------
    @property
    def is_gaussian(self) -> bool:
        return self.im is not None

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.re) - 1

    def is_zero(self) -> bool:
        return not self.re

    @property
    def coeffs(self) -> list:
        if self.im is None:
            return [Fraction(c, self.den) for c in self.re]
        return [_gr(a, b, self.den) for a, b in zip(self.re, self.im)]

    def coeff(self, k):
        if k < 0 or k > self.degree:
            return Fraction(0)
        if self.im is None:
            return Fraction(self.re[k], self.den)
        return _gr(self.re[k], self.im[k], self.den)

    def leading(self):
        return self.coeff(self.degree)

    def max_coeff_bits(self) -> int:
        m = max((abs(c) for c in self.re), default=0)
        if self.im is not None:
            m = max(m, max(abs(c) for c in self.im))
        return m.bit_length() + self.den.bit_length()

    # -- arithmetic ------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, RatPoly):
            return other
        return RatPoly.constant(other)

    def __add__(self, other):
        o = self._lift(other)
        d = self.den * o.den // gcd(self.den, o.den)
        fa, fb = d // self.den, d // o.den
        n = max(len(self.re), len(o.re))
        re = [(self.re[i] * fa if i < len(self.re) else 0)
              + (o.re[i] * fb if i < len(o.re) else 0) for i in range(n)]
        im = None
        if self.im is not None or o.im is not None:
            ai = self.im or [0] * len(self.re)
            bi = o.im or [0] * len(o.re)
            im = [(ai[i] * fa if i < len(ai) else 0)
                  + (bi[i] * fb if i < len(bi) else 0) for i in range(n)]
        return RatPoly(re, im, d)

    __radd__ = __add__

    def __neg__(self):
        return RatPoly([-c for c in self.re],
                       None if self.im is None else [-c for c in self.im],
                       self.den, _normalized=True)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, RatPoly):
            return self.scale(other)
        if self.is_zero() or other.is_zero():
            return RatPoly([])
        same = other is self
        if self.im is None and other.im is None:
            re = int_convolve(self.re, self.re if same else other.re)
            return RatPoly(re, None, self.den * other.den)
        ar, ai = self.re, self.im or [0] * len(self.re)
        br, bi = other.re, other.im or [0] * len(other.re)
        rr = int_convolve(ar, br)
        ii = int_convolve(ai, bi)
        ri = int_convolve(ar, bi)
        ir = int_convolve(ai, br)
        re = [x - y for x, y in zip(rr, ii)]
        im = [x + y for x, y in zip(ri, ir)]
        return RatPoly(re, im, self.den * other.den)

    def square(self):
        if self.im is None:
            return RatPoly(int_convolve(self.re, self.re), None, self.den * self.den)
        return self * self

    __rmul__ = __mul__

    def scale(self, c):
        """Multiply by an exact scalar."""
        if isinstance(c, GaussRat):
            if c.im == 0:
                return self.scale(c.re)
            num_r, num_i = c.re * c.im.denominator, c.im * c.re.denominator
            cd = c.re.denominator * c.im.denominator
            # c = (num_r + i num_i)/cd with num_* possibly fractional; clear fully
            fr, fi = Fraction(num_r), Fraction(num_i)
            m = fr.denominator * fi.denominator
            a, b = int(fr * m), int(fi * m)
            cd *= m
            ar, ai = self.re, self.im or [0] * len(self.re)
            re = [a * x - b * y for x, y in zip(ar, ai)]
            im = [a * y + b * x for x, y in zip(ar, ai)]
            return RatPoly(re, im, self.den * cd)
        c = Fraction(c)
        return RatPoly([x * c.numerator for x in self.re],
                       None if self.im is None else [x * c.numerator for x in self.im],
                       self.den * c.denominator)

    def shift(self, k: int):
        """Multiply by t**k."""
        if self.is_zero() or k == 0:
            return self
        return RatPoly([0] * k + self.re,
                       None if self.im is None else [0] * k + self.im,
                       self.den, _normalized=True)

    def __eq__(self, other):
        if not isinstance(other, RatPoly):
            other = RatPoly.constant(other)
        return (self.re == other.re and self.den == other.den
                and (self.im or None) == (other.im or None))

    def __hash__(self):
        return hash((tuple(self.re), None if self.im is None else tuple(self.im), self.den))

    # -- evaluation ------------------------------------------------------
    def __call__(self, x):
        """Exact Horner evaluation at an exact scalar (or float evaluation via complex)."""
        if isinstance(x, (float, complex)):
            import mpmath
            return complex(self.eval_mp(mpmath.mpmathify(x)))
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        if isinstance(acc, GaussRat) and acc.im == 0:
            return acc.re
        return acc

    def eval_mp(self, z):
        """Evaluate at an mpmath number using the current working precision."""
        import mpmath
        acc = mpmath.mpf(0)
        if self.im is None:
            for c in reversed(self.re):
                acc = acc * z + c
        else:
            for a, b in zip(reversed(self.re), reversed(self.im)):
                acc = acc * z + mpmath.mpc(a, b)
        return acc / self.den

    # -- structure -------------------------------------------------------
    def content_free(self):
        """Primitive integer polynomial with positive leading coefficient (rational case)."""
        if self.is_zero():
            return self
        if self.im is not None:
            return RatPoly(self.re, self.im, 1)
        g = 0
        for c in self.re:
            g = gcd(g, c)
        sign = -1 if self.re[-1] < 0 else 1
        return RatPoly([sign * c // g for c in self.re], None, 1)

    def derivative(self):
        if self.degree <= 0:
            return RatPoly([])
        re = [i * c for i, c in enumerate(self.re)][1:]
        im = None if self.im is None else [i * c for i, c in enumerate(self.im)][1:]
        return RatPoly(re, im, self.den)

    def reversed_coeffs(self, formal_degree: int) -> list:
        """Coefficients of the homogenization of formal degree ``formal_degree``,
        highest power of ``t1`` first."""
        if formal_degree < self.degree:
            raise ValueError("formal degree below actual degree")
        cs = self.coeffs + [Fraction(0)] * (formal_degree - self.degree)
        return list(reversed(cs))

    def __repr__(self):
        if self.degree > 6:
            return f"RatPoly(degree={self.degree}, bits={self.max_coeff_bits()})"
        return f"RatPoly({[str(c) for c in self.coeffs]})"


def _gr(a, b, den):
    if b == 0:
        return Fraction(a, den)
    return GaussRat(Fraction(a, den), Fraction(b, den))


T = RatPoly([0, 1])

"""Exact scalars: rationals (``fractions.Fraction``) and Gaussian rationals."""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Rational


class GaussRat:
    """Exact complex number ``re + im*i`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _coerce(x):
        if isinstance(x, GaussRat):
            return x
        if isinstance(x, (int, Fraction, Rational)):
            return GaussRat(x, 0)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return GaussRat(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return GaussRat(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return GaussRat(self.re * o.re - self.im * o.im,
                        self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("GaussRat division by zero")
        return GaussRat((self.re * o.re + self.im * o.im) / n,
                        (self.im * o.re - self.re * o.im) / n)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return GaussRat(1) / (self ** (-k))
        result, base = GaussRat(1), self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, complex):
            return complex(self) == other
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return abs(complex(self))

    def conjugate(self):
        return GaussRat(self.re, -self.im)

    def norm(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __repr__(self):
        return f"GaussRat({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        sign = "+" if self.im >= 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"


def simplify(x):
    """Collapse a real GaussRat to a Fraction."""
    if isinstance(x, GaussRat) and x.im == 0:
        return x.re
    return x


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, GaussRat))


def to_complex(x) -> complex:
    return complex(x)


_RAT = r"[+-]?\d+(?:/\d+)?"
_GAUSS_RE = re.compile(rf"^\s*(?P<re>{_RAT})?\s*(?:(?P<im>[+-]\s*(?:\d+(?:/\d+)?)?)i)?\s*$")


def parse_scalar(text: str):
    """Parse a command-line scalar.

    Integers and ``p/q`` strings (optionally with a Gaussian ``+ r/s i`` part)
    give exact scalars.  Anything containing a decimal point or exponent is
    parsed as a Python complex number and routed to floating paths only.
    """
    s = text.strip().replace(" ", "")
    if not s:
        raise ValueError("empty scalar")
    if re.fullmatch(_RAT, s):
        return Fraction(s)
    if re.fullmatch(r"[+-]?(?:\d+(?:/\d+)?)?i", s):
        body = s[:-1]
        if body in ("", "+"):
            return GaussRat(0, 1)
        if body == "-":
            return GaussRat(0, -1)
        return GaussRat(0, Fraction(body))
    m = _GAUSS_RE.match(s)
    if m and m.group("re") is not None and m.group("im") is not None:
        im = m.group("im")
        if im in ("+", "-"):
            im += "1"
        return simplify(GaussRat(Fraction(m.group("re")), Fraction(im)))
    z = complex(s.replace("i", "j"))
    return z.real if z.imag == 0 else z


def format_scalar(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, GaussRat):
        return str(x)
    if isinstance(x, complex):
        if x.imag == 0:
            return repr(x.real)
        return repr(x).strip("()").replace("j", "i")
    return repr(x)

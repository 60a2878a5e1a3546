"""p-adic valuations of rationals and a small fixed-precision p-adic number type."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import PrecisionExhausted


def ord_p(x, p: int) -> int:
    """p-adic valuation of a nonzero rational."""
    x = Fraction(x)
    if x == 0:
        raise ValueError("valuation of 0 is infinite")
    v = 0
    n, d = x.numerator, x.denominator
    while n % p == 0:
        n //= p
        v += 1
    while d % p == 0:
        d //= p
        v -= 1
    return v


@dataclass(frozen=True)
class PAdic:
    """p^val * (unit + O(p^rel)) with unit a p-adic unit reduced mod p^rel.

    ``rel = None`` marks an exact zero.  Precision is tracked relatively, so
    multiplication costs nothing and cancellation in sums is detected.
    """

    p: int
    val: int
    unit: int
    rel: int | None

    @classmethod
    def from_rational(cls, x, p: int, prec: int) -> "PAdic":
        x = Fraction(x)
        if x == 0:
            return cls(p, 0, 0, None)
        v = ord_p(x, p)
        n = x.numerator // p ** max(v, 0)
        d = x.denominator // p ** max(-v, 0)
        mod = p ** prec
        return cls(p, v, n * pow(d, -1, mod) % mod, prec)

    @property
    def is_zero(self) -> bool:
        return self.rel is None

    def __mul__(self, other: "PAdic") -> "PAdic":
        if self.is_zero or other.is_zero:
            return PAdic(self.p, 0, 0, None)
        r = min(self.rel, other.rel)
        return PAdic(self.p, self.val + other.val, self.unit * other.unit % self.p ** r, r)

    def __add__(self, other: "PAdic") -> "PAdic":
        return psum([self, other])

    def shift(self, k: int) -> "PAdic":
        """Multiply by p^k."""
        if self.is_zero:
            return self
        return PAdic(self.p, self.val + k, self.unit, self.rel)


def psum(terms) -> PAdic:
    """Sum of p-adic numbers in one pass, so intermediate cancellation costs nothing.

    Raises PrecisionExhausted when the total is zero to the available precision.
    """
    live = [x for x in terms if not x.is_zero]
    if not live:
        return terms[0]
    if len(live) == 1:
        return live[0]
    p = live[0].p
    v = min(x.val for x in live)
    width = min(x.val + x.rel for x in live) - v
    mod = p ** width
    s = sum(x.unit * p ** (x.val - v) for x in live) % mod
    if s == 0:
        raise PrecisionExhausted(f"cancellation consumed all {width} digits at p={p}")
    k = 0
    while s % p == 0:
        s //= p
        k += 1
    return PAdic(p, v + k, s, width - k)

"""Partial sums S_j = 1 + lam + ... + lam^j and certified bounds on log|S_j|.

Shared by the gamma series and the capacity product, both of which weight
log|S_j| geometrically and need an explicit tail once the sum is truncated.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .errors import GammaDivergence
from .exact.scalars import GaussRat, is_exact

UNIT_EPS = 1e-14


def partial_sum_exact(lam, j: int):
    """S_j(lam) computed exactly (j >= 0)."""
    acc = Fraction(0) if not isinstance(lam, GaussRat) else GaussRat(0)
    p = Fraction(1)
    for _ in range(j + 1):
        acc = acc + p
        p = p * lam
    return acc


def _log_abs_exact(x) -> float:
    if isinstance(x, GaussRat):
        n = x.norm()
        return 0.5 * (math.log(n.numerator) - math.log(n.denominator))
    x = Fraction(x)
    return math.log(abs(x.numerator)) - math.log(x.denominator)


def log_abs(x) -> float:
    """log|x| for exact or floating scalars, safe for huge integers."""
    if is_exact(x):
        if x == 0:
            return -math.inf
        return _log_abs_exact(x)
    a = abs(complex(x))
    return math.log(a) if a > 0 else -math.inf


def log_abs_partial_sum(lam, j: int) -> float:
    """log|S_j(lam)| evaluated without overflow for large j."""
    if is_exact(lam) and j <= 200:
        return log_abs(partial_sum_exact(lam, j))
    z = complex(lam)
    r = abs(z)
    if z == 1:
        return math.log(j + 1)
    if r > 1:
        w = z ** -(j + 1) if (j + 1) * math.log(r) < 700 else 0j
        return (j + 1) * math.log(r) - math.log(abs(z - 1)) + math.log(abs(1 - w))
    return math.log(abs(1 - z ** (j + 1))) - math.log(abs(1 - z))


def is_unit_modulus(lam) -> bool:
    if isinstance(lam, GaussRat):
        return lam.norm() == 1
    if isinstance(lam, (int, Fraction)):
        return abs(lam) == 1
    return abs(abs(complex(lam)) - 1.0) <= UNIT_EPS


def is_one(lam) -> bool:
    if is_exact(lam):
        return lam == 1
    return complex(lam) == 1


def log_sum_bound(lam) -> tuple[float, float]:
    """Constants (a, b) with |log|S_j(lam)|| <= a*j + b for every j >= 1.

    Raises GammaDivergence on the unit circle away from lam = 1, where the
    partial sums return arbitrarily close to 0 and no such bound exists.
    """
    if is_one(lam):
        return math.log(2.0), 0.0  # log(j+1) <= j log 2
    if is_unit_modulus(lam):
        raise GammaDivergence(f"|lambda| = 1 and lambda != 1 (lambda={lam})")
    z = complex(lam)
    r = abs(z)
    if r > 1:
        a = math.log(r)
        b = math.log(r) + abs(math.log(abs(z - 1))) - math.log1p(-r ** -2)
        return a, b
    return 0.0, math.log((1 + r) / (1 - r))


def linear_tail(a: float, b: float, x: float, N: int) -> float:
    """sum_{j > N} x^j (a j + b) for 0 < x < 1."""
    xn = x ** (N + 1)
    return a * xn * ((N + 1) - N * x) / (1 - x) ** 2 + b * xn / (1 - x)

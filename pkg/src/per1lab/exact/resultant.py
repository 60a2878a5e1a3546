"""Resultants of binary forms.

``sylvester_resultant`` builds the Sylvester matrix of two homogenized
polynomials and takes its determinant by fraction-free (Bareiss) elimination.
``resultant_mod_p`` is a fast Euclidean resultant over F_p used to spot-check
resultants whose Sylvester matrices are far too large for exact elimination.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm

import numpy as np

from .poly import RatPoly
from .scalars import GaussRat, simplify


def sylvester_matrix(a: list, b: list) -> list[list]:
    """Sylvester matrix of forms with coefficient lists ``a``, ``b`` (highest power first).

    The rows of ``a`` come first; formal degrees are ``len(a)-1`` and ``len(b)-1``.
    """
    m, e = len(a) - 1, len(b) - 1
    size = m + e
    rows = []
    for i in range(e):
        rows.append([0] * i + list(a) + [0] * (size - m - 1 - i))
    for i in range(m):
        rows.append([0] * i + list(b) + [0] * (size - e - 1 - i))
    return rows


def bareiss_det(mat: list[list[int]]) -> int:
    """Determinant of an integer matrix by Bareiss fraction-free elimination."""
    n = len(mat)
    if n == 0:
        return 1
    M = [list(r) for r in mat]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for r in range(k + 1, n):
                if M[r][k] != 0:
                    M[k], M[r] = M[r], M[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = M[k][k]
        rowk = M[k]
        for i in range(k + 1, n):
            rowi = M[i]
            f = rowi[k]
            for j in range(k + 1, n):
                rowi[j] = (rowi[j] * pivot - f * rowk[j]) // prev
            rowi[k] = 0
        prev = pivot
    return sign * M[n - 1][n - 1]


def _field_det(mat):
    # plain elimination over Q(i); only used for small Gaussian inputs
    n = len(mat)
    M = [list(r) for r in mat]
    det = GaussRat(1)
    for k in range(n):
        piv = next((r for r in range(k, n) if M[r][k] != 0), None)
        if piv is None:
            return GaussRat(0)
        if piv != k:
            M[k], M[piv] = M[piv], M[k]
            det = -det
        det = det * M[k][k]
        inv = GaussRat(1) / M[k][k]
        for i in range(k + 1, n):
            f = M[i][k] * inv
            if f != 0:
                for j in range(k, n):
                    M[i][j] = M[i][j] - f * M[k][j]
    return det


def form_resultant(a: list, b: list):
    """Exact resultant of binary forms given by coefficient lists, highest power first."""
    if len(a) <= 1 and len(b) <= 1:
        return Fraction(1)
    if any(isinstance(c, GaussRat) for c in a + b):
        mat = sylvester_matrix([GaussRat(c) if not isinstance(c, GaussRat) else c for c in a],
                               [GaussRat(c) if not isinstance(c, GaussRat) else c for c in b])
        return simplify(_field_det(mat))
    a = [Fraction(c) for c in a]
    b = [Fraction(c) for c in b]
    da = lcm(*(c.denominator for c in a))
    db = lcm(*(c.denominator for c in b))
    ai = [int(c * da) for c in a]
    bi = [int(c * db) for c in b]
    m, e = len(a) - 1, len(b) - 1
    det = bareiss_det(sylvester_matrix(ai, bi))
    # Res(da*A, db*B) = da^e db^m Res(A, B)
    return Fraction(det, da ** e * db ** m)


def sylvester_resultant(P: RatPoly, Q: RatPoly, deg_p: int | None = None,
                        deg_q: int | None = None):
    """Exact resultant of the homogenizations of ``P`` and ``Q``.

    Formal degrees default to ``max(deg P, deg Q)`` for both forms, which is
    the right convention for a homogeneous map ``(P, Q)``.  The result is zero
    exactly when the two forms share a projective root.
    """
    if P.is_zero() and Q.is_zero():
        raise ValueError("both polynomials are zero")
    d = max(P.degree, Q.degree, 0)
    deg_p = d if deg_p is None else deg_p
    deg_q = d if deg_q is None else deg_q
    return form_resultant(P.reversed_coeffs(deg_p), Q.reversed_coeffs(deg_q))


# -- modular resultant --------------------------------------------------------

def _poly_mod(P: RatPoly, p: int) -> np.ndarray:
    if P.is_gaussian:
        raise ValueError("modular resultant needs rational coefficients")
    inv = pow(P.den % p, -1, p)
    return np.array([(c % p) * inv % p for c in P.re], dtype=np.int64)


def _trim_mod(a):
    nz = np.nonzero(a)[0]
    return a[: nz[-1] + 1] if len(nz) else a[:0]


def _res_mod(a: np.ndarray, b: np.ndarray, p: int) -> int:
    """Resultant over F_p of polynomials given low-to-high with nonzero leading terms."""
    res = 1
    while True:
        m, n = len(a) - 1, len(b) - 1
        if n == 0:
            return res * pow(int(b[0]), m, p) % p
        if m < n:
            if (m * n) & 1:
                res = -res % p
            a, b = b, a
            continue
        # reduce a modulo b
        r = a.copy()
        inv = pow(int(b[-1]), -1, p)
        for k in range(m - n, -1, -1):
            q = int(r[k + n]) * inv % p
            if q:
                r[k:k + n + 1] = (r[k:k + n + 1] - q * b) % p
        r = _trim_mod(r[:n])
        if len(r) == 0:
            return 0
        # Res(a, b) = (-1)^{mn} lc(b)^{m - deg r} Res(b, r)
        res = res * pow(int(b[-1]), m - (len(r) - 1), p) % p
        if (m * n) & 1:
            res = -res % p
        a, b = b, r


def resultant_mod_p(P: RatPoly, Q: RatPoly, p: int, deg_p: int | None = None,
                    deg_q: int | None = None) -> int:
    """Resultant of the homogenized forms reduced modulo a prime ``p < 2**31``.

    Denominators must be prime to ``p``.  Leading coefficients that vanish mod
    ``p`` (formally or after reduction) are handled with the degree-drop rule
    ``Res_{m,e}(a, b) = (-1)^e b_e Res_{m-1,e}(a, b)`` when ``a_m = 0``.
    """
    d = max(P.degree, Q.degree, 0)
    m = d if deg_p is None else deg_p
    e = d if deg_q is None else deg_q
    a = _poly_mod(P, p)
    b = _poly_mod(Q, p)
    a = np.concatenate([a, np.zeros(max(0, m + 1 - len(a)), dtype=np.int64)])[: m + 1]
    b = np.concatenate([b, np.zeros(max(0, e + 1 - len(b)), dtype=np.int64)])[: e + 1]
    factor = 1
    # formal leading zeros of a: Res_{m,e}(a,b) = (-1)^e b_e Res_{m-1,e}(a,b)
    while m > 0 and e > 0 and a[m] == 0:
        factor = factor * (-1) ** e * int(b[e]) % p
        m -= 1
    # formal leading zeros of b: Res_{m,e}(a,b) = a_m Res_{m,e-1}(a,b)
    while e > 0 and m > 0 and b[e] == 0:
        factor = factor * int(a[m]) % p
        e -= 1
    a = a[: m + 1]
    b = b[: e + 1]
    if m == 0 and e == 0:
        return factor % p
    if m == 0:
        return factor * pow(int(a[0]), e, p) % p
    if e == 0:
        return factor * pow(int(b[0]), m, p) % p
    return factor * _res_mod(a, b, p) % p


def scalar_mod_p(x, p: int) -> int:
    """Reduce a rational with denominator prime to ``p``."""
    x = Fraction(x)
    return x.numerator % p * pow(x.denominator % p, -1, p) % p

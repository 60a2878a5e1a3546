"""Exact parameter polynomials of the critical orbit and the quantities built from them.

With t = t1/t2 and F_t(z1, z2) = (lam z1 z2, z1^2 + t z1 z2 + z2^2), the n-th
iterate of the critical point (sign, 1) is (P_n(t), Q_n(t)).  Homogenizing at
formal degree d = 2^(n-1) gives the homogeneous map F_n whose resultant and
coefficient growth control the capacity and the gamma constant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import BudgetExceeded
from ..series import linear_tail, log_abs, log_abs_partial_sum, log_sum_bound
from .poly import RatPoly
from .resultant import resultant_mod_p, scalar_mod_p
from .scalars import GaussRat, is_exact, simplify

log = logging.getLogger(__name__)

N_MAX = 14


def _check_exact(lam):
    if not is_exact(lam):
        raise TypeError(f"exact scalar required, got {type(lam).__name__}")
    if lam == 0:
        raise ValueError("lambda must be nonzero")


def iterate_param_polys(lam, n: int, sign: int = 1, n_max: int = N_MAX) -> list[tuple[RatPoly, RatPoly]]:
    """All pairs (P_k, Q_k) for k = 0..n, starting from (sign, 1)."""
    _check_exact(lam)
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > n_max:
        raise BudgetExceeded(f"n={n} exceeds n_max={n_max}")
    P, Q = RatPoly.constant(sign), RatPoly.constant(1)
    out = [(P, Q)]
    for k in range(1, n + 1):
        PQ = P * Q
        P, Q = PQ.scale(lam), P.square() + Q.square() + PQ.shift(1)
        out.append((P, Q))
        log.debug("iterate %d: deg=%d bits=%d", k, Q.degree, Q.max_coeff_bits())
    return out


def iterate_param_poly(lam, n: int, sign: int = 1, n_max: int = N_MAX) -> tuple[RatPoly, RatPoly]:
    """(P_n, Q_n) with F_t^n(sign, 1) = (P_n(t), Q_n(t)) as exact polynomials in t."""
    return iterate_param_polys(lam, n, sign, n_max)[-1]


def partial_sums(lam, n: int) -> list:
    """[S_0, ..., S_n] exactly."""
    out, acc, p = [], 0, 1
    for _ in range(n + 1):
        acc = acc + p
        out.append(simplify(acc) if isinstance(acc, GaussRat) else Fraction(acc))
        p = p * lam
    return out


# -- coefficient sequences -----------------------------------------------------

@dataclass(frozen=True)
class CoeffSeq:
    """Coefficient sequences indexed from 1 (index 0 holds None).

    F_n(1, s) = (s B_n + s^2 A_n + O(s^3), C_n + s D_n + O(s^2)).
    """

    lam: object
    n: int
    B: list = field(repr=False)
    C: list = field(repr=False)
    A: list = field(repr=False)
    D: list = field(repr=False)
    Astar: list = field(repr=False)
    Dstar: list = field(repr=False)


def coeff_sequences(lam, n: int, verify: bool = True) -> CoeffSeq:
    """Run the coefficient recursions up to index n.

    With ``verify`` the closed forms for B_n and C_n (n >= 3) are checked
    against the recursion, and an AssertionError is raised on mismatch.
    """
    _check_exact(lam)
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = Fraction(lam) if not isinstance(lam, GaussRat) else lam
    S = partial_sums(lam, n + 1)
    B, C, A, D = [None, lam], [None, Fraction(1)], [None, Fraction(0)], [None, Fraction(2)]
    As, Ds = [None, Fraction(0)], [None, Fraction(2)]
    for k in range(1, n):
        b, c, a, d = B[k], C[k], A[k], D[k]
        B.append(simplify(lam * b * c))
        C.append(simplify(c * (b + c)))
        A.append(simplify(lam * (b * d + c * a)))
        D.append(simplify(c * (2 * d + a) + d * b))
        # S_{k-1} = 1 + ... + lam^{k-1};  lam + ... + lam^k = lam * S_{k-1}
        As.append(simplify(lam ** (k + 1) * Ds[k] + lam * S[k - 1] * As[k]))
        Ds.append(simplify((2 * S[k - 1] + lam ** k) * Ds[k] + S[k - 1] * As[k]))
    if verify:
        for k in range(3, n + 1):
            bk = lam ** k
            for j in range(1, k - 1):
                bk = bk * S[j] ** (2 ** (k - 2 - j))
            assert simplify(bk) == B[k], f"B_{k} closed form mismatch"
            assert simplify(bk * S[k - 1] / lam ** k) == C[k], f"C_{k} closed form mismatch"
    return CoeffSeq(lam, n, B, C, A, D, As, Ds)


def star_prefactor(lam, n: int):
    """prod_{j=1}^{n-3} S_j^(2^(n-2-j) - 1), the factor with A_n = factor * A*_n and D_n = factor * D*_n."""
    S = partial_sums(lam, n)
    out = Fraction(1)
    for j in range(1, n - 2):
        out = out * S[j] ** (2 ** (n - 2 - j) - 1)
    return simplify(out)


def log_abs_C(lam, n: int) -> float:
    """log|C_n(lam)| from the factored closed form; usable for large n."""
    if n == 1:
        return 0.0
    if n == 2:
        return log_abs_partial_sum(lam, 1)
    total = log_abs_partial_sum(lam, n - 1)
    for j in range(1, n - 1):
        total += 2 ** (n - 2 - j) * log_abs_partial_sum(lam, j)
    return total


# -- resultants ----------------------------------------------------------------

def resultant_exponents(n: int) -> tuple[int, dict[int, int]]:
    """Res(F_n) = lam^e * prod_j S_j^{k_j}; returns (e, {j: k_j})."""
    if n == 1:
        return 1, {}  # with the sign -1 handled separately
    if n == 2:
        return 6, {1: 1}
    exps = {j: 3 * 4 ** (n - 2 - j) for j in range(1, n - 1)}
    exps[n - 1] = exps.get(n - 1, 0) + 1
    return 2 * 4 ** (n - 1) - 2 ** (n - 1), exps


def resultant_recursive(lam, n: int, check: bool = True):
    """Exact Res(F_n).

    n = 1 gives -lam and n = 2 gives lam^6 (1 + lam); larger n use the closed
    product form.  With ``check`` the one-step recursion
    Res(F_{n+1}) = (S_n / S_{n-1}) lam^(2^n) Res(F_n)^4 is verified along the way.
    """
    _check_exact(lam)
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = Fraction(lam) if not isinstance(lam, GaussRat) else lam
    S = partial_sums(lam, n)

    def closed(k):
        if k == 1:
            return -lam
        e, exps = resultant_exponents(k)
        out = lam ** e
        for j, kj in exps.items():
            out = out * S[j] ** kj
        return simplify(out)

    value = closed(n)
    if check:
        prev = -lam
        for k in range(1, n):
            nxt = simplify(S[k] / S[k - 1] * lam ** (2 ** k) * prev ** 4)
            if k + 1 >= 2 and k + 1 <= min(n, 6):
                assert nxt == closed(k + 1), f"resultant recursion mismatch at n={k + 1}"
            prev = nxt
            if k + 1 == n:
                assert prev == value
    return value


def log_abs_resultant(lam, n: int) -> float:
    """log|Res(F_n)| from the factored form, valid for complex lam."""
    if n == 1:
        return log_abs(lam)
    e, exps = resultant_exponents(n)
    total = e * log_abs(lam)
    for j, kj in exps.items():
        total += kj * log_abs_partial_sum(lam, j)
    return total


def resultant_mod_check(lam, n: int, primes=(2147483629, 2147483587, 2147483579),
                        polys=None) -> dict[int, bool]:
    """Compare the Sylvester resultant of the actual (P_n, Q_n) with the closed form modulo primes.

    Primes dividing a denominator of lam are skipped.  This certifies the
    closed form at sizes where exact Sylvester elimination is out of reach.
    """
    _check_exact(lam)
    if isinstance(lam, GaussRat):
        raise TypeError("modular check supports rational lambda only")
    lam = Fraction(lam)
    P, Q = polys if polys is not None else iterate_param_poly(lam, n)
    d = 2 ** (n - 1)
    out = {}
    for p in primes:
        if lam.denominator % p == 0 or lam.numerator % p == 0 or P.den % p == 0 or Q.den % p == 0:
            continue
        lm = scalar_mod_p(lam, p)
        if n == 1:
            expect = -lm % p
        else:
            e, exps = resultant_exponents(n)
            expect = pow(lm, e, p)
            for j, kj in exps.items():
                sj = sum(pow(lm, i, p) for i in range(j + 1)) % p
                expect = expect * pow(sj, kj, p) % p
        out[p] = resultant_mod_p(P, Q, p, d, d) == expect
    return out


# -- capacity --------------------------------------------------------------------

@dataclass(frozen=True)
class CapacityResult:
    value: float
    log_value: float
    mode: str
    terms: int
    tail_bound: float


def log_capacity_closed(lam, tol: float = 1e-13) -> CapacityResult:
    """log Cap = -2 log|lam| - sum_j 3 * 4^(-j-1) log|S_j| with a certified tail."""
    a, b = log_sum_bound(lam)
    N = 1
    while 0.75 * linear_tail(a, b, 0.25, N) > tol:
        N += 1
    total = -2 * log_abs(lam)
    for j in range(1, N + 1):
        total -= 3 * 4.0 ** (-j - 1) * log_abs_partial_sum(lam, j)
    tail = 0.75 * linear_tail(a, b, 0.25, N)
    return CapacityResult(math.exp(total), total, "closed-form", N, tail)


def log_capacity_resultant(lam, n: int, n_max: int = N_MAX) -> CapacityResult:
    """log |Res(F_n)|^(-1/d^2), d = 2^(n-1)."""
    if n > n_max:
        raise BudgetExceeded(f"n={n} exceeds n_max={n_max}")
    d = 2 ** (n - 1)
    lv = -log_abs_resultant(lam, n) / d ** 2
    return CapacityResult(math.exp(lv), lv, "resultant-limit", n, math.nan)


def capacity(lam, mode: str = "closed-form", n: int | None = None, tol: float = 1e-13,
             n_max: int = N_MAX) -> float:
    """Homogeneous capacity of the filled set of the critical escape rate (either sign)."""
    if mode == "closed-form":
        return log_capacity_closed(lam, tol).value
    if mode == "resultant-limit":
        if n is None:
            raise ValueError("resultant-limit mode needs n")
        return log_capacity_resultant(lam, n, n_max).value
    raise ValueError(f"unknown mode {mode!r}")

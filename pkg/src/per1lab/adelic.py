"""Places of Q, local gamma constants and capacities, local and canonical heights.

lambda and the parameters are rationals throughout.  At a prime p the escape
rate of the critical orbit is the average of -ord_p of the renormalized
iterate, computed with fixed-precision p-adic arithmetic.  The only primes
that can carry a nonzero local height are those dividing the numerator or
denominator of lambda or the denominator of t: everywhere else |lambda|_p = 1
and |t|_p <= 1, so F_t preserves the unit polydisk norm exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import sympy

from .core import (INF, MapParams, ProjPair, SeriesResult, _sign, escape_rate,
                   gamma_arch_result, green_homogeneous)
from .errors import CoincidentPoints, PrecisionExhausted, RootOfUnity
from .exact.family import log_capacity_closed
from .padic import PAdic, ord_p, psum
from .pcf import Preperiodic, is_preperiodic
from .series import linear_tail, log_abs


@dataclass(frozen=True)
class Place:
    """The archimedean place (p=None) or the p-adic place of Q."""

    p: int | None = None
    N_v: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.p is not None and not sympy.isprime(self.p):
            raise ValueError(f"{self.p} is not prime")

    @classmethod
    def arch(cls) -> "Place":
        return cls(None)

    @classmethod
    def prime(cls, p: int) -> "Place":
        return cls(int(p))

    @classmethod
    def parse(cls, text: str) -> "Place":
        s = text.strip().lower()
        if s in ("inf", "infinity", "arch", "oo"):
            return cls.arch()
        return cls.prime(int(s))

    @property
    def is_archimedean(self) -> bool:
        return self.p is None

    @property
    def sort_key(self) -> int:
        return 0 if self.p is None else self.p

    def __str__(self):
        return "inf" if self.p is None else str(self.p)


ARCH = Place.arch()


def _rat(x) -> Fraction:
    if isinstance(x, float):
        raise TypeError("exact rational required")
    return Fraction(x)


def abs_at(x, v: Place) -> Fraction:
    """Normalized absolute value |x|_v, exactly."""
    x = _rat(x)
    if v.is_archimedean:
        return abs(x)
    if x == 0:
        return Fraction(0)
    k = ord_p(x, v.p)
    return Fraction(1, v.p ** k) if k >= 0 else Fraction(v.p ** (-k))


def log_abs_at(x, v: Place) -> float:
    x = _rat(x)
    if x == 0:
        return -math.inf
    if v.is_archimedean:
        return log_abs(x)
    return -ord_p(x, v.p) * math.log(v.p)


def support_primes(x) -> list[int]:
    """Primes dividing the numerator or denominator of a nonzero rational."""
    x = _rat(x)
    ps = set(sympy.factorint(abs(x.numerator))) | set(sympy.factorint(x.denominator))
    return sorted(ps)


def _check_lambda(lam):
    lam = _rat(lam)
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    if lam == -1:
        raise RootOfUnity("lambda = -1 is a root of unity")
    return lam


# -- gamma_v and capacities ------------------------------------------------------

def _unit_branch_bound(lam: Fraction) -> float:
    """Slope a with -log|S_i|_p <= a*i for every i >= 1 at primes with |lam|_p = 1.

    S_i * den^i is a nonzero integer of size <= (i+1) M^i, M = max(|num|, den),
    so its p-part is at most that large; log(i+1) <= i log 2.
    """
    M = max(abs(lam.numerator), lam.denominator)
    return math.log(2) + math.log(M)


def gamma_v_result(lam, v: Place, tol: float = 1e-13) -> SeriesResult:
    """gamma_v(lam) = 1/2 sum_i 2^-i log|S_i(lam)|_v with a certified tail."""
    lam = _check_lambda(lam)
    if v.is_archimedean:
        return gamma_arch_result(lam, tol)
    p = v.p
    k = ord_p(lam, p)
    if k > 0:
        return SeriesResult(0.0, 0, 0.0)
    if k < 0:
        return SeriesResult(-k * math.log(p), 0, 0.0)
    a = _unit_branch_bound(lam)
    N = 1
    while 0.5 * linear_tail(a, 0.0, 0.5, N) > tol:
        N += 1
    terms = []
    acc = Fraction(0)
    pw = Fraction(1)
    for i in range(N + 1):
        acc += pw
        pw *= lam
        if i >= 1:
            terms.append(-0.5 ** (i + 1) * ord_p(acc, p) * math.log(p))
    return SeriesResult(math.fsum(terms), N, 0.5 * linear_tail(a, 0.0, 0.5, N))


def gamma_v(lam, v: Place, tol: float = 1e-13) -> float:
    return gamma_v_result(lam, v, tol).value


def log_capacity_v(lam, v: Place, tol: float = 1e-13) -> SeriesResult:
    """log Cap(K_v) = -2 log|lam|_v - sum_j 3 * 4^(-j-1) log|S_j|_v."""
    lam = _check_lambda(lam)
    if v.is_archimedean:
        r = log_capacity_closed(lam, tol)
        return SeriesResult(r.log_value, r.terms, r.tail_bound)
    p = v.p
    k = ord_p(lam, p)
    lp = math.log(p)
    if k > 0:
        return SeriesResult(2 * k * lp, 0, 0.0)
    if k < 0:
        # |S_j|_p = |lam|_p^j and sum_j 3 j 4^(-j-1) = 1/3
        return SeriesResult(2 * k * lp + k * lp / 3, 0, 0.0)
    a = _unit_branch_bound(lam)
    N = 1
    while 0.75 * linear_tail(a, 0.0, 0.25, N) > tol:
        N += 1
    terms = []
    acc, pw = Fraction(0), Fraction(1)
    for j in range(N + 1):
        acc += pw
        pw *= lam
        if j >= 1:
            terms.append(3 * 4.0 ** (-j - 1) * ord_p(acc, p) * lp)
    return SeriesResult(math.fsum(terms), N, 0.75 * linear_tail(a, 0.0, 0.25, N))


# -- place classes ----------------------------------------------------------------

@dataclass(frozen=True)
class PlaceClass:
    """M_n (least n with |S_n|_p < 1), M0 (none found up to ``searched_to``) or exceptional."""

    kind: str
    n: int | None = None
    searched_to: int | None = None

    def __str__(self):
        if self.kind == "Mn":
            return f"M{self.n}"
        return self.kind


def classify_place(lam, p: int, n_max: int | None = None) -> PlaceClass:
    """Class of the prime p for lam.

    For rational lam with |lam|_p = 1 a witness always exists with n <= p - 1
    (n + 1 is the multiplicative order of lam mod p, or p when lam = 1 mod p),
    so the search is done in F_p and the M0 class never occurs without a bound.
    """
    lam = _rat(lam)
    if not sympy.isprime(p):
        raise ValueError(f"{p} is not prime")
    if ord_p(lam, p) != 0:
        return PlaceClass("exceptional")
    limit = p if n_max is None else n_max
    lm = lam.numerator % p * pow(lam.denominator % p, -1, p) % p
    s, pw = 1, 1
    for n in range(1, limit + 1):
        pw = pw * lm % p
        s = (s + pw) % p
        if s == 0:
            return PlaceClass("Mn", n)
    return PlaceClass("M0", None, limit)


def count_class_primes(lam, n: int, prime_bound: int) -> int:
    """Number of primes p <= prime_bound lying in M_n."""
    return sum(1 for p in sympy.primerange(2, prime_bound + 1)
               if (c := classify_place(lam, p, n)).kind == "Mn" and c.n == n)


# -- global sums -------------------------------------------------------------------

@dataclass
class GlobalSum:
    total: float
    tail_bound: float
    truncation: int
    per_place: dict = field(default_factory=dict)
    term_residuals: list = field(default_factory=list)


def _global_series(lam, truncation: int, weight, base: dict[Place, float]) -> tuple[GlobalSum, float]:
    """sum_v [base_v + sum_{j<=N} weight(j) log|S_j|_v], place by place.

    Each inner sum over places vanishes by the product formula; the residual
    per term index is recorded.  Factoring S_j supplies every place involved.
    """
    lam = _check_lambda(lam)
    per = dict(base)
    residuals = []
    acc, pw = Fraction(0), Fraction(1)
    for j in range(truncation + 1):
        acc += pw
        pw *= lam
        if j == 0:
            continue
        w = weight(j)
        logs = {ARCH: log_abs(acc)}
        for p, e in sympy.factorint(abs(acc.numerator)).items():
            logs[Place.prime(p)] = -e * math.log(p)
        for p, e in sympy.factorint(acc.denominator).items():
            logs[Place.prime(p)] = logs.get(Place.prime(p), 0.0) + e * math.log(p)
        residuals.append(math.fsum(logs.values()))
        for v, lv in logs.items():
            per[v] = per.get(v, 0.0) + w * lv
    # sum_v |log|S_j|_v| <= 2 log(j+1) + 3 j log M, M = max(|num|, den)
    M = max(abs(lam.numerator), lam.denominator)
    a = 2 * math.log(2) + 3 * math.log(M)
    return GlobalSum(math.fsum(per.values()), 0.0, truncation,
                     dict(sorted(per.items(), key=lambda kv: kv[0].sort_key)), residuals), a


def global_gamma_sum(lam, truncation: int = 60) -> GlobalSum:
    """sum_v gamma_v(lam) truncated at term index ``truncation``.

    The tail sum_{i>N} 1/2 2^-i sum_v |log|S_i|_v| is bounded through
    |S_i * den^i| <= (i+1) M^i, M = max(|num|, den), which caps both the
    archimedean and the non-archimedean parts of each term.
    """
    res, a = _global_series(lam, truncation, lambda j: 0.5 ** (j + 1), {})
    res.tail_bound = 0.5 * linear_tail(a, 0.0, 0.5, truncation)
    return res


def global_log_capacity_sum(lam, truncation: int = 60) -> GlobalSum:
    """sum_v log Cap(K_v), truncated at ``truncation`` terms of the product."""
    lam = _check_lambda(lam)
    base = {ARCH: -2 * log_abs(lam)}
    for p in support_primes(lam):
        base[Place.prime(p)] = 2 * ord_p(lam, p) * math.log(p)
    res, a = _global_series(lam, truncation, lambda j: -3 * 4.0 ** (-j - 1), base)
    res.tail_bound = 0.75 * linear_tail(a, 0.0, 0.25, truncation)
    return res


# -- local heights -------------------------------------------------------------------

@dataclass(frozen=True)
class LocalHeight:
    place: Place
    value: float
    certified_tail: float
    iterations: int = 0


def _padic_escape(lam: Fraction, t: Fraction, p: int, sign: int, tol: float, prec: int):
    lp = math.log(p)
    al = abs_at(lam, Place.prime(p))
    at = abs_at(t, Place.prime(p)) if t != 0 else Fraction(0)
    T = max(Fraction(1), at)
    hi = math.log(max(Fraction(1), al) * T)
    lo = -math.log(min(Fraction(1), al) / T)
    L = max(hi, lo)
    L_ = PAdic.from_rational(lam, p, prec)
    T_ = PAdic.from_rational(t, p, prec)
    z1 = PAdic.from_rational(sign, p, prec)
    z2 = PAdic.from_rational(1, p, prec)
    total = 0.0
    w = 1.0
    k = 0
    while True:
        k += 1
        m12 = z1 * z2
        n1 = L_ * m12
        n2 = psum([z1 * z1, T_ * m12, z2 * z2])
        vals = [x.val for x in (n1, n2) if not x.is_zero]
        m = min(vals)
        z1, z2 = n1.shift(-m), n2.shift(-m)
        w *= 0.5
        total += w * (-m) * lp
        if w * L <= tol:
            return total, w * L, k


def local_height(lam, t, v: Place, sign=1, tol: float = 1e-12, prec: int = 64,
                 max_prec: int = 4096) -> LocalHeight:
    """Local escape rate H^sign_v(t) of the critical orbit at the place v."""
    lam = _check_lambda(lam)
    t = _rat(t)
    s = _sign(sign)
    if v.is_archimedean:
        r = escape_rate(MapParams(lam, t), s, tol)
        return LocalHeight(v, r.value, r.tail_bound, r.iterations)
    p = v.p
    if ord_p(lam, p) == 0 and (t == 0 or ord_p(t, p) >= 0):
        return LocalHeight(v, 0.0, 0.0, 0)
    while True:
        try:
            value, tail, k = _padic_escape(lam, t, p, s, tol, prec)
            return LocalHeight(v, value, tail, k)
        except PrecisionExhausted:
            # exact cancellation never shows up at finite precision; it happens
            # when the orbit hits 0 or infinity, so try the finite-orbit route
            orbit = is_preperiodic(lam, t, sign=s)
            if isinstance(orbit, Preperiodic):
                return LocalHeight(v, _preperiodic_local_height(lam, t, p, s), 0.0, 0)
            prec *= 2
            if prec > max_prec:
                raise


def _preperiodic_local_height(lam: Fraction, t: Fraction, p: int, sign: int) -> float:
    """Exact local height at p along a finite critical orbit.

    With primitive lifts x_k of the orbit points, F(x_k) = s_k x_{k+1} and
    H_p = sum_k 2^-(k+1) log|s_k|_p.  The contents s_k repeat with the orbit,
    so the sum is a finite part plus a geometric series.
    """
    def primitive(a: Fraction, b: Fraction):
        den = math.lcm(a.denominator, b.denominator)
        a, b = int(a * den), int(b * den)
        g = math.gcd(a, b)
        a, b = a // g, b // g
        if a < 0 or (a == 0 and b < 0):
            a, b = -a, -b
        return (a, b)

    def val(x: Fraction):
        return math.inf if x == 0 else ord_p(x, p)

    x = (sign, 1)
    seen = {x: 0}
    ords = []
    while True:
        a, b = Fraction(x[0]), Fraction(x[1])
        n1, n2 = lam * a * b, a * a + t * a * b + b * b
        nxt = primitive(n1, n2)
        # s = n / primitive(n) componentwise, so ord_p(s) = min ord_p(n_i)
        ords.append(min(val(n1), val(n2)))
        if nxt in seen:
            start = seen[nxt]
            break
        seen[nxt] = len(ords)
        x = nxt
    lp = math.log(p)
    period = len(ords) - start
    head = math.fsum(-o * lp * 0.5 ** (k + 1) for k, o in enumerate(ords[:start]))
    cycle = math.fsum(-o * lp * 0.5 ** (k + 1) for k, o in enumerate(ords[start:], start))
    return head + cycle / (1 - 0.5 ** period)


def height_places(lam, t) -> list[Place]:
    """The archimedean place and every prime where the local height can be nonzero."""
    lam, t = _rat(lam), _rat(t)
    ps = set(support_primes(lam)) | set(sympy.factorint(t.denominator))
    return [ARCH] + [Place.prime(p) for p in sorted(ps)]


def local_heights(lam, t, sign=1, tol: float = 1e-12) -> list[LocalHeight]:
    return [local_height(lam, t, v, sign, tol) for v in height_places(lam, t)]


def canonical_height(lam, t, sign=1, tol: float = 1e-12, detect_preperiodic: bool = True) -> float:
    """Call-Silverman height of the critical point sign*1 for f_t, as a sum of local heights.

    When the orbit is found to be preperiodic by exact iteration the height is
    exactly 0 and no local sums are formed.
    """
    if detect_preperiodic and isinstance(is_preperiodic(_rat(lam), _rat(t), sign=sign), Preperiodic):
        return 0.0
    return math.fsum(h.value for h in local_heights(lam, t, sign, tol))


def canonical_height_tail(lam, t, sign=1, tol: float = 1e-12) -> tuple[float, float]:
    hs = local_heights(lam, t, sign, tol)
    return math.fsum(h.value for h in hs), math.fsum(h.certified_tail for h in hs)


def weil_height(x) -> float:
    """log max(|num|, den) of a rational; infinity has height 0."""
    if x is INF:
        return 0.0
    x = _rat(x)
    return math.log(max(abs(x.numerator), x.denominator))


def weil_height_sequence(lam, t, sign=1, n: int = 12) -> list[float]:
    """h(f_t^k(sign)) for k = 0..n, by exact iteration in lowest terms."""
    lam, t = _rat(lam), _rat(t)
    # homogeneous integer iteration keeps the pair coprime after dividing by the gcd
    a, b = _sign(sign), 1
    ln, ld = lam.numerator, lam.denominator
    tn, td = t.numerator, t.denominator
    out = [0.0]
    for _ in range(n):
        a, b = ln * td * a * b, ld * (td * a * a + tn * a * b + td * b * b)
        g = math.gcd(a, b)
        a, b = a // g, b // g
        out.append(math.log(max(abs(a), abs(b))))
    return out


# -- Arakelov-Green function and quasi-adelic heights -------------------------------

def _lift(x) -> ProjPair:
    if isinstance(x, ProjPair):
        return x
    if x is INF:
        return ProjPair(1.0, 0.0)
    return ProjPair(complex(x), 1.0)


def arakelov_green_arch(x, y, lam, sign=1, tol: float = 1e-12, log_cap: float | None = None) -> float:
    """g(x, y) = -log|x ^ y| + G(x) + G(y) + log Cap at the archimedean place."""
    X, Y = _lift(x), _lift(y)
    wedge = complex(X.z1) * complex(Y.z2) - complex(X.z2) * complex(Y.z1)
    if wedge == 0:
        raise CoincidentPoints("g is infinite on the diagonal")
    if log_cap is None:
        log_cap = log_capacity_closed(lam, tol).log_value
    return (-math.log(abs(wedge)) + green_homogeneous(lam, X, sign, tol)
            + green_homogeneous(lam, Y, sign, tol) + log_cap)


def quasi_adelic_height(S, lam, sign=1, tol: float = 1e-12) -> float:
    """(1/|S|) sum_{x in S} sum_v G_v(x, 1) for a finite set of rational parameters."""
    S = [_rat(x) for x in S]
    if not S:
        raise ValueError("S must be nonempty")
    # G_v(x, 1) = 2 H_v(x)
    return math.fsum(2 * canonical_height(lam, x, sign, tol) for x in S) / len(S)


def quasi_adelic_height_pairwise(S, lam, sign=1, tol: float = 1e-12, truncation: int = 60) -> float:
    """The same height from the pairwise Arakelov-Green energy summed over places.

    Needs |S| >= 2.  Places: infinity, primes carrying local heights, and primes
    dividing the pairwise differences; the capacity sum over all places enters
    through its truncated global value.
    """
    S = [_rat(x) for x in S]
    if len(S) < 2:
        raise ValueError("pairwise energy needs |S| >= 2")
    lam = _check_lambda(lam)
    places = set()
    for x in S:
        places.update(height_places(lam, x))
    for i, x in enumerate(S):
        for y in S[i + 1:]:
            places.update(Place.prime(p) for p in support_primes(x - y))
    G = {(v, x): 2 * local_height(lam, x, v, sign, tol).value for v in places for x in S}
    cap_sum = global_log_capacity_sum(lam, truncation).total
    total = 0.0
    n = len(S)
    for i, x in enumerate(S):
        for j, y in enumerate(S):
            if i == j:
                continue
            s = cap_sum
            for v in places:
                s += -log_abs_at(x - y, v) + G[(v, x)] + G[(v, y)]
            total += s
    return total / (2 * n * (n - 1))


def outer_radius_bound(lam, p: int, c: float | None = None) -> float | None:
    """exp(-2 gamma_p - log(c) / 2^(n-1)) for p in M_n, the outer radius bound of K_p."""
    cls = classify_place(lam, p)
    if cls.kind != "Mn":
        return None
    if c is None:
        c = sandwich_c_global(lam)
    return math.exp(-2 * gamma_v(lam, Place.prime(p)) - math.log(c) / 2 ** (cls.n - 1))


def sandwich_c_global(lam) -> float:
    """min(min_v |lam|_v / 2, 1/4) over all places of Q."""
    lam = _rat(lam)
    vals = [float(abs_at(lam, ARCH)) / 2]
    for p in support_primes(lam):
        vals.append(float(abs_at(lam, Place.prime(p))) / 2)
    return min(min(vals), 0.25)


def height_report(lam, t, sign=1, tol: float = 1e-12, truncation: int = 60) -> dict:
    """JSON-ready summary of local data and the canonical height."""
    lam, t = _check_lambda(lam), _rat(t)
    places = height_places(lam, t)
    g = global_gamma_sum(lam, truncation)
    rows = []
    for v in places:
        lh = local_height(lam, t, v, sign, tol)
        gv = gamma_v_result(lam, v)
        cls = "archimedean" if v.is_archimedean else str(classify_place(lam, v.p))
        rows.append({"place": str(v), "class": cls, "gamma_v": gv.value,
                     "local_height": lh.value, "tail": lh.certified_tail + gv.tail_bound})
    orbit = is_preperiodic(lam, t, sign=sign)
    numeric = math.fsum(r["local_height"] for r in rows)
    return {
        "lambda": str(lam), "t": str(t), "sign": "+" if _sign(sign) > 0 else "-",
        "places": rows,
        "orbit": type(orbit).__name__.lower(),
        "canonical_height": 0.0 if isinstance(orbit, Preperiodic) else numeric,
        "local_sum": numeric,
        "global_gamma_sum": g.total,
    }

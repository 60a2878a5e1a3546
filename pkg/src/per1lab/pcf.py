"""Critical orbit relations f_t^n(c) = f_t^m(c), their roots, and exact preperiodicity tests.

The relation is written projectively as P_n Q_m - P_m Q_n = 0 where
F_t^k(c, 1) = (P_k(t), Q_k(t)), so poles of the orbit never produce spurious
roots.  Roots are found by Aberth-Ehrlich iteration in double precision, with
values and derivatives of the relation obtained by running the renormalized
orbit (the polynomial coefficients themselves are far outside float range),
and then polished by Newton's method in mpmath.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .core import INF, MapParams, _sign, eval_map
from .errors import DegenerateRelation, SolverStall
from .exact.family import N_MAX, iterate_param_polys
from .exact.poly import RatPoly
from .exact.scalars import GaussRat, is_exact

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PcfEquation:
    lam: object
    n: int
    m: int
    sign: int
    poly: RatPoly | None = field(repr=False)

    @property
    def degree(self) -> int:
        return self.poly.degree


@dataclass
class RootSet:
    roots: list           # distinct roots (complex)
    multiplicities: list  # int per root
    residuals: list       # projective residual per root
    verified: bool = True

    @property
    def count(self) -> int:
        return sum(self.multiplicities)

    def all_roots(self) -> np.ndarray:
        """Roots repeated according to multiplicity."""
        return np.array([r for r, k in zip(self.roots, self.multiplicities) for _ in range(k)],
                        dtype=complex)

    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "multiplicity", "residual"])
        for r, k, e in zip(self.roots, self.multiplicities, self.residuals):
            w.writerow([repr(r.real), repr(r.imag), k, repr(e)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "verified": self.verified,
            "roots": [{"re": r.real, "im": r.imag, "multiplicity": k, "residual": e}
                      for r, k, e in zip(self.roots, self.multiplicities, self.residuals)],
        })

    @classmethod
    def from_csv(cls, text: str) -> "RootSet":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([complex(float(r["re"]), float(r["im"])) for r in rows],
                   [int(r["multiplicity"]) for r in rows],
                   [float(r["residual"]) for r in rows])


# -- construction -----------------------------------------------------------------

def build_pcf_equation(lam, n: int, m: int, sign=1, n_max: int = N_MAX) -> PcfEquation:
    """Exact polynomial P_n Q_m - P_m Q_n in t, with content removed."""
    s = _sign(sign)
    if not (0 <= m < n):
        raise ValueError("need 0 <= m < n")
    if not is_exact(lam):
        raise TypeError("exact lambda required to build the relation polynomial")
    seq = iterate_param_polys(lam, n, s, n_max)
    Pn, Qn = seq[n]
    Pm, Qm = seq[m]
    poly = Pn * Qm - Pm * Qn
    if poly.is_zero():
        raise DegenerateRelation(f"relation n={n}, m={m} vanishes identically")
    return PcfEquation(lam, n, m, s, poly.content_free())


# -- orbit evaluation ---------------------------------------------------------------

def _relation_newton_np(lam: complex, sign: int, n: int, m: int, t: np.ndarray):
    """g/g' for g = P_n Q_m - P_m Q_n at many t, via the renormalized orbit."""
    z1 = np.full(t.shape, complex(sign))
    z2 = np.ones(t.shape, dtype=complex)
    d1 = np.zeros(t.shape, dtype=complex)
    d2 = np.zeros(t.shape, dtype=complex)
    if m == 0:
        a1, a2, b1, b2 = z1.copy(), z2.copy(), d1.copy(), d2.copy()
    for k in range(1, n + 1):
        p = z1 * z2
        dp = d1 * z2 + z1 * d2
        n1 = lam * p
        n2 = z1 * z1 + t * p + z2 * z2
        e1 = lam * dp
        e2 = 2 * z1 * d1 + p + t * dp + 2 * z2 * d2
        s = np.maximum(np.abs(n1), np.abs(n2))
        z1, z2, d1, d2 = n1 / s, n2 / s, e1 / s, e2 / s
        if k == m:
            a1, a2, b1, b2 = z1.copy(), z2.copy(), d1.copy(), d2.copy()
    g = z1 * a2 - a1 * z2
    dg = d1 * a2 + z1 * b2 - b1 * z2 - a1 * d2
    return g, dg


def _relation_mp(lam, sign: int, n: int, m: int, t):
    """(g, g', projective residual) at one t in mpmath."""
    z1, z2 = mpmath.mpc(sign), mpmath.mpc(1)
    d1, d2 = mpmath.mpc(0), mpmath.mpc(0)
    a1, a2, b1, b2 = z1, z2, d1, d2
    for k in range(1, n + 1):
        p = z1 * z2
        dp = d1 * z2 + z1 * d2
        n1 = lam * p
        n2 = z1 * z1 + t * p + z2 * z2
        e1 = lam * dp
        e2 = 2 * z1 * d1 + p + t * dp + 2 * z2 * d2
        s = max(abs(n1), abs(n2))
        z1, z2, d1, d2 = n1 / s, n2 / s, e1 / s, e2 / s
        if k == m:
            a1, a2, b1, b2 = z1, z2, d1, d2
    g = z1 * a2 - a1 * z2
    dg = d1 * a2 + z1 * b2 - b1 * z2 - a1 * d2
    return g, dg, abs(g)  # both pairs have unit max-norm


def relation_residual(lam, sign, n: int, m: int, t, dps: int = 40) -> float:
    """|x_n y_m - x_m y_n| / (||v_n|| ||v_m||) for v_k = F_t^k(sign, 1)."""
    with mpmath.workdps(dps):
        lam_mp = _to_mp(lam)
        return float(_relation_mp(lam_mp, _sign(sign), n, m, mpmath.mpc(t))[2])


def _to_mp(x):
    if isinstance(x, GaussRat):
        return mpmath.mpc(mpmath.mpf(x.re.numerator) / x.re.denominator,
                          mpmath.mpf(x.im.numerator) / x.im.denominator)
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpmathify(x)


# -- root finding ---------------------------------------------------------------------

def _root_radius(poly: RatPoly) -> float:
    """Fujiwara bound 2 max_k |a_{d-k}/a_d|^(1/k), computed in log space."""
    d = poly.degree
    cs = poly.coeffs
    la = _logabs(cs[d])
    best = -math.inf
    for k in range(1, d + 1):
        c = cs[d - k]
        if c == 0:
            continue
        v = (_logabs(c) - la) / k
        if k == d:
            v = (_logabs(c) - la - math.log(2)) / k
        best = max(best, v)
    return 2 * math.exp(best) if best > -math.inf else 1.0


def _logabs(c) -> float:
    if isinstance(c, GaussRat):
        n = c.norm()
        return 0.5 * (math.log(n.numerator) - math.log(n.denominator))
    c = Fraction(c)
    return math.log(abs(c.numerator)) - math.log(c.denominator)


def aberth(eq: PcfEquation, max_iter: int = 2000, tol: float = 1e-14, seed: int = 0):
    """Simultaneous Aberth-Ehrlich iteration for all roots; returns (roots, converged)."""
    d = eq.degree
    lam = complex(eq.lam)
    R = _root_radius(eq.poly)
    rng = np.random.default_rng(seed)
    ang = 2 * np.pi * (np.arange(d) + 0.25 + 0.5 * rng.random(d)) / d
    z = R * np.exp(1j * ang)
    active = np.ones(d, dtype=bool)
    for it in range(max_iter):
        g, dg = _relation_newton_np(lam, eq.sign, eq.n, eq.m, z[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            N = g / dg
            diff = z[active][:, None] - z[None, :]
            idx = np.nonzero(active)[0]
            diff[np.arange(len(idx)), idx] = 1.0
            S = (1.0 / diff).sum(axis=1) - 1.0
            w = N / (1 - N * S)
        bad = ~np.isfinite(w)
        w[bad] = 0.0
        z[active] -= w
        small = np.abs(w) <= tol * np.maximum(np.abs(z[active]), 1.0)
        act_idx = np.nonzero(active)[0]
        active[act_idx[small & ~bad]] = False
        if not active.any():
            return z, True
    return z, False


def _cluster(z: np.ndarray, radius: float) -> list[list[int]]:
    n = len(z)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(z.real)
    for a in range(n):
        i = order[a]
        for b in range(a + 1, n):
            j = order[b]
            if z[j].real - z[i].real > radius:
                break
            if abs(z[i] - z[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _polish(lam_mp, eq: PcfEquation, t, prec_bits: int, k: int = 1, max_steps: int = 80):
    eps = mpmath.mpf(2) ** (-prec_bits + 8)
    for _ in range(max_steps):
        g, dg, _r = _relation_mp(lam_mp, eq.sign, eq.n, eq.m, t)
        if dg == 0:
            break
        step = k * g / dg
        t -= step
        if abs(step) <= eps * max(1, abs(t)):
            break
    return t


def solve_all_roots(eq: PcfEquation, residual_target: float = 1e-10, prec_bits: int = 128,
                    seed: int = 0, max_iter: int = 2000) -> RootSet:
    """All roots of the relation with multiplicity, polished at ``prec_bits`` of precision.

    Every Aberth approximation is polished by Newton's method on its own.
    Approximations within 1e-6 * scale of each other are candidates for a
    multiple root; a candidate group is merged only if its polished members
    still agree to 1e-12 * scale, otherwise they stay distinct simple roots.
    """
    d = eq.degree
    if d < 1:
        raise ValueError("relation has no roots (degree < 1)")
    z, converged = aberth(eq, max_iter=max_iter, seed=seed)
    scale = max(1.0, float(np.max(np.abs(z))))
    roots, mults, res = [], [], []
    with mpmath.workprec(prec_bits):
        lam_mp = _to_mp(eq.lam)
        polished = [_polish(lam_mp, eq, mpmath.mpc(complex(x)), prec_bits) for x in z]
        pz = np.array([complex(x) for x in polished])
        for grp in _cluster(z, 1e-6 * scale):
            for sub in _cluster(pz[grp], 1e-12 * scale):
                members = [grp[i] for i in sub]
                k = len(members)
                t = polished[members[0]]
                if k > 1:
                    t = _polish(lam_mp, eq, mpmath.mpc(complex(np.mean(pz[members]))), prec_bits, k)
                roots.append(complex(t))
                mults.append(k)
                res.append(float(_relation_mp(lam_mp, eq.sign, eq.n, eq.m, t)[2]))
    rs = RootSet(roots, mults, res, verified=True)
    # Aberth only converges linearly onto multiple roots, so its own stopping
    # test is advisory; the polished residuals and the count decide
    if not converged:
        log.debug("aberth hit max_iter; relying on polished residuals")
    if rs.max_residual() > residual_target or rs.count != d:
        rs.verified = False
        raise SolverStall(f"residual {rs.max_residual():.3g} / count {rs.count} of {d}", rs)
    return rs


# -- exact preperiodicity ---------------------------------------------------------------

@dataclass(frozen=True)
class Preperiodic:
    period: int
    preperiod: int


@dataclass(frozen=True)
class Escaping:
    step: int
    height: float


@dataclass(frozen=True)
class Undecided:
    steps: int


def _height(x) -> float:
    if x is INF:
        return 0.0
    return math.log(max(abs(x.numerator), x.denominator))


def default_height_bound(lam, t) -> float:
    return 64 + 4 * _height(Fraction(lam)) + 4 * _height(Fraction(t))


def is_preperiodic(lam, t, height_bound: float | None = None, sign=1, max_steps: int = 64):
    """Exact orbit of the critical point sign*1 of f_t over Q with cycle detection.

    Escaping means the Weil height passed ``height_bound`` while growing by a
    factor of at least 1.5 over each of the last three steps.
    """
    lam, t = Fraction(lam), Fraction(t)
    if height_bound is None:
        height_bound = default_height_bound(lam, t)
    p = MapParams(lam, t)
    x = Fraction(_sign(sign))
    seen = {x: 0}
    heights = [_height(x)]
    for k in range(1, max_steps + 1):
        x = eval_map(p, x)
        if x in seen:
            return Preperiodic(k - seen[x], seen[x])
        seen[x] = k
        h = _height(x)
        heights.append(h)
        if h > height_bound and len(heights) >= 4:
            if all(heights[-i] >= 1.5 * heights[-i - 1] for i in range(1, 4)):
                return Escaping(k, h)
    return Undecided(max_steps)


# -- period-3 witness at lambda = -2 ----------------------------------------------------------

def ell(t):
    """16(2+t)^2 + 4(2+t)^2 (8-t^2) + (8-t^2)^2, generic in the scalar type."""
    a = (2 + t) ** 2
    b = 8 - t * t
    return 16 * a + 4 * a * b + b * b


def ell_at_two_sqrt3() -> int:
    """ell(2 sqrt 3) computed exactly in Z[sqrt 3]; returns the rational integer value."""
    # represent x + y sqrt3 as (x, y)
    def mul(u, v):
        return (u[0] * v[0] + 3 * u[1] * v[1], u[0] * v[1] + u[1] * v[0])

    def add(*us):
        return (sum(u[0] for u in us), sum(u[1] for u in us))

    def sc(c, u):
        return (c * u[0], c * u[1])

    t = (0, 2)
    a = mul(add((2, 0), t), add((2, 0), t))
    b = add((8, 0), sc(-1, mul(t, t)))
    val = add(sc(16, a), sc(4, mul(a, b)), mul(b, b))
    if val[1] != 0:
        raise ArithmeticError("irrational part did not cancel")
    return val[0]


@dataclass(frozen=True)
class Period3Witness:
    t0: float
    residual: float
    orbit_error: float
    first_image: float


def period3_witness(dps: int = 50) -> Period3Witness:
    """The real parameter t0 > 2 sqrt 3 with ell(t0) = 0, where 1 has exact period 3 for lambda = -2."""
    with mpmath.workdps(dps):
        lo = 2 * mpmath.sqrt(3)
        # ell(2 sqrt 3) = 16 > 0 and ell(10) < 0 bracket the root
        t0 = mpmath.findroot(ell, (lo, mpmath.mpf(10)), solver="illinois")
        residual = abs(ell(t0))
        p = MapParams(mpmath.mpf(-2), t0)
        z = mpmath.mpf(1)
        first = eval_map(p, z)
        for _ in range(3):
            z = eval_map(p, z)
        return Period3Witness(float(t0), float(residual), float(abs(z - 1)), float(first))

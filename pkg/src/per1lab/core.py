"""The family f(z) = lam z / (z^2 + t z + 1), its homogeneous lift, and escape rates.

The escape rate H^sign(t) is the growth rate 2^-n log||F_t^n(sign, 1)|| of the
critical orbit under the lift F_t(z1, z2) = (lam z1 z2, z1^2 + t z1 z2 + z2^2),
with the max-norm.  It is computed by renormalizing to unit norm at each step
and summing the weighted log-scales; the per-step scale is trapped in
[c/T, C*T] (T = max(|t|, 1)), which gives an explicit geometric tail.
"""

from __future__ import annotations

import cmath
import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence
from .series import linear_tail, log_abs_partial_sum, log_sum_bound


class _Infinity:
    """The point at infinity of the Riemann sphere."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def _sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be + or -, got {sign!r}")


@dataclass(frozen=True)
class MapParams:
    lam: complex
    t: complex

    def __post_init__(self):
        if self.lam == 0:
            raise ValueError("lambda must be nonzero")


@dataclass(frozen=True)
class ProjPair:
    z1: complex
    z2: complex

    def __post_init__(self):
        if self.z1 == 0 and self.z2 == 0:
            raise ValueError("(0, 0) is not a point of the projective line")

    def norm(self) -> float:
        return max(abs(self.z1), abs(self.z2))

    def normalized(self) -> "ProjPair":
        s = self.norm()
        return ProjPair(self.z1 / s, self.z2 / s)

    def scaled(self, a) -> "ProjPair":
        return ProjPair(a * self.z1, a * self.z2)


@dataclass(frozen=True)
class FixedPointData:
    points: tuple
    multipliers: tuple


@dataclass(frozen=True)
class EscapeRateResult:
    value: float
    iterations: int
    tail_bound: float


def eval_map(p: MapParams, z):
    """f(z) on the Riemann sphere; INF stands for the point at infinity."""
    if z is INF:
        return 0 * p.lam
    den = z * z + p.t * z + 1
    if den == 0:
        return INF
    return p.lam * z / den


def map_derivative(p: MapParams, z):
    den = z * z + p.t * z + 1
    return p.lam * (1 - z * z) / (den * den)


def eval_homogeneous(p: MapParams, v: ProjPair) -> ProjPair:
    z1, z2 = v.z1, v.z2
    return ProjPair(p.lam * z1 * z2, z1 * z1 + p.t * z1 * z2 + z2 * z2)


def fixed_point_data(p: MapParams) -> FixedPointData:
    lam, t = complex(p.lam), complex(p.t)
    disc = t * t - 4 * (1 - lam)
    # a discriminant at rounding level is a collision Z+ = Z- = -t/2
    if abs(disc) <= 16 * sys.float_info.epsilon * (abs(t) ** 2 + 4 * abs(1 - lam)):
        return FixedPointData((0j, -t / 2, -t / 2), (p.lam, 1.0 + 0j, 1.0 + 0j))
    r = cmath.sqrt(disc)
    zp, zm = (-t + r) / 2, (-t - r) / 2
    mults = (p.lam, (1 - zp * zp) / lam, (1 - zm * zm) / lam)
    return FixedPointData((0j, zp, zm), mults)


def sandwich_constants(lam) -> tuple[float, float]:
    """(c, C) with c/T <= ||F_t(z)|| / ||z||^2 <= C*T, T = max(|t|, 1)."""
    a = abs(complex(lam))
    return min(a / 2, 0.25), max(a, 3.0)


def step_log_bound(lam, t) -> float:
    """Bound on |log(||F_t(z)|| / ||z||^2)| over all z != 0."""
    c, C = sandwich_constants(lam)
    T = max(abs(complex(t)), 1.0)
    return max(math.log(C * T), -math.log(c / T))


def escape_rate(p: MapParams, sign=1, tol: float = 1e-12, max_iter: int = 400) -> EscapeRateResult:
    """H^sign(t) with a certified tail bound <= tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam, t = complex(p.lam), complex(p.t)
    L = step_log_bound(lam, t)
    z1, z2 = complex(_sign(sign)), 1 + 0j
    total = 0.0
    w = 1.0
    for k in range(1, max_iter + 1):
        z1, z2 = lam * z1 * z2, z1 * z1 + t * z1 * z2 + z2 * z2
        s = max(abs(z1), abs(z2))
        z1, z2 = z1 / s, z2 / s
        w *= 0.5
        total += w * math.log(s)
        tail = w * L
        if tail <= tol:
            return EscapeRateResult(total, k, tail)
    raise NonConvergence(f"tail {w * L:.3g} above tol {tol:.3g} after {max_iter} steps")


def escape_rate_grid(lam, t: np.ndarray, sign=1, tol: float = 1e-10) -> np.ndarray:
    """Vectorized H^sign over an array of parameters (same stopping rule as escape_rate)."""
    lam = complex(lam)
    t = np.asarray(t, dtype=complex)
    T = np.maximum(np.abs(t), 1.0)
    c, C = sandwich_constants(lam)
    L = float(np.max(np.maximum(np.log(C * T), -np.log(c / T)))) if t.size else 0.0
    n = max(1, math.ceil(math.log2(max(L, 1e-300) / tol))) if L > 0 else 1
    z1 = np.full(t.shape, complex(_sign(sign)))
    z2 = np.ones(t.shape, dtype=complex)
    total = np.zeros(t.shape)
    w = 1.0
    for _ in range(n):
        z1, z2 = lam * z1 * z2, z1 * z1 + t * z1 * z2 + z2 * z2
        s = np.maximum(np.abs(z1), np.abs(z2))
        z1 /= s
        z2 /= s
        w *= 0.5
        total += w * np.log(s)
    return total


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: int
    tail_bound: float


def gamma_arch_result(lam, tol: float = 1e-13) -> SeriesResult:
    """gamma(lam) = 1/2 sum_{i>=1} 2^-i log|S_i(lam)| with its certified tail."""
    a, b = log_sum_bound(lam)
    N = 1
    while 0.5 * linear_tail(a, b, 0.5, N) > tol:
        N += 1
    terms = [0.5 ** (i + 1) * log_abs_partial_sum(lam, i) for i in range(1, N + 1)]
    return SeriesResult(math.fsum(terms), N, 0.5 * linear_tail(a, b, 0.5, N))


def gamma_arch(lam, tol: float = 1e-13) -> float:
    """gamma(lam); raises GammaDivergence on the unit circle away from 1."""
    return gamma_arch_result(lam, tol).value


def green_homogeneous(lam, v: ProjPair, sign=1, tol: float = 1e-12) -> float:
    """G^sign(t1, t2): 2 H(t1/t2) + log|t2|, or log|t1| + gamma(lam) on t2 = 0."""
    if v.z2 == 0:
        return math.log(abs(v.z1)) + gamma_arch(lam, tol)
    t = complex(v.z1) / complex(v.z2)
    h = escape_rate(MapParams(lam, t), sign, tol / 2).value
    return 2 * h + math.log(abs(complex(v.z2)))


def critical_value_quadratic(lam) -> complex:
    """c(lam) = lam/2 - lam^2/4, the parameter of z^2 + c tied to the orbit of -1 at t = lam - 2."""
    lam = complex(lam)
    return lam / 2 - lam * lam / 4

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from per1lab.core import (INF, MapParams, ProjPair, critical_value_quadratic, escape_rate, escape_rate_grid,
                          eval_homogeneous, eval_map, fixed_point_data, gamma_arch, gamma_arch_result,
                          green_homogeneous, map_derivative, sandwich_constants)
from per1lab.errors import GammaDivergence, NonConvergence

finite = st.floats(-6, 6, allow_nan=False)
moduli = st.floats(0.2, 5).filter(lambda r: abs(r - 1) > 1e-3)
angles = st.floats(0, 2 * math.pi)


@st.composite
def lambdas(draw):
    return draw(moduli) * cmath.exp(1j * draw(angles))


@st.composite
def params(draw):
    return complex(draw(finite), draw(finite))


# -- the map ----------------------------------------------------------------------

def test_eval_map_examples():
    assert eval_map(MapParams(2, 0), 1) == 1
    assert eval_map(MapParams(2, 3), 0) == 0
    assert eval_map(MapParams(2, 3), INF) == 0
    # pole: z^2 + t z + 1 = 0 at z = -1 for t = 2
    assert eval_map(MapParams(2, 2), -1) is INF


def test_lambda_must_be_nonzero():
    with pytest.raises(ValueError):
        MapParams(0, 1)


@given(lambdas(), params(), params())
def test_conjugacy(lam, t, z):
    a = eval_map(MapParams(lam, -t), z)
    b = eval_map(MapParams(lam, t), -z)
    if a is INF or b is INF:
        assert a is b
    else:
        assert abs(a + b) <= 1e-12 * max(1, abs(a))


def test_homogeneous_examples():
    assert eval_homogeneous(MapParams(2, 0), ProjPair(1, 1)) == ProjPair(2, 2)
    assert eval_homogeneous(MapParams(2, 1), ProjPair(1, 0)) == ProjPair(0, 1)
    for lam in (2, -4, 0.5 + 1j):
        v = eval_homogeneous(MapParams(lam, lam - 2), ProjPair(1 / lam, 1 / lam))
        assert abs(v.z1 - 1 / lam) < 1e-14 and abs(v.z2 - 1 / lam) < 1e-14


def test_projpair_rejects_origin():
    with pytest.raises(ValueError):
        ProjPair(0, 0)


def test_fixed_point_multipliers_at_zero():
    for lam in (2, -4, 0.5j, 3.5):
        fp = fixed_point_data(MapParams(lam, 0))
        assert fp.multipliers[0] == lam
        expect = -1 + 2 / lam
        assert abs(fp.multipliers[1] - expect) < 1e-12 and abs(fp.multipliers[2] - expect) < 1e-12


def test_fixed_point_collision():
    lam = 0.3 + 0.4j
    t = 2 * cmath.sqrt(1 - lam)
    fp = fixed_point_data(MapParams(lam, t))
    assert abs(fp.points[1] + t / 2) < 1e-12 and abs(fp.points[2] + t / 2) < 1e-12
    assert abs(fp.multipliers[1] - 1) < 1e-12 and abs(fp.multipliers[2] - 1) < 1e-12


@given(lambdas(), params())
def test_fixed_points_are_fixed(lam, t):
    p = MapParams(lam, t)
    fp = fixed_point_data(p)
    for z, mult in zip(fp.points, fp.multipliers):
        w = eval_map(p, z)
        assert w is not INF and abs(w - z) <= 1e-9 * (1 + abs(z))
        if abs(z * z + t * z + 1) > 1e-6:
            assert abs(map_derivative(p, z) - mult) <= 1e-7 * (1 + abs(mult))


def test_fixed_points_lambda2_t5():
    p = MapParams(2, 5)
    for z in fixed_point_data(p).points:
        assert abs(eval_map(p, z) - z) < 1e-12


# -- escape rates ---------------------------------------------------------------------

def test_escape_rate_examples():
    assert abs(escape_rate(MapParams(2, 0), 1).value - math.log(2)) < 1e-12
    assert abs(escape_rate(MapParams(2, 0), -1).value - math.log(2)) < 1e-12
    a = escape_rate(MapParams(-4, 1.5 - 2j), -1).value
    b = escape_rate(MapParams(-4, -1.5 + 2j), 1).value
    assert abs(a - b) < 1e-10


def test_escape_rate_tail_contract():
    r = escape_rate(MapParams(3, 2 + 1j), 1, tol=1e-9)
    assert 0 <= r.tail_bound <= 1e-9
    tight = escape_rate(MapParams(3, 2 + 1j), 1, tol=1e-14).value
    assert abs(r.value - tight) <= r.tail_bound + 1e-14


def test_escape_rate_budget():
    with pytest.raises(NonConvergence):
        escape_rate(MapParams(2, 1), 1, tol=1e-12, max_iter=5)
    with pytest.raises(ValueError):
        escape_rate(MapParams(2, 1), 1, tol=0)


def test_escape_rate_deterministic():
    p = MapParams(-4 + 0.5j, 0.3 - 1.1j)
    assert escape_rate(p, 1).value == escape_rate(p, 1).value


@given(lambdas(), params())
def test_symmetry_property(lam, t):
    tol = 1e-12
    hm = escape_rate(MapParams(lam, t), -1, tol).value
    hp = escape_rate(MapParams(lam, -t), 1, tol).value
    assert abs(hm - hp) <= 2 * tol


@given(lambdas())
def test_h_plus_at_lambda_minus_two(lam):
    assert abs(escape_rate(MapParams(lam, lam - 2), 1).value - math.log(abs(lam))) < 1e-9


def test_grid_matches_scalar():
    t = np.array([[0.5 + 0.5j, -3.0], [2j, 7 - 1j]])
    g = escape_rate_grid(2.5, t, 1, 1e-12)
    for idx in np.ndindex(t.shape):
        assert abs(g[idx] - escape_rate(MapParams(2.5, t[idx]), 1).value) < 1e-11


@given(lambdas(), params(), st.floats(0.01, 100), st.floats(0.01, 100))
def test_sandwich_property(lam, t, a, b):
    if abs(t) < 1:
        t = t / abs(t) if t else 1
    c, C = sandwich_constants(lam)
    for z1, z2 in ((a, b), (a, -b), (1j * a, b)):
        F1, F2 = lam * z1 * z2, z1 * z1 + t * z1 * z2 + z2 * z2
        r = max(abs(F1), abs(F2)) / max(abs(z1), abs(z2)) ** 2
        assert c / abs(t) <= r * (1 + 1e-12) and r <= C * abs(t) * (1 + 1e-12)


@given(lambdas(), params(), st.floats(0.01, 100), st.floats(0.01, 100))
def test_sandwich_small_parameter(lam, t, a, b):
    # for |t| < 1 the bounds hold with |t| replaced by max(|t|, 1)
    t = t / (1 + abs(t))
    c, C = sandwich_constants(lam)
    for z1, z2 in ((a, b), (a, -b), (1j * a, b)):
        F1, F2 = lam * z1 * z2, z1 * z1 + t * z1 * z2 + z2 * z2
        r = max(abs(F1), abs(F2)) / max(abs(z1), abs(z2)) ** 2
        assert c <= r * (1 + 1e-12) and r <= C * (1 + 1e-12)


# -- gamma and the homogeneous Green function ------------------------------------------

def test_gamma_at_one():
    expect = math.fsum(2.0 ** -j * math.log(j) for j in range(2, 120))
    assert abs(gamma_arch(1) - expect) < 1e-12


def test_gamma_brute_force_inside_disk():
    lam = 0.5 * cmath.exp(0.7j)
    s, acc, p = [], 0, 1
    for i in range(201):
        acc += p
        p *= lam
        s.append(acc)
    brute = 0.5 * math.fsum(2.0 ** -i * math.log(abs(s[i])) for i in range(1, 201))
    assert abs(gamma_arch(lam) - brute) < 1e-12


def test_gamma_tail():
    r = gamma_arch_result(2, 1e-13)
    assert r.tail_bound <= 1e-13
    assert abs(r.value - 0.9457553021589743) < 1e-12


def test_gamma_refuses_unit_circle():
    with pytest.raises(GammaDivergence):
        gamma_arch(cmath.exp(1j))
    with pytest.raises(GammaDivergence):
        gamma_arch(-1)


def test_green_examples():
    for lam in (2, -3, 0.5):
        assert abs(green_homogeneous(lam, ProjPair(1, 0)) - gamma_arch(lam)) < 1e-12
    assert abs(green_homogeneous(2, ProjPair(0, 1)) - 2 * math.log(2)) < 1e-11


@given(lambdas(), params(), st.floats(0.05, 20), angles)
def test_green_log_homogeneous(lam, t, r, th):
    a = r * cmath.exp(1j * th)
    v = ProjPair(t, 1.0)
    g1 = green_homogeneous(lam, v.scaled(a), 1, 1e-12)
    g0 = green_homogeneous(lam, v, 1, 1e-12)
    assert abs(g1 - g0 - math.log(abs(a))) < 1e-9


def test_green_continuity_near_infinity():
    # G(1, s) -> gamma as s -> 0; the convergence rate is measured, not assumed
    lam = 2
    gaps = [abs(green_homogeneous(lam, ProjPair(1, s)) - gamma_arch(lam)) for s in (1e-2, 1e-4, 1e-6)]
    assert gaps[2] < gaps[0] and gaps[2] < 1e-4


def test_critical_value():
    assert critical_value_quadratic(2) == 0
    assert critical_value_quadratic(-2) == -2

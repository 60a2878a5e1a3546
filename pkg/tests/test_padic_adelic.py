import math
import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, strategies as st

from per1lab.adelic import (ARCH, Place, abs_at, arakelov_green_arch, canonical_height,
                            canonical_height_tail, classify_place, count_class_primes,
                            gamma_v, gamma_v_result, global_gamma_sum, global_log_capacity_sum,
                            height_report, local_height, log_abs_at, log_capacity_v,
                            quasi_adelic_height, quasi_adelic_height_pairwise, weil_height_sequence)
from per1lab.core import MapParams, ProjPair, escape_rate, gamma_arch
from per1lab.errors import CoincidentPoints, PrecisionExhausted, RootOfUnity
from per1lab.measure import Window, green_energy
from per1lab.padic import PAdic, ord_p, psum
from per1lab.pcf import Escaping, Preperiodic, build_pcf_equation, is_preperiodic, solve_all_roots

nonzero_rationals = st.fractions(min_value=-10 ** 6, max_value=10 ** 6, max_denominator=10 ** 6).filter(
    lambda x: x != 0)


def _places_of(x: Fraction):
    ps = set(sympy.factorint(abs(x.numerator))) | set(sympy.factorint(x.denominator))
    return [ARCH] + [Place.prime(p) for p in ps]


# -- absolute values and valuations -------------------------------------------------------

def test_abs_at_examples():
    assert abs_at(12, Place.prime(2)) == Fraction(1, 4)
    assert abs_at(Fraction(3, 5), Place.prime(5)) == 5
    assert abs_at(Fraction(-7, 2), ARCH) == Fraction(7, 2)
    prod = Fraction(1)
    for v in _places_of(Fraction(12)):
        prod *= abs_at(12, v)
    assert prod == 1


@given(nonzero_rationals)
def test_product_formula_exact(x):
    prod = Fraction(1)
    for v in _places_of(x):
        prod *= abs_at(x, v)
    assert prod == 1


def test_product_formula_on_100_random_rationals():
    rng = random.Random(11)
    for _ in range(100):
        x = Fraction(rng.randint(-10 ** 9, 10 ** 9) or 1, rng.randint(1, 10 ** 9))
        assert math.prod(abs_at(x, v) for v in _places_of(x)) == 1
        assert abs(math.fsum(log_abs_at(x, v) for v in _places_of(x))) < 1e-12


@given(nonzero_rationals, nonzero_rationals, st.sampled_from([2, 3, 5, 7, 101]))
def test_ord_p_is_a_valuation(x, y, p):
    assert ord_p(x * y, p) == ord_p(x, p) + ord_p(y, p)
    if x + y != 0:
        assert ord_p(x + y, p) >= min(ord_p(x, p), ord_p(y, p))


def test_ord_p_zero_rejected():
    with pytest.raises(ValueError):
        ord_p(0, 3)


@given(st.lists(nonzero_rationals, min_size=1, max_size=5), st.sampled_from([2, 3, 7]))
def test_psum_matches_exact_sum(xs, p):
    total = sum(xs)
    terms = [PAdic.from_rational(x, p, 40) for x in xs]
    if total == 0:
        with pytest.raises(PrecisionExhausted):
            psum(terms)
        return
    s = psum(terms)
    assert s.val == ord_p(total, p)
    ref = PAdic.from_rational(total, p, 40)
    r = min(s.rel, ref.rel)
    assert (s.unit - ref.unit) % p ** r == 0


def test_padic_product_and_shift():
    a, b = PAdic.from_rational(Fraction(18, 5), 3, 20), PAdic.from_rational(Fraction(5, 9), 3, 20)
    c = a * b
    assert c.val == 0 and c.unit == 2
    assert c.shift(3).val == 3


# -- gamma_v -------------------------------------------------------------------------

def _gamma_brute(lam: Fraction, p: int, terms: int = 80) -> float:
    acc, pw, out = Fraction(0), Fraction(1), []
    for i in range(terms + 1):
        acc += pw
        pw *= lam
        if i >= 1:
            out.append(0.5 ** (i + 1) * -ord_p(acc, p) * math.log(p))
    return math.fsum(out)


def test_gamma_v_examples():
    # |2|_3 = 1: termwise evaluation
    assert gamma_v(2, Place.prime(3)) == pytest.approx(_gamma_brute(Fraction(2), 3), abs=1e-13)
    g = gamma_v(1, Place.prime(2))
    assert g < 0 and g == pytest.approx(_gamma_brute(Fraction(1), 2), abs=1e-13)
    # |3|_3 < 1 gives 0 exactly, |1/3|_3 > 1 gives log|lam|_3 exactly
    assert gamma_v(3, Place.prime(3)) == 0.0
    assert gamma_v(Fraction(1, 3), Place.prime(3)) == math.log(3)


@pytest.mark.parametrize("lam", [Fraction(1), Fraction(2), Fraction(3, 2), Fraction(-5, 4), Fraction(6)])
@pytest.mark.parametrize("p", [2, 3, 5, 7, 13])
def test_gamma_v_shortcuts_match_brute_force(lam, p):
    r = gamma_v_result(lam, Place.prime(p))
    assert r.value == pytest.approx(_gamma_brute(lam, p), abs=max(r.tail_bound, 2.0 ** -70) + 1e-14)


def test_gamma_v_archimedean_is_core_gamma():
    assert gamma_v(2, ARCH) == pytest.approx(gamma_arch(2), abs=1e-13)


def test_gamma_v_root_of_unity():
    with pytest.raises(RootOfUnity):
        gamma_v(-1, Place.prime(3))
    with pytest.raises(ValueError):
        gamma_v(0, ARCH)


def test_log_capacity_nonarch_shortcuts():
    assert log_capacity_v(Fraction(1, 2), Place.prime(2)).value == pytest.approx(-2 * math.log(2) - math.log(2) / 3)
    assert log_capacity_v(2, Place.prime(2)).value == pytest.approx(2 * math.log(2))


# -- place classes -------------------------------------------------------------------

def test_classify_place_examples():
    assert str(classify_place(1, 5)) == "M4"
    assert classify_place(2, 2).kind == "exceptional"
    assert str(classify_place(2, 7)) == "M2"
    bounded = classify_place(2, 31, n_max=3)
    assert bounded.kind == "M0" and bounded.searched_to == 3
    with pytest.raises(ValueError):
        classify_place(2, 9)


@given(st.sampled_from([Fraction(1), Fraction(2), Fraction(3, 2), Fraction(-2, 7)]),
       st.sampled_from(list(sympy.primerange(3, 200))))
def test_classify_place_witness_is_least(lam, p):
    cls = classify_place(lam, p)
    if cls.kind == "exceptional":
        assert ord_p(lam, p) != 0
        return
    assert cls.kind == "Mn"
    sums = [sum(lam ** i for i in range(k + 1)) for k in range(1, cls.n + 1)]
    assert all(ord_p(s, p) == 0 for s in sums[:-1]) and ord_p(sums[-1], p) > 0


@pytest.mark.parametrize("lam", [Fraction(1), Fraction(2), Fraction(3, 2)])
def test_places_in_Mn_grow_at_most_linearly(lam):
    # every prime in M_n divides the numerator of S_n, whose size is at most (n+1) M^n
    M = max(abs(lam.numerator), lam.denominator)
    counts = []
    for n in range(1, 21):
        c = count_class_primes(lam, n, 3000)
        counts.append(c)
        assert c <= (n * math.log(M) + math.log(n + 1)) / math.log(2)
    fitted = max(c / n for n, c in enumerate(counts, 1))
    assert all(c <= fitted * n for n, c in enumerate(counts, 1))


# -- global sums ---------------------------------------------------------------------

@pytest.mark.parametrize("lam", [Fraction(1), Fraction(2), Fraction(3, 2), Fraction(-3, 5)])
def test_global_sums_vanish(lam):
    for g in (global_gamma_sum(lam, 50), global_log_capacity_sum(lam, 50)):
        rounding = 4 * len(g.per_place) * 2.0 ** -52 * max(1.0, sum(abs(v) for v in g.per_place.values()))
        assert abs(g.total) <= g.tail_bound + rounding + 1e-12
        assert max(abs(r) for r in g.term_residuals) < 1e-12


def test_product_formula_on_a_partial_sum():
    s = 1 + Fraction(3, 2) + Fraction(9, 4)
    assert math.prod(abs_at(s, v) for v in _places_of(s)) == 1


def test_global_gamma_sum_agrees_with_place_values():
    lam = Fraction(2)
    g = global_gamma_sum(lam, 60)
    for v, val in g.per_place.items():
        if not v.is_archimedean:
            assert val == pytest.approx(gamma_v(lam, v), abs=1e-12)


# -- local and canonical heights ---------------------------------------------------------

def test_local_height_good_reduction_is_zero():
    lh = local_height(2, 5, Place.prime(3))
    assert lh.value == 0.0 and lh.certified_tail == 0.0


def test_local_height_archimedean_matches_escape_rate():
    lh = local_height(2, 5, ARCH)
    assert lh.value == pytest.approx(escape_rate(MapParams(2, 5), 1, 1e-12).value, abs=1e-9)


def _exact_local_height(lam, t, p, steps=16):
    # 2^-n log||F^n(1, 1)||_p from exact rational iteration
    a, b = Fraction(1), Fraction(1)
    for _ in range(steps):
        a, b = lam * a * b, a * a + t * a * b + b * b
    m = min(ord_p(x, p) for x in (a, b) if x != 0)
    return -m * math.log(p) / 2 ** steps


@pytest.mark.parametrize("lam,t,p", [(Fraction(1, 2), Fraction(1), 2), (Fraction(2), Fraction(1, 3), 3),
                                     (Fraction(4, 9), Fraction(5, 2), 3), (Fraction(3), Fraction(1, 7), 7)])
def test_local_height_padic_matches_exact_iteration(lam, t, p):
    lh = local_height(lam, t, Place.prime(p))
    # the exact truncation error is at most 2^-16 times the one-step log bound
    assert lh.value == pytest.approx(_exact_local_height(lam, t, p), abs=2.0 ** -16 * 8)


def test_local_height_through_exact_cancellation():
    # f_{-2}(1) = 2/0 lands on infinity, then 0: the p-adic sum 1 - 2 + 1 cancels exactly
    lh = local_height(2, -2, Place.prime(2))
    assert lh.value == pytest.approx(_exact_local_height(Fraction(2), Fraction(-2), 2, 12), abs=2.0 ** -12 * 4)
    assert canonical_height(2, -2, detect_preperiodic=False) == pytest.approx(0.0, abs=1e-12)


def test_local_heights_sum_to_zero_at_pcf():
    assert canonical_height(2, 0, 1) == 0.0
    assert canonical_height(2, 0, 1, detect_preperiodic=False) == pytest.approx(0.0, abs=1e-9)


def test_canonical_height_escaping_examples():
    assert isinstance(is_preperiodic(2, 0, sign=-1), Preperiodic)
    assert canonical_height(2, 0, -1) == 0.0
    h, tail = canonical_height_tail(2, 5)
    assert h > 3 * tail


def test_canonical_height_matches_weil_extrapolation():
    h = canonical_height(3, 7)
    seq = weil_height_sequence(3, 7, 1, 12)
    assert abs(seq[12] / 2 ** 12 - h) < 1e-3


def test_canonical_height_zero_at_rational_pcf_roots():
    for lam, n, m, s in [(Fraction(2), 2, 0, 1), (Fraction(-2), 3, 0, 1), (Fraction(3), 2, 1, -1)]:
        rs = solve_all_roots(build_pcf_equation(lam, n, m, s))
        for z in rs.roots:
            q = Fraction(round(z.real))
            if abs(z - float(q)) < 1e-12 and abs(z.imag) < 1e-12:
                assert isinstance(is_preperiodic(lam, q, sign=s), Preperiodic)
                assert canonical_height(lam, q, s) == 0.0


@pytest.mark.parametrize("t", [Fraction(5), Fraction(1, 3), Fraction(-7, 2)])
def test_canonical_height_positive_when_escaping(t):
    assert isinstance(is_preperiodic(2, t), Escaping)
    h, tail = canonical_height_tail(2, t)
    assert h > 3 * tail


# -- Arakelov-Green function ---------------------------------------------------------

@given(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_arakelov_green_lift_invariant_and_symmetric(x, y, alpha):
    if abs(x - y) < 1e-3:
        return
    g = arakelov_green_arch(x, y, 2)
    assert arakelov_green_arch(y, x, 2) == pytest.approx(g, abs=1e-10)
    assert arakelov_green_arch(ProjPair(alpha * x, alpha), y, 2) == pytest.approx(g, abs=1e-10)


def test_arakelov_green_diagonal():
    with pytest.raises(CoincidentPoints):
        arakelov_green_arch(1.5, 1.5, 2)


def test_green_energy_normalized():
    r = green_energy(2, Window.square(6), 250)
    assert abs(r["energy"]) < 0.05


# -- quasi-adelic heights -------------------------------------------------------------

def test_quasi_adelic_height_examples():
    assert quasi_adelic_height([0], 2) == 0.0
    t = Fraction(1, 3)
    assert quasi_adelic_height([t], 2) == pytest.approx(2 * canonical_height(2, t), abs=1e-12)
    pointwise = quasi_adelic_height([5, -5], 2)
    pairwise = quasi_adelic_height_pairwise([5, -5], 2)
    assert pointwise == pytest.approx(pairwise, abs=1e-9)


def test_quasi_adelic_pairwise_on_three_points():
    S = [Fraction(5), Fraction(1, 3), Fraction(-2)]
    assert quasi_adelic_height(S, 2) == pytest.approx(quasi_adelic_height_pairwise(S, 2), abs=1e-9)


def test_height_report_schema():
    rep = height_report(2, 0, 1)
    assert {"lambda", "t", "sign", "places", "canonical_height", "global_gamma_sum"} <= set(rep)
    assert rep["canonical_height"] == 0.0 and rep["orbit"] == "preperiodic"
    for row in rep["places"]:
        assert set(row) == {"place", "class", "gamma_v", "local_height", "tail"}
    assert rep["places"][0]["class"] == "archimedean"

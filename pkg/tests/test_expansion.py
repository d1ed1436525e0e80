import math
from collections import Counter

import numpy as np
import pytest

from bethe_dos.expansion import (
    Expansion,
    ExpansionParams,
    M_n,
    dos_coefficient,
    dos_density,
    m_partial,
    remainder_budget,
    uniform_a2,
    uniform_two_term,
)
from bethe_dos.stieltjes import (
    AnalyticWindow,
    DomainError,
    UniformLaw,
    s_continued,
    s_uniform_closed,
    semicircle_law,
)
from bethe_dos.treewalk import CoefficientTable, brute_force_walks, enumerate_walk_classes

W = AnalyticWindow((-0.5, 0.5), 0.3, 0.15)
U = UniformLaw(1.0)


@pytest.fixture(scope="module")
def table():
    return CoefficientTable.build(12)


def s(k, z):
    return complex(s_uniform_closed(k, z))


def random_points(rng, n):
    pts = []
    while len(pts) < n:
        z = complex(rng.uniform(-0.65, 0.65), rng.uniform(-0.15, 0.15))
        if W.contains(z):
            pts.append(z)
    return pts


# --- coefficient functions ------------------------------------------------------

def test_M0_is_s1():
    for z in (0.0, 0.3 - 0.1j, -0.2 + 0.05j):
        assert M_n(enumerate_walk_classes(0), U, W, 2, z) == s_continued(U, 1, z, W)


def test_M2_at_origin():
    assert abs(M_n(enumerate_walk_classes(2), U, W, 2, 0.0) - (-1.5j * math.pi)) < 1e-14


@pytest.mark.parametrize("n", range(1, 16, 2))
def test_odd_M_vanish(n):
    assert M_n(enumerate_walk_classes(n), U, W, 3, 0.1 - 0.05j) == 0


def test_M2_M4_identities(table):
    rng = np.random.default_rng(11)
    for z in random_points(rng, 100):
        q = int(rng.integers(1, 9))
        exp = Expansion(U, W, q, 4, table=table)
        M, _ = exp.coefficients(z, 4)
        assert abs(M[2] - (q + 1) * s(2, z) * s(1, z)) <= 1e-12 * max(1, abs(M[2]))
        m4 = (q + 1) * s(3, z) * s(2, z) + (q + 1) * q * s(3, z) * s(1, z) ** 2 + (q + 1) * q * s(2, z) ** 2 * s(1, z)
        assert abs(M[4] - m4) <= 1e-12 * max(1, abs(m4))


def walk_sum(n, q, svals):
    """(-1)^n sum over explicit walks of prod_x s_{nu(x)}; independent of the class table."""
    total = 0j
    for w in brute_force_walks(n, q):
        term = 1 + 0j
        for nu in Counter(w).values():
            term *= svals[nu - 1]
        total += term
    return (-1) ** n * total


@pytest.mark.parametrize("q", [1, 2, 3])
def test_M_n_against_explicit_walks(q, table):
    z = 0.2 - 0.07j
    svals = [s(k, z) for k in range(1, 10)]
    exp = Expansion(U, W, q, 8, table=table)
    M, _ = exp.coefficients(z, 8)
    for n in range(0, 9):
        want = walk_sum(n, q, svals)
        assert abs(M[n] - want) <= 1e-11 * max(1, abs(want))


# --- partial sums --------------------------------------------------------------

def test_partial_order_zero():
    p = m_partial(ExpansionParams(2, 300.0, 0, W, U), 0.1 - 0.1j)
    assert abs(p.value - s(1, 0.1 - 0.1j) / 300.0) < 1e-16


def test_partial_example_lambda50():
    p = m_partial(ExpansionParams(2, 50.0, 3, W, U), 0.0)
    want = (1 / 50) * (1j * math.pi / 2) + (1 / 50**3) * (-1.5j * math.pi)
    assert abs(p.value - want) < 1e-16
    assert not p.rigorous  # 50 < lambda0


def test_partial_contains_neumann_sum():
    # independent route: explicit walks and s_k on the upper half-plane, summed to n = 10
    q, lam, z = 2, 20.0, 0.1 + 0.4j
    svals = [s(k, z) for k in range(1, 12)]
    ref = sum(lam ** (-n - 1) * walk_sum(n, q, svals) for n in range(0, 11, 2))
    y = lam * z.imag
    r = (q + 1) / y
    ref_tail = r**11 / (y * (1 - r))
    exp = Expansion(U, W, q, 7)
    for N in (0, 1, 3, 5, 7):
        p = exp.partial(lam, z, N)
        assert p.rigorous
        assert abs(p.value - ref) <= p.remainder_bound + ref_tail


def test_partial_neumann_consistency(table):
    q = 2
    budget = remainder_budget(W, q, U, 0)
    lam = 2 * budget.lambda0
    exp = Expansion(U, W, q, 12, table=table)
    K, Q = budget.K_delta, budget.Q_delta
    for z in (0.1 + 0.1j, -0.4 + 0.05j):
        assert z.imag > (q + 1) / lam
        sums = [exp.partial(lam, z, N).value for N in range(13)]
        for N in range(12):
            tail = K / lam * sum((Q / lam) ** n for n in range(N + 1, 13))
            assert abs(sums[12] - sums[N]) <= tail


def test_partial_outside_any_region():
    exp = Expansion(U, W, 2, 3)
    with pytest.raises(DomainError):
        exp.partial(100.0, 0.0 - 0.5j, 3)
    p = exp.partial(1.0, 2.0 + 0.1j, 3)
    assert not p.rigorous and math.isinf(p.remainder_bound)


# --- budget ------------------------------------------------------------------

def test_budget_values():
    b = remainder_budget(W, 2, U, 3)
    assert b.C_delta == pytest.approx(1.9712388980, abs=1e-9)
    assert b.K_delta == pytest.approx(13.1415926536, abs=1e-9)
    assert b.Q_delta == pytest.approx(39.4247779608, abs=1e-9)
    assert b.lambda0 == pytest.approx(78.8495559215, abs=1e-9)
    assert b.C_N_delta == pytest.approx(2 * b.K_delta * b.Q_delta**4, rel=1e-15)
    assert b.rigorous


@pytest.mark.parametrize("q", [1, 2, 5, 40])
def test_budget_structure(q):
    for N in range(1, 8):
        prev, cur = remainder_budget(W, q, U, N - 1), remainder_budget(W, q, U, N)
        assert cur.C_N_delta / prev.C_N_delta == pytest.approx(cur.Q_delta, rel=1e-13)
        assert cur.lambda0 >= 2 * (q + 1) / W.delta
        assert cur.lambda0 >= 2 * cur.Q_delta


def test_sharp_norm_is_flagged():
    b = remainder_budget(W, 4, U, 3, sharp_norm=True)
    assert not b.rigorous and b.Q_delta == pytest.approx(4 * b.K_delta)
    d = dos_density(ExpansionParams(4, 1e4, 3, W, U, sharp_norm=True), 0.0)
    assert not d.rigorous


# --- density of states ----------------------------------------------------------

def test_a0_uniform():
    for xi in (-0.4, 0.0, 0.33):
        assert dos_coefficient(0, U, W, 2, xi) == pytest.approx(0.5, abs=1e-15)


def test_a2_uniform():
    assert dos_coefficient(2, U, W, 2, 0.0) == pytest.approx(-1.5, abs=1e-14)
    wide = AnalyticWindow((-0.6, 0.6), 0.3, 0.15)
    assert dos_coefficient(2, U, wide, 2, 0.5) == pytest.approx(-2.0, abs=1e-14)


def test_a0_is_density_for_semicircle():
    law = semicircle_law(W)
    for xi in (-0.45, 0.0, 0.2):
        assert dos_coefficient(0, law, W, 2, xi) == pytest.approx(2 / math.pi * math.sqrt(1 - xi**2), abs=1e-10)


def test_xi_outside_interval():
    for xi in (-0.5, 0.5, 0.7):
        with pytest.raises(DomainError):
            dos_coefficient(0, U, W, 2, xi)
        with pytest.raises(DomainError):
            dos_density(ExpansionParams(2, 100.0, 3, W, U), xi)


def test_dos_density_example():
    d = dos_density(ExpansionParams(2, 100.0, 3, W, U), 0.0)
    assert d.value == pytest.approx(0.0049985, abs=1e-15)
    b = remainder_budget(W, 2, U, 3)
    assert d.remainder_bound == pytest.approx(b.C_N_delta * 100.0**-5 / math.pi, rel=1e-14)
    assert d.rigorous
    assert d.terms[1] == 0 and d.terms[3] == 0


def test_odd_order_does_not_change_value():
    for m in (1, 2):
        lo = dos_density(ExpansionParams(2, 500.0, 2 * m, W, U), 0.2)
        hi = dos_density(ExpansionParams(2, 500.0, 2 * m + 1, W, U), 0.2)
        assert lo.value == hi.value
        assert hi.remainder_bound < lo.remainder_bound


def test_leading_term_limit():
    errs = [abs(lam * dos_density(ExpansionParams(2, lam, 3, W, U), 0.1).value - 0.5) for lam in (1e2, 1e3, 1e4)]
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-7


def test_uniform_two_term_examples():
    assert uniform_two_term(1.0, 2, 10.0, 0.0) == pytest.approx(0.0485, abs=1e-15)
    assert uniform_two_term(1.0, 2, 10.0, 0.5) == pytest.approx(0.048, abs=1e-15)
    with pytest.raises(DomainError):
        uniform_two_term(1.0, 2, 10.0, 1.0)


@pytest.mark.parametrize("q", [2, 3, 6])
def test_uniform_two_term_matches_pipeline(q):
    exp = Expansion(U, W, q, 3)
    for lam in (10.0, 100.0, 1e3):
        params = ExpansionParams(q, lam, 3, W, U)
        for xi in np.linspace(-0.45, 0.45, 7):
            d = dos_density(params, float(xi), exp)
            assert abs(d.value - uniform_two_term(1.0, q, lam, float(xi))) <= 1e-12
            assert d.coefficients[2] == pytest.approx(uniform_a2(1.0, q, float(xi)), abs=1e-12)


def test_positivity_at_strong_disorder():
    q = 2
    b = remainder_budget(W, q, U, 3)
    for lam in (b.lambda0, 4 * b.lambda0, 16 * b.lambda0):
        params = ExpansionParams(q, lam, 3, W, U)
        for xi in np.linspace(-0.45, 0.45, 9):
            d = dos_density(params, float(xi))
            assert d.rigorous and d.value > 0
            if 0.5 / lam > 2 * d.remainder_bound:
                assert d.value > d.remainder_bound


def test_remainder_scaling_and_bound(table):
    q = 2
    exp = Expansion(U, W, q, 9, table=table)
    for N in (1, 3):
        b = remainder_budget(W, q, U, N)
        lams = [b.lambda0 * m for m in (4, 8, 16, 32)]
        for z in (0.0, 0.4 - 0.1j, -0.6 + 0.05j):
            tails = [abs(exp.tail(l, z, N, 9)) for l in lams]
            slope = np.polyfit(np.log(lams), np.log(tails), 1)[0]
            assert abs(slope + N + 2) <= 0.3
            assert all(t <= b.bound(l) for t, l in zip(tails, lams))


def test_tail_matches_difference_of_partials():
    exp = Expansion(U, W, 2, 9)
    z, lam = 0.1 - 0.05j, 500.0
    diff = exp.partial(lam, z, 9).value - exp.partial(lam, z, 3).value
    assert abs(exp.tail(lam, z, 3, 9) - diff) < 1e-17

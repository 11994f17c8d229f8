import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import eval_gegenbauer, eval_legendre

from onsager.polybasis import (
    BasisIndex,
    gegenbauer_at_one,
    gegenbauer_eval,
    harmonic_count,
    legendre_eval,
    legendre_table,
    quadrature_rule,
    surface_area,
    weighted_integral,
    zonal_rule,
)


@pytest.mark.parametrize("D, n, expected", [
    (3, 0, 1), (3, 1, 3), (3, 2, 5), (3, 4, 9),   # 2n + 1 for D = 3
    (4, 2, 9), (4, 4, 25),                        # (n + 1)^2 for D = 4
    (5, 2, 14),
])
def test_harmonic_count_small_values(D, n, expected):
    assert harmonic_count(D, n) == expected


def test_harmonic_count_exact_integers():
    # exact integer arithmetic must survive large arguments
    value = harmonic_count(30, 40)
    assert isinstance(value, int)
    # cross-check against the difference of binomial counts
    dim = math.comb(40 + 29, 29) - math.comb(38 + 29, 29)
    assert value == dim


@pytest.mark.parametrize("D, expected", [
    (2, 2 * math.pi),
    (3, 4 * math.pi),
    (4, 2 * math.pi ** 2),
])
def test_surface_area_closed_forms(D, expected):
    assert surface_area(D) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("bad_call", [
    lambda: harmonic_count(2, 1),
    lambda: harmonic_count(3, -1),
    lambda: surface_area(1),
    lambda: BasisIndex(2, 1),
    lambda: BasisIndex(3, -2),
    lambda: quadrature_rule(0),
    lambda: zonal_rule(2, 8),
])
def test_input_validation(bad_call):
    with pytest.raises(ValueError):
        bad_call()


def test_gegenbauer_matches_scipy():
    t = np.linspace(-1.0, 1.0, 31)
    for D in (3, 4, 5, 7):
        alpha = (D - 2) / 2
        for n in range(0, 9):
            ours = gegenbauer_eval(BasisIndex(D, n), t)
            ref = eval_gegenbauer(n, alpha, t)
            assert np.allclose(ours, ref, rtol=1e-12, atol=1e-12)


def test_gegenbauer_derivative_matches_finite_difference():
    rng = np.random.default_rng(11)
    t = rng.uniform(-0.95, 0.95, size=16)
    h = 1e-6
    for D in (3, 5):
        for n in (1, 3, 6):
            idx = BasisIndex(D, n)
            deriv = gegenbauer_eval(idx, t, deriv=1)
            fd = (gegenbauer_eval(idx, t + h)
                  - gegenbauer_eval(idx, t - h)) / (2 * h)
            assert np.allclose(deriv, fd, rtol=1e-7, atol=1e-7)


def test_gegenbauer_at_one_matches_recurrence():
    for D in (3, 4, 6):
        alpha = (D - 2) / 2
        for n in range(10):
            assert gegenbauer_at_one(alpha, n) == pytest.approx(
                eval_gegenbauer(n, alpha, 1.0), rel=1e-13)


def test_legendre_reduces_to_classical_for_d3():
    t = np.linspace(-1.0, 1.0, 41)
    for n in range(9):
        assert np.allclose(legendre_eval(3, n, t), eval_legendre(n, t),
                           rtol=1e-12, atol=1e-12)


def test_legendre_normalization_and_bound():
    t = np.linspace(-1.0, 1.0, 201)
    for D in (3, 4, 5):
        for n in range(12):
            assert legendre_eval(D, n, 1.0) == pytest.approx(1.0, abs=1e-12)
            assert np.max(np.abs(legendre_eval(D, n, t))) <= 1.0 + 1e-12


def test_legendre_table_matches_single_evaluations():
    t = np.linspace(-1.0, 1.0, 17)
    for D in (3, 5):
        table = legendre_table(D, 10, t)
        assert table.shape == (11, t.size)
        for n in range(11):
            assert np.allclose(table[n], legendre_eval(D, n, t),
                               rtol=1e-13, atol=1e-13)


def test_scalar_arguments_return_floats():
    assert isinstance(legendre_eval(3, 4, 0.3), float)
    assert isinstance(gegenbauer_eval(BasisIndex(4, 3), -0.2), float)


def test_domain_check():
    with pytest.raises(ValueError):
        legendre_eval(3, 2, 1.0 + 1e-9)


def test_quadrature_rule_structure():
    rule = quadrature_rule(24)
    assert rule.order == 24
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(2.0, rel=1e-14)


def test_quadrature_exactness_degree():
    rule = quadrature_rule(12)
    for k in range(0, 24, 2):
        exact = 2.0 / (k + 1)
        got = float(np.dot(rule.weights, rule.nodes ** k))
        assert got == pytest.approx(exact, rel=1e-13)


def test_weighted_integral_closed_forms():
    rule = quadrature_rule(64)
    # D = 3: flat weight
    assert weighted_integral(lambda t: t ** 2, 3, rule) == pytest.approx(
        2.0 / 3.0, rel=1e-13)
    # D = 4: semicircle weight, area pi/2
    assert weighted_integral(lambda t: 1.0, 4, rule) == pytest.approx(
        math.pi / 2.0, rel=1e-12)
    # D = 5: int (1 - t^2) dt = 4/3
    assert weighted_integral(lambda t: 1.0, 5, rule) == pytest.approx(
        4.0 / 3.0, rel=1e-13)


def test_weighted_integral_matches_adaptive_quadrature():
    rule = quadrature_rule(64)
    for D in (3, 4, 6):
        expo = (D - 3) / 2

        def integrand(t):
            return math.exp(-t) * (1 - t * t) ** expo

        ref, _ = quad(integrand, -1.0, 1.0)
        got = weighted_integral(lambda t: np.exp(-t), D, rule)
        assert got == pytest.approx(ref, rel=1e-10)


def test_zonal_norm_identity():
    # int_0^pi P_n(D, cos)^2 sin^(D-2) = sigma_D / (sigma_(D-1) N(D, n))
    for D in (3, 4, 5):
        nodes, weights = zonal_rule(D, 96)
        table = legendre_table(D, 12, nodes)
        for n in range(13):
            got = float(np.dot(weights, table[n] ** 2))
            expected = surface_area(D) / (surface_area(D - 1)
                                          * harmonic_count(D, n))
            assert got == pytest.approx(expected, rel=1e-12)


def test_zonal_orthogonality():
    for D in (3, 4):
        nodes, weights = zonal_rule(D, 96)
        table = legendre_table(D, 10, nodes)
        gram = table @ (weights[:, None] * table.T)
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-12

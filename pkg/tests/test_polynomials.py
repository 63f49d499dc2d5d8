from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from oracles import log_discriminant_gradient, random_real_rooted

from cliffmat.matrices import EnsembleConfig, realize, sample_blocks
from cliffmat.polynomials import (MonicPolynomial, char_poly, det_m_minus_x, discriminant, eigen_spectrum,
                                  exact_vieta, fraction_det, gamma_coeff_entries, gamma_coeff_matrix, hessenberg_char_poly,
                                  is_real_rooted, jacobian_factor, poly_root_power, power_residual,
                                  real_rooted_batch, resultant, root_jacobian, summarize_eigenvalues, vieta)

roots_st = st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=6)


def test_char_poly_small_cases():
    assert np.array_equal(char_poly(np.zeros((2, 2))).full, [0, 0, 1])
    assert np.allclose(char_poly(np.diag([1.0, 2.0])).full, [2, -3, 1])


def test_char_poly_rejects_nonfinite():
    with pytest.raises(ValueError):
        char_poly(np.array([[np.nan, 0], [0, 1]]))


def test_det_m_minus_x_convention():
    P = char_poly(np.diag([1.0, 2.0, 3.0]))
    # det(M - X) = -(X - 1)(X - 2)(X - 3) for odd degree
    assert np.allclose(det_m_minus_x(P), -P.full)


def test_hessenberg_cross_check(rng):
    A = rng.standard_normal((8, 8))
    R = A + A.T
    assert np.allclose(hessenberg_char_poly(R), np.poly(R)[::-1][:-1], rtol=1e-9, atol=1e-9)


def test_p1_quartic_has_double_roots():
    M = sample_blocks(EnsembleConfig(2, 1, seed=5))
    P = char_poly(realize(M))
    assert P.degree == 4
    s = summarize_eigenvalues(P.roots)
    assert s.multiplicities.tolist() == [2, 2]


def test_eigen_spectrum_examples():
    s = eigen_spectrum(np.eye(4))
    assert s.distinct.tolist() == [1.0] and s.multiplicities.tolist() == [4]
    s = eigen_spectrum(realize(sample_blocks(EnsembleConfig(2, 2, seed=1))))
    assert s.multiplicities.tolist() == [4, 4]
    s = eigen_spectrum(realize(sample_blocks(EnsembleConfig(4, 0, seed=1))))
    assert s.multiplicities.tolist() == [1] * 4


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12))
def test_spectrum_summary_invariants(vals):
    s = summarize_eigenvalues(np.array(vals))
    assert s.multiplicities.sum() == len(vals)
    assert np.all(np.diff(s.distinct) > 0) or len(s.distinct) == 1


def test_resultant_examples():
    assert resultant(MonicPolynomial([-1.0]), MonicPolynomial([1.0])) == pytest.approx(2.0)
    P, Q = MonicPolynomial([-1.0, 0.0]), MonicPolynomial([0.0])
    assert resultant(P, Q) == pytest.approx(-1.0)
    assert resultant(P, Q, exact=True) == -1


def test_resultant_exact_integer_roots():
    x, y = [1, -2, 4], [3, 0, -1]
    expected = 1
    for a in x:
        for b in y:
            expected *= a - b
    P, Q = vieta(x), vieta(y)
    assert resultant(P, Q, exact=True) == expected
    assert resultant(P, Q) == pytest.approx(expected, rel=1e-10)


@given(st.lists(st.integers(-4, 4), min_size=1, max_size=4), st.lists(st.integers(-4, 4), min_size=1, max_size=4))
def test_resultant_antisymmetry(x, y):
    P, Q = vieta(x), vieta(y)
    r1, r2 = resultant(P, Q, exact=True), resultant(Q, P, exact=True)
    assert r1 == (-1) ** (len(x) * len(y)) * r2


def test_discriminant_examples():
    assert discriminant(MonicPolynomial([-1.0, 0.0])) == pytest.approx(4.0)
    assert discriminant(MonicPolynomial([0.0, 0.0])) == 0.0
    assert discriminant(vieta([1, 2, 3]), exact=True) == 4
    assert discriminant(MonicPolynomial([1.0, 0.0])) == pytest.approx(-4.0)


@given(roots_st)
def test_discriminant_matches_root_product(roots):
    P = vieta(roots)
    x = np.array(roots)
    i, j = np.triu_indices(len(x), 1)
    expected = np.prod((x[i] - x[j]) ** 2)
    # the Sylvester determinant loses about eps * (d max|a_k|)^(2d-1) to rounding
    slack = 1e-13 * (len(x) * max(1.0, np.abs(P.full).max())) ** (2 * len(x) - 1)
    assert discriminant(P) >= -slack
    assert discriminant(P) == pytest.approx(expected, rel=1e-6, abs=slack)
    assert float(discriminant(P, exact=True)) == pytest.approx(expected, rel=1e-6, abs=slack)


def test_vieta_and_jacobian_examples():
    P = vieta([0.0, 0.0])
    assert np.array_equal(P.full, [0, 0, 1]) and jacobian_factor([0.0, 0.0]) == 0
    assert np.array_equal(vieta([1, 2, 3]).full, [-6, 11, -6, 1])
    assert jacobian_factor([1, 2, 3]) == 2


def test_jacobian_matches_finite_differences(rng):
    x = rng.standard_normal(4)
    h = 1e-6
    J = np.zeros((4, 4))
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        J[:, i] = (vieta(x + e).coeffs - vieta(x - e).coeffs) / (2 * h)
    assert abs(np.linalg.det(J)) == pytest.approx(jacobian_factor(x), rel=1e-6)
    assert np.allclose(J, root_jacobian(x), atol=1e-8)


def test_exact_vieta_is_correctly_rounded():
    roots = [0.1, -0.3, 0.7]
    exact = [Fraction(1)]
    for r in roots:
        fr = Fraction(r)
        exact = [(exact[k - 1] if k else 0) - fr * (exact[k] if k < len(exact) else 0) for k in range(len(exact) + 1)]
    assert exact_vieta(roots).tolist() == [float(c) for c in exact]


def test_root_power_examples():
    Q = MonicPolynomial([-1.0, 0.0])
    P = Q ** 2
    R, res = poly_root_power(P, 2)
    assert res == 0.0 and np.allclose(R.coeffs, Q.coeffs)
    _, res = poly_root_power(MonicPolynomial([-1.0, 0.0]), 2)
    assert res > 0.1
    with pytest.raises(ValueError):
        poly_root_power(MonicPolynomial([1.0, 2.0, 3.0]), 2)


def test_root_power_on_p2_char_poly():
    M = sample_blocks(EnsembleConfig(2, 2, seed=3))
    P = char_poly(realize(M))
    Q, res = poly_root_power(P, 4)
    assert res <= 1e-8 * np.linalg.norm(P.full)
    assert Q.degree == 2


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=4), st.sampled_from([2, 4, 8]))
def test_root_power_inverts_power(roots, a):
    Q = MonicPolynomial(exact_vieta(roots)[:-1])
    P = MonicPolynomial(np.array(np.polynomial.polynomial.polypow(Q.full, a)[:-1]))
    R, res = poly_root_power(P, a)
    assert np.max(np.abs(R.coeffs - Q.coeffs)) <= 1e-12 * max(1.0, np.abs(Q.coeffs).max()) ** 1 or \
        res <= 1e-12 * np.linalg.norm(P.full)


def test_power_residual_exact():
    Q = MonicPolynomial([0.5, -1.25])
    P = MonicPolynomial(np.polynomial.polynomial.polypow(Q.full, 3)[:-1])
    assert not power_residual(P, Q, 3).any()


def test_gamma_matrix_examples():
    G = gamma_coeff_matrix(MonicPolynomial([0.7, -0.4]))
    assert G[1, 1] == pytest.approx(2.0)
    assert G[0, 1] == pytest.approx(-0.4) and G[1, 0] == pytest.approx(-0.4)


@given(roots_st)
def test_gamma_matrix_from_roots(roots):
    P = vieta(roots)
    J = root_jacobian(roots)
    G = gamma_coeff_matrix(P)
    assert np.allclose(G, J @ J.T, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(J).max() ** 2))


def test_det_gamma_equals_discriminant(rng):
    for _ in range(100):
        P = random_real_rooted(rng, int(rng.integers(2, 7)))
        D = discriminant(P)
        assert np.linalg.det(gamma_coeff_matrix(P)) == pytest.approx(D, rel=1e-8)


def test_det_gamma_equals_discriminant_exactly(rng):
    for _ in range(20):
        P = vieta(rng.uniform(-2, 2, int(rng.integers(2, 6))))
        exact = [Fraction(c) for c in P.full]
        assert fraction_det(gamma_coeff_entries(exact)) == discriminant(P, exact=True)


@pytest.mark.parametrize("d", range(2, 7))
def test_divergence_identity_symbolic(d):
    a = sp.symbols(f"a0:{d}")
    full = list(a) + [sp.Integer(1)]
    G = gamma_coeff_entries(full)
    coef = lambda i: full[i] if i <= d else 0
    for p in range(d):
        div = sp.expand(sum(sp.diff(G[k][p], a[k]) for k in range(d)))
        assert sp.simplify(div + sp.Rational(1, 2) * (p + 1) * (p + 2) * coef(p + 2)) == 0


def test_gamma_of_log_discriminant(rng):
    for _ in range(20):
        d = int(rng.integers(2, 7))
        P = random_real_rooted(rng, d)
        G = gamma_coeff_matrix(P)
        grad = log_discriminant_gradient(P)
        for X in rng.uniform(-3, 3, 3):
            lhs = X ** np.arange(d) @ G @ grad
            rhs = -P.derivative_values(X, 2)
            assert lhs == pytest.approx(rhs, rel=1e-5)


def test_real_rootedness():
    assert is_real_rooted(vieta([1, 2, 3]).full)
    assert not is_real_rooted(np.array([1.0, 0.0, 1.0]))
    # positive discriminant but a complex pair: (X^2 + 1)(X^2 + 4)
    quartic = np.polynomial.polynomial.polymul([1, 0, 1], [4, 0, 1])
    assert discriminant(MonicPolynomial(quartic[:-1])) > 0
    assert not is_real_rooted(quartic)
    batch = np.array([vieta([0, 1, 2]).coeffs, quartic[:-1][:3]])
    assert real_rooted_batch(batch).tolist() == [True, False]


def test_json_round_trip():
    P = MonicPolynomial([1.5, -2.0, 0.25])
    assert P.to_json() == "[1.5, -2.0, 0.25, 1.0]"
    assert np.array_equal(MonicPolynomial.from_json(P.to_json()).coeffs, P.coeffs)

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cliffmat.clifford import predicted_multiplicity
from cliffmat.identities import (ResolventAssembler, check_identities, check_reduced_identities,
                                 clifford_constant, collect_samples, diagonal_generator_numeric, drift_operator,
                                 evaluation_grid, fit_alpha_beta_gamma, gamma_P_closed, gamma_P_numeric,
                                 generator_case, L_over_P_closed, L_P_numeric, reduced_constants, snap_rational, solve_multiplicity,
                                 sphere_dimension)
from cliffmat.matrices import EnsembleConfig, sample_blocks
from cliffmat.polynomials import MonicPolynomial, vieta

F = Fraction


@pytest.mark.parametrize("case, triple", [
    (0, (F(-1, 2), 0, 1)), (1, (-2, F(3, 2), 2)), (2, (-5, F(9, 2), 4)),
    ("real", (F(-1, 2), 0, 1)), ("hermitian", (-2, F(3, 2), 2)), ("quaternion", (-5, F(9, 2), 4))])
def test_named_constants(case, triple):
    c = generator_case(case)
    assert (c.alpha, c.beta, c.gamma) == tuple(F(v) for v in triple)


@pytest.mark.parametrize("p", range(0, 13))
def test_constants_reproduce_predicted_multiplicity(p):
    c = generator_case(p)
    sol = solve_multiplicity(c.alpha, c.beta, c.gamma)
    assert sol.positive_integer == predicted_multiplicity(p).a


def test_sign_correction_pins_p4_p8():
    assert clifford_constant(4) == 18 and clifford_constant(8) == 248
    for p in (4, 8):
        c = generator_case(p)
        assert solve_multiplicity(c.alpha, c.beta, c.gamma).positive_integer == predicted_multiplicity(p).a


def test_gamma_closed_example():
    P = MonicPolynomial([0.0, 0.0])
    assert gamma_P_closed(generator_case(0), P, 1.0, 2.0) == pytest.approx(4.0)
    # diagonal limit gamma (P'^2 - P P'')
    assert gamma_P_closed(generator_case(1), P, 1.0, 1.0) == pytest.approx(2 * (4 - 2))


@pytest.mark.parametrize("p", [0, 1, 2])
def test_gamma_numeric_matches_closed(p):
    M = sample_blocks(EnsembleConfig(2, p, seed=21))
    asm = ResolventAssembler(M)
    xs = evaluation_grid(asm.eigenvalues, 5)
    for X in xs:
        for Y in xs:
            num = gamma_P_numeric(M, X, Y)
            cl = gamma_P_closed(generator_case(p), asm.P, X, Y)
            assert num == pytest.approx(cl, rel=1e-8, abs=1e-10 * abs(asm.P(X) * asm.P(Y)))


def test_L_numeric_named_forms():
    for p, form in [(0, lambda P, X: -0.5 * P.derivative_values(X, 2)),
                    (1, lambda P, X: 1.5 * P.derivative_values(X, 1) ** 2 / P(X) - 2 * P.derivative_values(X, 2)),
                    (2, lambda P, X: 4.5 * P.derivative_values(X, 1) ** 2 / P(X) - 5 * P.derivative_values(X, 2))]:
        M = sample_blocks(EnsembleConfig(2, p, seed=5))
        asm = ResolventAssembler(M)
        for X in evaluation_grid(asm.eigenvalues, 5):
            assert L_P_numeric(M, X) == pytest.approx(form(asm.P, X), rel=1e-7)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_finite_difference_cross_check(p):
    M = sample_blocks(EnsembleConfig(2, p, seed=2))
    asm = ResolventAssembler(M)
    X = evaluation_grid(asm.eigenvalues, 3)[0]
    assert np.allclose(asm.fd_first(X), asm.first(X), rtol=1e-6, atol=1e-7)
    assert np.allclose(asm.fd_second_diag(X), asm.second_diag(X), rtol=1e-4, atol=1e-5)


@pytest.mark.parametrize("p", range(0, 6))
@pytest.mark.parametrize("drift", ["none", "ou", "sphere"])
def test_check_identities(p, drift):
    case = generator_case(p)
    if drift != "none":
        case = case.with_drift(drift)
    for r in range(3):
        reports = check_identities(sample_blocks(EnsembleConfig(2, p, seed=30), r), case)
        assert all(rep.passed for rep in reports), [rep.as_dict() for rep in reports]
        if p == 3:
            assert {rep.name for rep in reports} >= {"gamma_log[+]", "gamma_log[-]"}


def test_sphere_dimension_override():
    case = generator_case(1)
    assert sphere_dimension(case, 4) == 10
    assert sphere_dimension(case.with_drift("sphere", sphere_dim=3.0), 4) == 3.0
    M = sample_blocks(EnsembleConfig(2, 1, seed=1))
    reports = check_identities(M, case.with_drift("sphere", sphere_dim=7.5))
    assert all(rep.passed for rep in reports)


@pytest.mark.parametrize("p, normalized", [(0, -0.5), (1, -1.0), (2, -2.0), (4, -2.0), (5, -1.0), (6, -0.5)])
def test_reduced_constants(p, normalized):
    case = generator_case(p)
    red = reduced_constants(case, predicted_multiplicity(p).a)
    assert red.normalized == pytest.approx(normalized)
    assert red.repulsion == pytest.approx(predicted_multiplicity(p).repulsion)


@pytest.mark.parametrize("p", [0, 1, 2, 3, 4, 5])
def test_reduced_identities_numeric(p):
    a = predicted_multiplicity(p).a
    factor = "+" if p == 3 else None
    M = sample_blocks(EnsembleConfig(2, p, seed=8))
    rep = check_reduced_identities(M, a, factor=factor)
    assert rep.passed, rep.as_dict()


def test_euler_on_top_monomial_vanishes():
    P = MonicPolynomial(np.zeros(4))
    assert not np.any(drift_operator("euler", generator_case(0), P).as_polynomial())


def test_clifford_euler_p1():
    P = vieta([0.3, -1.1])
    expr = drift_operator("euler", generator_case(1), P)
    k = np.arange(3)
    # s (d P - X P') with s = 2 and d = 2 is 2 (2 P - X P')
    assert np.allclose(expr.as_polynomial(), 2 * (2 - k) * P.full)


def test_diag_ou_mean_is_monomial():
    for n in range(1, 5):
        P = MonicPolynomial(np.zeros(n))
        assert not np.any(drift_operator("diag_ou", generator_case(0), P).as_polynomial())


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_ou_annihilates_hermite_at_p0(n):
    # at p = 0 there is no P'^2/P term, so the stationary mean (monic physicists' Hermite) is killed
    H = np.polynomial.hermite.herm2poly([0] * n + [1])
    P = MonicPolynomial(H[:-1] / H[-1])
    ou = drift_operator("ou", generator_case(0), P)
    assert ou.ratio == 0.0
    assert np.allclose(ou.as_polynomial(), 0.0, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_diag_sphere_equals_minus_D2_minus_n2_D(n, rng):
    P = vieta(rng.standard_normal(n))
    case = generator_case(0)
    sph = drift_operator("diag_sphere", case, P).as_polynomial()
    D = drift_operator("euler", case, P).as_polynomial()
    D2 = drift_operator("euler2", case, P).as_polynomial()
    assert np.allclose(sph, -D2 - (n - 2) * D, atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_ball_equals_minus_D2_minus_q1_D(n, rng):
    P = vieta(rng.standard_normal(n))
    case = generator_case(0)
    q = 2.5
    ball = drift_operator("ball", case, P, ball_param=q).as_polynomial()
    D = drift_operator("euler", case, P).as_polynomial()
    D2 = drift_operator("euler2", case, P).as_polynomial()
    assert np.allclose(ball, -D2 - (q - 1) * D, atol=1e-12)


@pytest.mark.parametrize("kind", ["diag_ou", "diag_sphere", "ball"])
def test_diagonal_operators_match_numeric(kind, rng):
    for n in (2, 3, 4):
        x = rng.standard_normal(n)
        if kind == "diag_sphere":
            x /= np.linalg.norm(x)
        if kind == "ball":
            x *= 0.9 / np.linalg.norm(x)
        P = vieta(x)
        expr = drift_operator(kind, generator_case(0), P, ball_param=1.5)
        for X in (-2.1, 0.37, 1.9):
            num = diagonal_generator_numeric(kind, x, X, ball_param=1.5)
            assert expr(X) == pytest.approx(num, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("p", [0, 1, 2, 4])
def test_euler_squared_on_samples(p):
    M = sample_blocks(EnsembleConfig(2, p, seed=3))
    asm = ResolventAssembler(M)
    case = generator_case(p)
    s = case.euler_scale
    D2 = drift_operator("euler2", case, asm.P)
    for X in evaluation_grid(asm.eigenvalues, 4):
        e1, e2 = asm.euler_log(X)
        assert (e2 + e1 * e1) * asm.P(X) == pytest.approx(D2(X) / s ** 2, rel=1e-8)


@pytest.mark.parametrize("p, triple", [(0, (-0.5, 0, 1)), (1, (-2, 1.5, 2)), (2, (-5, 4.5, 4))])
def test_fit_recovers_constants(p, triple):
    samples = []
    for r in range(4):
        samples += collect_samples(sample_blocks(EnsembleConfig(2, p, seed=1), r))
    fit = fit_alpha_beta_gamma(samples)
    assert fit.well_conditioned
    assert np.allclose(fit.triple, triple, atol=1e-6)


@pytest.mark.parametrize("p", [4, 5, 6])
def test_fit_gives_multiplicity_eight(p):
    samples = []
    for r in range(3):
        samples += collect_samples(sample_blocks(EnsembleConfig(2, p, seed=4), r))
    fit = fit_alpha_beta_gamma(samples)
    snapped = [snap_rational(v, 2, 1e-6) for v in fit.triple]
    assert solve_multiplicity(*snapped).positive_integer == 8


def test_solve_multiplicity_examples():
    sol = solve_multiplicity(F(-2), F(3, 2), F(2))
    assert sol.integer_roots == (-2, 2) and sol.positive_integer == 2
    sol = solve_multiplicity(F(-5), F(9, 2), F(4))
    assert sol.integer_roots == (-2, 4) and sol.positive_integer == 4
    sol = solve_multiplicity(F(-1, 2), F(0), F(1))
    assert sol.integer_roots == (-2, 1)
    assert not solve_multiplicity(0, 1, 1).real
    assert solve_multiplicity(F(-1), F(1), F(2)).roots == (F(2),)
    float_sol = solve_multiplicity(-5.0000001, 4.5, 4.0)
    assert 4 in float_sol.integer_roots


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=10, unique=True), st.integers(3, 8))
def test_grid_respects_guard_band(eigs, count):
    eigs = np.array(eigs)
    xs = evaluation_grid(eigs, count)
    lam = np.unique(np.round(np.sort(eigs), 9))
    gap = (lam[-1] - lam[0]) / (len(lam) - 1) if len(lam) > 1 and lam[-1] > lam[0] else 1.0
    assert len(xs) >= min(count, 3)
    assert np.min(np.abs(xs[:, None] - lam[None, :])) >= 0.5 * gap - 1e-12


def test_closed_forms_reject_roots():
    P = vieta([1.0, 2.0])
    with pytest.raises(ValueError):
        L_over_P_closed(generator_case(0), P, 1.0)

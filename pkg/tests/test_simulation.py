import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cliffmat.clifford import build_signature, predicted_multiplicity
from cliffmat.identities import generator_case
from cliffmat.matrices import EnsembleConfig, coordinate_layout
from cliffmat.polynomials import MonicPolynomial, char_poly, discriminant, multiplicity_clusters_ok, vieta
from cliffmat.simulation import (CoefficientDynamics, SimConfig, SimulationAbort, simulate_coefficients,
                                 simulate_matrix, trace_norm_sq, weak_order_check)
from cliffmat.spectral import sample_eigenvalues, two_sample_test


def test_config_validation():
    for dt in (0.0, -1e-3, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            SimConfig(dt=dt, steps=10)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, steps=-1)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, steps=1, stride=0)
    cfg = SimConfig(dt=0.1, steps=10, stride=3)
    assert list(cfg.snapshot_steps) == [0, 3, 6, 9]
    assert cfg.horizon == pytest.approx(1.0)


def test_snapshot_times_monotone():
    traj = simulate_matrix(SimConfig(0.05, 20, "bm", stride=5, paths=2), EnsembleConfig(2, 0))
    assert np.all(np.diff(traj.times) > 0)
    assert np.allclose(traj.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert traj.eigenvalues.shape == (2, 5, 2)


def test_ou_long_run_trace_moment():
    ens = EnsembleConfig(2, 0)
    layout = coordinate_layout(ens.signature, 2)
    traj = simulate_matrix(SimConfig(0.05, 1200, "ou", seed=3, stride=20, paths=40), ens)
    late = traj.eigenvalues[:, traj.times >= 10.0]
    m2 = np.mean(np.sum(late ** 2, axis=-1))
    # two diagonal coordinates of variance 1 and an off-diagonal pair each of variance 1/2
    assert layout.count == 3
    assert m2 == pytest.approx(3.0, rel=0.1)


def test_bm_diagonal_variance_is_time():
    ens = EnsembleConfig(2, 0)
    T = 1.0
    traj = simulate_matrix(SimConfig(0.05, 20, "bm", seed=9, paths=4000), ens)
    layout = coordinate_layout(ens.signature, 2)
    u = traj.final_coordinates
    blocks = layout.unpack(u)
    diag = blocks[:, 0, 0, 0]
    se = T * np.sqrt(2.0 / len(diag))
    assert abs(np.var(diag) - T) < 4 * se
    assert np.allclose(np.var(u, axis=0), layout.metric * T, rtol=0.12)


def test_paths_independent_of_worker_count():
    ens = EnsembleConfig(2, 1)
    a = simulate_matrix(SimConfig(0.01, 50, "ou", seed=4, paths=7, workers=1), ens)
    b = simulate_matrix(SimConfig(0.01, 50, "ou", seed=4, paths=7, workers=3), ens)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    c = simulate_matrix(SimConfig(0.01, 50, "ou", seed=4, paths=3), ens)
    assert np.array_equal(a.eigenvalues[:3], c.eigenvalues)


def test_ou_stationary_matches_direct_sampling():
    ens = EnsembleConfig(2, 1, seed=0)
    traj = simulate_matrix(SimConfig(0.1, 100, "ou", seed=11, stride=100, paths=600), ens)
    sim = traj.eigenvalues[:, -1]
    direct = sample_eigenvalues(EnsembleConfig(2, 1, seed=12), 600)
    assert two_sample_test(sim, direct, permutations=100).p_value > 0.01


def test_sphere_stays_normalized():
    ens = EnsembleConfig(2, 2)
    traj = simulate_matrix(SimConfig(0.01, 30, "sphere", seed=1, stride=10, paths=5), ens)
    assert np.allclose(np.sum(traj.eigenvalues ** 2, axis=-1), 1.0)
    layout = coordinate_layout(ens.signature, 2)
    assert np.allclose(trace_norm_sq(traj.final_coordinates, layout.metric, 2), 1.0)


def test_sphere_rejects_zero_matrix():
    ens = EnsembleConfig(2, 0)
    with pytest.raises(ValueError):
        simulate_matrix(SimConfig(0.01, 2, "sphere"), ens, initial=np.zeros(3))


def test_matrix_simulation_rejects_coefficient_process():
    with pytest.raises(ValueError):
        simulate_matrix(SimConfig(0.01, 2, "coeff"), EnsembleConfig(2, 0))


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_multiplicity_preserved_along_trajectories(p):
    ens = EnsembleConfig(2, p)
    traj = simulate_matrix(SimConfig(0.02, 40, "ou", seed=p, stride=4, paths=3), ens, initial="stationary")
    a = predicted_multiplicity(p).a
    flat = traj.eigenvalues.reshape(-1, traj.eigenvalues.shape[-1])
    ok = [multiplicity_clusters_ok(ev, a) for ev in flat]
    assert np.mean(ok) >= 0.99


@pytest.mark.parametrize("p, n", [(0, 2), (1, 2), (2, 1)])
def test_weak_order_one(p, n, rng):
    layout = coordinate_layout(build_signature(p), n)
    u = rng.standard_normal(layout.count) * np.sqrt(layout.metric)
    rep = weak_order_check(u, layout.metric)
    e1, e2 = rep.errors
    assert e2 < e1
    assert e1 / e2 == pytest.approx(10.0, rel=0.05)
    assert rep.richardson_error < 1e-8 * max(1.0, abs(rep.generator))


@given(st.integers(1, 6), st.integers(0, 10**6))
@settings(max_examples=20)
def test_weak_order_random_quadratic(K, seed):
    r = np.random.default_rng(seed)
    metric = r.uniform(0.5, 1.0, K)
    A = r.standard_normal((K, K))
    H = A + A.T
    u = r.standard_normal(K)
    rep = weak_order_check(u, metric, H)
    scale = 1.0 + np.abs(H).sum() * (1 + u @ u)
    assert rep.errors[1] <= rep.errors[0] + 1e-12 * scale
    assert rep.richardson_error < 1e-9 * scale


def test_coefficient_degree_one_is_brownian():
    P0 = MonicPolynomial([0.3])
    traj = simulate_coefficients(SimConfig(0.05, 20, "coeff", seed=2, paths=4000), P0)
    a0 = traj.coefficients[:, -1, 0]
    # a_0 = -x for the single root x = -0.3, so a_0 is a Brownian motion started at 0.3
    assert abs(a0.mean() - 0.3) < 4 * np.sqrt(1.0 / 4000)
    assert abs(a0.var() - 1.0) < 4 * np.sqrt(2.0 / 4000)
    assert traj.rejections == 0


def test_coefficient_diagonal_matches_vieta_image():
    roots0 = np.array([-1.0, 1.0])
    P0 = vieta(roots0)
    T, paths = 0.5, 1500
    traj = simulate_coefficients(SimConfig(0.005, 100, "coeff", seed=5, stride=100, paths=paths), P0)
    sim = traj.coefficients[:, -1]
    rng = np.random.default_rng(77)
    roots = roots0 + np.sqrt(T) * rng.standard_normal((paths, 2))
    oracle = np.column_stack([roots[:, 0] * roots[:, 1], -(roots[:, 0] + roots[:, 1])])
    assert two_sample_test(sim, oracle, permutations=100).p_value > 0.01


def test_coefficient_sde_matches_matrix_pushforward():
    ens = EnsembleConfig(2, 0)
    init = np.array([-1.0, 0.0, 1.0])
    paths = 1500
    cfg = SimConfig(0.01, 100, "bm", seed=6, stride=100, paths=paths)
    mat = simulate_matrix(cfg, ens, initial=init)
    ev = mat.eigenvalues[:, -1]
    from_matrix = np.column_stack([ev[:, 0] * ev[:, 1], -(ev[:, 0] + ev[:, 1])])
    P0 = char_poly(np.diag([-1.0, 1.0]))
    coeff = simulate_coefficients(SimConfig(0.01, 100, "coeff", seed=8, stride=100, paths=paths), P0,
                                  CoefficientDynamics.from_case(generator_case(0), 1))
    assert two_sample_test(from_matrix, coeff.coefficients[:, -1], permutations=100).p_value > 0.01


def test_discriminant_nonnegative_on_accepted_steps():
    P0 = vieta([-0.05, 0.0, 0.05])
    traj = simulate_coefficients(SimConfig(0.01, 60, "coeff", seed=1, paths=30), P0,
                                 CoefficientDynamics.from_case(generator_case(1), 2))
    for path in range(30):
        for k in range(len(traj.times)):
            P = traj.polynomial(path, k)
            assert discriminant(P) >= -1e-12
            assert np.all(np.abs(np.roots(P.full[::-1]).imag) < 1e-6)


def test_coefficient_rejects_complex_start():
    with pytest.raises(ValueError):
        simulate_coefficients(SimConfig(0.01, 5), MonicPolynomial([1.0, 0.0]))


def test_abort_carries_diagnostics():
    # a huge drift lifts a_0 above a_1^2 / 4 at every step size the retries can reach
    P0 = vieta([-1e-3, 1e-3])
    with pytest.raises(SimulationAbort) as err:
        simulate_coefficients(SimConfig(10.0, 50, seed=0, paths=1), P0, CoefficientDynamics(1.0, 1e6))
    diag = err.value.diagnostics
    assert {"path", "time", "coefficients", "step"} <= set(diag)

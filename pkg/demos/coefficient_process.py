"""Brownian 2x2 symmetric matrix versus the coefficient SDE of its characteristic polynomial."""

import numpy as np

from cliffmat import EnsembleConfig, MonicPolynomial
from cliffmat.identities import generator_case
from cliffmat.simulation import CoefficientDynamics, SimConfig, simulate_coefficients, simulate_matrix
from cliffmat.spectral import two_sample_test


def main(paths=1500):
    mat = simulate_matrix(SimConfig(0.01, 100, "bm", seed=1, stride=100, paths=paths), EnsembleConfig(2, 0),
                          initial=np.array([-1.0, 0.0, 1.0]))
    ev = mat.eigenvalues[:, -1]
    pushed = np.column_stack([ev[:, 0] * ev[:, 1], -ev.sum(axis=1)])
    coeff = simulate_coefficients(SimConfig(0.01, 100, "coeff", seed=2, stride=100, paths=paths),
                                  MonicPolynomial.from_roots([-1.0, 1.0]),
                                  CoefficientDynamics.from_case(generator_case(0), 1))
    direct = coeff.coefficients[:, -1]
    print("mean (a0, a1): matrix", pushed.mean(axis=0).round(3), " SDE", direct.mean(axis=0).round(3))
    print("rejected steps:", coeff.rejections)
    print("two-sample p-value:", round(two_sample_test(pushed, direct).p_value, 4))


if __name__ == "__main__":
    main()

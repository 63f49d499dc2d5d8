"""Random symmetric matrices over Clifford algebras, their diffusions and spectral statistics."""

from .clifford import (CliffordSignature, build_signature, predicted_multiplicity, self_sign_sum,
                       verify_associativity)
from .identities import check_identities, fit_alpha_beta_gamma, generator_case, solve_multiplicity
from .matrices import CliffordMatrix, EnsembleConfig, realize, sample_blocks
from .polynomials import MonicPolynomial, char_poly, discriminant, poly_root_power, resultant
from .simulation import SimConfig, simulate_coefficients, simulate_matrix
from .spectral import SpectralLaw, bott_table, mcmc_oracle, two_sample_test

__all__ = [
    "CliffordSignature", "build_signature", "predicted_multiplicity", "self_sign_sum", "verify_associativity",
    "check_identities", "fit_alpha_beta_gamma", "generator_case", "solve_multiplicity",
    "CliffordMatrix", "EnsembleConfig", "realize", "sample_blocks",
    "MonicPolynomial", "char_poly", "discriminant", "poly_root_power", "resultant",
    "SimConfig", "simulate_coefficients", "simulate_matrix",
    "SpectralLaw", "bott_table", "mcmc_oracle", "two_sample_test",
]

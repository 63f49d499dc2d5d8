"""Distinct eigenvalues of the p = 2 ensemble against the a = 4 law sampled by MCMC."""

import numpy as np

from cliffmat import EnsembleConfig
from cliffmat.spectral import SpectralLaw, mcmc_oracle, normalized_distinct, sample_eigenvalues, two_sample_test


def main(samples=3000):
    lam = normalized_distinct(sample_eigenvalues(EnsembleConfig(2, 2, seed=3), samples), 4, 2)
    for a in (1, 2, 4):
        mc = mcmc_oracle(SpectralLaw(2, a), samples, seed=a)
        res = two_sample_test(lam, mc.samples)
        print(f"a={a}: combined p-value {res.p_value:.4f}  (KS {res.ks_stat:.3f}, energy p {res.energy_pvalue:.3f})")
    gap = lam[:, 1] - lam[:, 0]
    print(f"mean gap {gap.mean():.3f}, P(gap < 0.5) = {np.mean(gap < 0.5):.4f}")


if __name__ == "__main__":
    main()

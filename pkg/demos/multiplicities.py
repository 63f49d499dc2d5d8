"""Eigenvalue multiplicities of Gaussian Cl-symmetric matrices for p = 0..8."""

import numpy as np

from cliffmat import EnsembleConfig, predicted_multiplicity, sample_blocks
from cliffmat.matrices import realize_blocks
from cliffmat.polynomials import eigen_spectrum


def main():
    print(f"{'p':>2} {'dim':>5} {'cluster sizes':>14} {'predicted':>9} {'repulsion':>9}")
    for p in range(9):
        n = 2 if p <= 6 else 1
        M = sample_blocks(EnsembleConfig(n, p, seed=1))
        s = eigen_spectrum(realize_blocks(M.blocks, M.sig))
        pred = predicted_multiplicity(p)
        sizes = sorted(set(int(m) for m in s.multiplicities))
        print(f"{p:>2} {s.dim:>5} {str(sizes):>14} {pred.a:>9} {pred.repulsion:>9}")


if __name__ == "__main__":
    np.set_printoptions(precision=4)
    main()

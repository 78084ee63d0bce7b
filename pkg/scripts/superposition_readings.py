"""Rank the candidate expansions of the symmetric-superposition generating
function against the Fock-space oracle on random correlation matrices.

Usage: python scripts/superposition_readings.py [n_instances] [seed]
"""
import sys

import numpy as np

from atomcount.counting import rank_interpretations
from atomcount.fock_oracle import oracle_generating
from atomcount.lattice import SymmetricSuperposition


def random_psd(rng, n):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, _ = np.linalg.qr(X)
    A = (Q * rng.uniform(0, 1, n)) @ Q.conj().T
    return 0.5 * (A + A.conj().T)


def main():
    count = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    rng = np.random.default_rng(int(sys.argv[2]) if len(sys.argv) > 2 else 0)
    instances = []
    for _ in range(count):
        n = int(rng.integers(2, 7))
        instances.append((random_psd(rng, n), int(rng.integers(1, n + 1))))

    def reference(A, n_particles, lam):
        return oracle_generating([A], [lam], SymmetricSuperposition(n_particles, A.shape[0]))

    ranking = rank_interpretations(instances, reference)
    for name, err in sorted(ranking.items(), key=lambda kv: kv[1]):
        print(f"{name:20s} max |Q - Q_oracle| = {err:.3e}")


if __name__ == "__main__":
    main()

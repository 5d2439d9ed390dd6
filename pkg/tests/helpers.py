"""Shared builders for randomized test inputs."""

import numpy as np

from sympmor.symplectic import paired_basis, symplectic_gs_insert
from sympmor.weighted import WeightMatrix


def make_spd(rng, n, cond=100.0):
    """Random SPD matrix with the given condition number (log-spaced spectrum)."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.logspace(0.0, -np.log10(cond), n)
    m = (q * lam) @ q.T
    return 0.5 * (m + m.T)


def make_weight(rng, n2, cond=100.0):
    return WeightMatrix(make_spd(rng, n2, cond))


def random_weighted_basis(rng, n2, k, weight):
    """Random k-pair basis, built by feeding random candidates to the GS core."""
    e_block = None
    b = np.zeros((n2, 0))
    while e_block is None or e_block.shape[1] < k:
        w = weight.apply(rng.standard_normal(n2))
        e_new, _ = symplectic_gs_insert(b, w)
        if e_new is None:
            continue
        if e_block is None:
            e_block = e_new[:, None]
        else:
            e_block = np.hstack([e_block, e_new[:, None]])
        b = paired_basis(e_block)
    a = weight.solve(b)
    from sympmor.symplectic import SymplecticBasis

    return SymplecticBasis(A=a, B=b, weight=weight)


def random_euclidean_basis(rng, n2, k):
    """Orthonormal symplectic basis with identity weight."""
    e_block = None
    b = np.zeros((n2, 0))
    while e_block is None or e_block.shape[1] < k:
        w = rng.standard_normal(n2)
        e_new, _ = symplectic_gs_insert(b, w)
        if e_new is None:
            continue
        if e_block is None:
            e_block = e_new[:, None]
        else:
            e_block = np.hstack([e_block, e_new[:, None]])
        b = paired_basis(e_block)
    from sympmor.symplectic import SymplecticBasis

    return SymplecticBasis(A=b.copy(), B=b, weight=None)


def paired_snapshots(rng, n2, m):
    """Random snapshot matrix with columns scaled to spread the greedy errors."""
    z = rng.standard_normal((n2, m))
    z *= np.exp(rng.uniform(-1.0, 1.0, size=m))
    return z

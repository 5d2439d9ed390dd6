"""Weighted inner products, weighted POD and projection operators.

The weight X is SPD and defines <x, y>_X = x^T X y.  Everything here
works through products with X and solves against its cached Cholesky
factor; X^(1/2) never appears.  An exact identity weight short-circuits
to bitwise copies so that weighted code paths degenerate to their
Euclidean counterparts without floating-point perturbation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, RankError
from .linalg import SpdMatrix, as_matrix, svd
from .symplectic import SymplecticBasis, symplectic_inverse

POD_RANK_RTOL = 1e-12
POD_ORTHO_TOL = 1e-10


class WeightMatrix(SpdMatrix):
    """SPD weight matrix with cached factorization and identity fast path.

    apply() and solve() return bitwise copies of the input when the
    matrix equals the identity exactly, so weighted algorithms reproduce
    their unweighted versions bit for bit at X = I.
    """

    def __init__(self, m, name="weight matrix"):
        super().__init__(m, name)
        self.is_identity = bool(np.array_equal(self.matrix, np.eye(self.n)))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), name="identity weight")

    def apply(self, z):
        """X @ z for a vector or matrix z."""
        if self.is_identity:
            return np.array(z, dtype=float, copy=True)
        return self.matrix @ z

    def solve(self, rhs):
        if self.is_identity:
            return np.array(rhs, dtype=float, copy=True)
        return super().solve(rhs)

    def inner(self, x, y):
        """<x, y>_X = x^T X y."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ContractError(f"x_inner needs two vectors of equal length, got {x.shape} and {y.shape}")
        if x.shape[0] != self.n:
            raise ContractError(f"vector length {x.shape[0]} does not match weight size {self.n}")
        if self.is_identity:
            return float(x @ y)
        return float(x @ (self.matrix @ y))

    def norm(self, x):
        """||x||_X, clamped against tiny negative roundoff."""
        return float(np.sqrt(max(self.inner(x, x), 0.0)))


def x_inner(x, y, weight):
    """Weighted inner product x^T X y.

    Raises ContractError on dimension mismatch.
    """
    return weight.inner(x, y)


@dataclass
class PodBasis:
    """Weighted POD basis.

    Attributes
    ----------
    V : ndarray, shape (m, k)
        X-orthonormal basis columns (V^T X V = I).
    values : ndarray, shape (k,)
        Retained eigenvalues of the Gramian S^T X S, descending.
    weight : WeightMatrix
        The inner product the basis is orthonormal under.
    spectrum : ndarray
        Full computed eigenvalue sequence of the Gramian (length
        min(m, N)); the tail beyond `values` feeds error identities.
    """

    V: np.ndarray
    values: np.ndarray
    weight: WeightMatrix
    spectrum: np.ndarray = field(default=None, repr=False)

    @property
    def k(self):
        return self.V.shape[1]

    def validate(self, tol=POD_ORTHO_TOL):
        g = self.V.T @ self.weight.apply(self.V)
        defect = np.linalg.norm(g - np.eye(self.k))
        if defect > tol * max(np.sqrt(self.k), 1.0):
            raise ContractError(f"POD basis is not X-orthonormal (defect {defect:.2e})")


def weighted_pod(snapshots, weight, k):
    """Weighted POD by the method of snapshots.

    Computes the top-k eigenpairs (lambda_i, w_i) of the Gramian
    G = S^T X S and returns V = S W Lambda^(-1/2).  The eigenpairs are
    obtained from a thin SVD of R^T S where X = R R^T is the cached
    Cholesky factorization (G = (R^T S)^T (R^T S)), which avoids forming
    the N x N Gramian when N >> m and never touches X^(1/2).

    Parameters
    ----------
    snapshots : array_like, shape (m, N)
        Snapshot columns.
    weight : WeightMatrix
    k : int
        Number of modes; must not exceed the numerical rank
        (lambda_k >= POD_RANK_RTOL * lambda_1).

    Returns
    -------
    PodBasis

    Raises
    ------
    RankError
        If k exceeds the numerical rank of the weighted snapshot set.
    """
    s = as_matrix(snapshots, "snapshots")
    if k < 1:
        raise ContractError("k must be at least 1")
    if k > min(s.shape):
        raise ContractError(f"k={k} exceeds snapshot matrix rank bound {min(s.shape)}")
    if weight.is_identity:
        rs = s
    else:
        rs = weight.cholesky_lower().T @ s
    _, sig, vt = svd(rs)
    lam = sig ** 2
    rank = int(np.count_nonzero(lam > POD_RANK_RTOL * lam[0])) if lam.size and lam[0] > 0 else 0
    if k > rank:
        raise RankError(f"k={k} exceeds the numerical rank {rank} of the weighted snapshots")
    v = s @ (vt[:k].T / sig[:k])
    return PodBasis(V=v, values=lam[:k].copy(), weight=weight, spectrum=lam)


def weighted_projection(pod, z):
    """X-orthogonal projection onto the POD span: V V^T X z."""
    xz = pod.weight.apply(z)
    return pod.V @ (pod.V.T @ xz)


def weighted_symplectic_projection(basis, z):
    """Symplectic projection A J_2k^T A^T X J X z.

    Evaluated through the composite symplectic inverse (square-root
    free).  For the identity weight this reduces to A A^+ z.

    Parameters
    ----------
    basis : SymplecticBasis
    z : ndarray
        Vector or stacked columns of length 2n.
    """
    if not isinstance(basis, SymplecticBasis):
        raise ContractError("weighted_symplectic_projection needs a SymplecticBasis")
    return basis.A @ symplectic_inverse(basis).apply(z)

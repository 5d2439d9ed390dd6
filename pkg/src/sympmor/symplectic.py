"""Symplectic structure operators, bases and factorizations.

Conventions used throughout: a state of dimension 2n is split as
z = (q, p) with the canonical structure matrix

    J = [[0, I], [-I, 0]],

applied as an operator (never materialized at full dimension).  A
basis is kept as the matrix pair (A, B) with B = X A; B is both
orthonormal (B^T B = I) and canonically symplectic (B^T J B = J_2k),
with paired column layout B = [E | J^T E].  All structure-aware
algebra runs on B so no square root of the weight is ever needed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericalFailure, SingularStructureError
from .linalg import as_matrix

BASIS_TOL = 1e-10
DEFLATION_TOL = 1e-10
SKEW_RTOL = 1e-12


def j_apply(m):
    """Apply the canonical structure matrix J to a vector or matrix.

    The first dimension of m must be even; J (q, p) = (p, -q).
    """
    n2 = m.shape[0]
    if n2 % 2:
        raise ContractError(f"J needs an even first dimension, got {n2}")
    n = n2 // 2
    out = np.empty_like(m)
    out[:n] = m[n:]
    out[n:] = -m[:n]
    return out


def jt_apply(m):
    """Apply J^T = -J: J^T (q, p) = (-p, q)."""
    n2 = m.shape[0]
    if n2 % 2:
        raise ContractError(f"J^T needs an even first dimension, got {n2}")
    n = n2 // 2
    out = np.empty_like(m)
    out[:n] = -m[n:]
    out[n:] = m[:n]
    return out


def j_matrix(n2):
    """Dense J of size n2 x n2 (test and small-scale helper)."""
    if n2 % 2:
        raise ContractError("J must have even dimension")
    n = n2 // 2
    j = np.zeros((n2, n2))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


class StandardSymplectic2n:
    """Canonical structure operator on R^(2n).

    Kept as an operator: apply and apply_transpose act on vectors or on
    matrices column-wise.  apply twice negates; apply followed by
    apply_transpose is the identity.
    """

    def __init__(self, n):
        if n < 1:
            raise ContractError("n must be positive")
        self.n = int(n)

    @property
    def dim(self):
        return 2 * self.n

    def apply(self, z):
        return j_apply(z)

    def apply_transpose(self, z):
        return jt_apply(z)

    def materialize(self):
        """Dense copy, intended for small dimensions only."""
        return j_matrix(self.dim)


class WeightedStructure:
    """Skew form induced by an SPD weight: Omega = X J X.

    With inverse=True the form X^(-1) J X^(-1) is represented instead
    (used for the inverse-weighted symplecticity statements).  The
    weight is applied through products and cached solves; X^(1/2) is
    never formed.
    """

    def __init__(self, weight, inverse=False):
        self.weight = weight
        self.inverse = bool(inverse)

    def apply(self, m):
        """Omega @ m for a vector or matrix m."""
        if self.inverse:
            return self.weight.solve(j_apply(self.weight.solve(m)))
        return self.weight.apply(j_apply(self.weight.apply(m)))


def check_symplectic(m, structure=None):
    """Check M^T Omega M = J_2k and report the defect.

    Parameters
    ----------
    m : array_like, shape (2n, 2k)
        Candidate symplectic matrix.
    structure : None or WeightedStructure
        None means the canonical form (Omega = J).

    Returns
    -------
    ok : bool
        True when the Frobenius defect is at most BASIS_TOL * ||J_2k||_F.
    defect : float
        ||M^T Omega M - J_2k||_F.
    """
    m = as_matrix(m)
    if m.shape[1] % 2:
        raise ContractError("symplectic candidate needs an even column count")
    om = j_apply(m) if structure is None else structure.apply(m)
    gram = m.T @ om
    k2 = m.shape[1]
    defect = float(np.linalg.norm(gram - j_matrix(k2)))
    return defect <= BASIS_TOL * np.sqrt(k2), defect


def paired_basis(e_block):
    """Assemble B = [E | J^T E] from the leading column block."""
    e_block = np.asarray(e_block, dtype=float)
    if e_block.ndim != 2:
        raise ContractError("column block must be 2-d")
    if e_block.shape[1] == 0:
        return e_block.copy()
    return np.hstack([e_block, jt_apply(e_block)])


def symplectic_gs_insert(b, w, deflation_tol=DEFLATION_TOL):
    """One symplectic Gram-Schmidt step against a paired orthonormal basis.

    For a basis with paired layout [E | J^T E] and orthonormal columns,
    symplectic orthogonalization coincides with plain Gram-Schmidt
    against all 2k columns; two passes are used for re-orthogonalization.

    Parameters
    ----------
    b : ndarray, shape (2n, 2k)
        Current basis (may have zero columns).
    w : ndarray, shape (2n,)
        Candidate vector.
    deflation_tol : float
        w deflates when the orthogonalized remainder has norm at most
        deflation_tol * ||w||.

    Returns
    -------
    e_new : ndarray or None
        Unit vector to append (the basis grows by the pair
        (e_new, J^T e_new)); None when the candidate deflated.
    coeffs : ndarray, shape (2k,)
        Expansion coefficients alpha with remainder = w + B alpha.
    """
    w = np.asarray(w, dtype=float)
    wn = float(np.linalg.norm(w))
    if b is None or b.size == 0:
        if wn <= deflation_tol:
            return None, np.zeros(0)
        return w / wn, np.zeros(0)
    c1 = b.T @ w
    z = w - b @ c1
    c2 = b.T @ z
    z = z - b @ c2
    zn = float(np.linalg.norm(z))
    if zn <= deflation_tol * wn:
        return None, -(c1 + c2)
    # consistency: the remainder must be symplectically orthogonal to b
    sdef = float(np.max(np.abs(b.T @ j_apply(z))))
    if sdef > 1e-8 * max(wn, zn):
        raise NumericalFailure(
            f"symplectic orthogonality lost in Gram-Schmidt (defect {sdef:.2e}); "
            "basis is not a paired orthonormal block")
    return z / zn, -(c1 + c2)


@dataclass
class SymplecticBasis:
    """Reduced symplectic basis pair for a weighted phase space.

    Attributes
    ----------
    A : ndarray, shape (2n, 2k)
        Working basis; columns solve X a = b for the columns of B.
        Used as the decoder z ~ A y.
    B : ndarray, shape (2n, 2k)
        Weighted factor B = X A with B^T B = I and B^T J B = J_2k,
        paired layout [E | J^T E].
    weight : object or None
        Weight with apply/solve methods; None stands for the identity.
    report : object, optional
        Provenance (greedy report) carried along when available.
    """

    A: np.ndarray
    B: np.ndarray
    weight: object = None
    report: object = field(default=None, repr=False)

    def __post_init__(self):
        self.A = as_matrix(self.A, "basis A")
        self.B = as_matrix(self.B, "basis B")
        if self.A.shape != self.B.shape:
            raise ContractError("A and B must have matching shapes")
        if self.A.shape[1] % 2:
            raise ContractError("symplectic basis needs an even column count")

    @property
    def n2(self):
        return self.A.shape[0]

    @property
    def k(self):
        return self.A.shape[1] // 2

    def validate(self, tol=BASIS_TOL):
        """Check all basis invariants; raises ContractError on failure.

        Orthonormality B^T B = I encodes X-orthonormality of the lifted
        basis X^(1/2) A without forming the square root.
        """
        k2 = 2 * self.k
        g = self.B.T @ self.B
        if np.linalg.norm(g - np.eye(k2)) > tol * np.sqrt(k2):
            raise ContractError("basis factor B is not orthonormal")
        ok, defect = check_symplectic(self.B)
        if not ok:
            raise ContractError(f"B is not J-symplectic (defect {defect:.2e})")
        xa = self.A if self.weight is None else self.weight.apply(self.A)
        if np.linalg.norm(xa - self.B) > tol * max(np.linalg.norm(self.B), 1.0):
            raise ContractError("X A = B does not hold")
        pair_defect = np.linalg.norm(self.B[:, self.k:] - jt_apply(self.B[:, :self.k]))
        if pair_defect > tol * np.sqrt(k2):
            raise ContractError("basis columns are not in paired layout")


class SymplecticInverse:
    """Symplectic inverse A^+ = J_2k^T (X A)^T J X as a lazy operator.

    For the canonical structure (weight None) this is J_2k^T A^T J.  The
    product X A is cached; application costs one weight product, one J
    product and one (2k x 2n) multiply.
    """

    def __init__(self, a, weight=None, max_materialize=4096):
        a = as_matrix(a, "symplectic matrix")
        if a.shape[1] % 2:
            raise ContractError("symplectic inverse needs an even column count")
        self.a = a
        self.weight = weight
        self.max_materialize = int(max_materialize)
        self._xa = a if weight is None else weight.apply(a)

    @property
    def shape(self):
        return (self.a.shape[1], self.a.shape[0])

    def apply(self, z):
        """A^+ z for a vector or stacked columns z."""
        u = z if self.weight is None else self.weight.apply(z)
        u = j_apply(u)
        return jt_apply(self._xa.T @ u)

    def matrix(self):
        """Materialize A^+ as a dense (2k, 2n) array.

        Guarded by max_materialize to keep accidental full-order dense
        work out of online paths.
        """
        if self.a.shape[0] > self.max_materialize:
            raise ContractError(
                f"refusing to materialize a {self.shape} symplectic inverse; "
                f"raise max_materialize above {self.a.shape[0]} to override")
        y = jt_apply(self._xa)
        if self.weight is not None:
            y = self.weight.apply(y)
        return jt_apply(y.T)


def symplectic_inverse(a, weight=None, max_materialize=4096):
    """Symplectic inverse of a (weighted) symplectic matrix.

    Returns an operator object with apply() and matrix(); see
    SymplecticInverse.  A SymplecticBasis may be passed directly.
    """
    if isinstance(a, SymplecticBasis):
        return SymplecticInverse(a.A, a.weight, max_materialize)
    return SymplecticInverse(a, weight, max_materialize)


@dataclass
class SymplecticFactorization:
    """Congruence factor of a nonsingular skew matrix: S = T J_2k T^T."""

    T: np.ndarray
    residual: float

    @property
    def k(self):
        return self.T.shape[1] // 2


def factor_structure(s, tol=1e-12):
    """Factor a nonsingular skew matrix as S = T J_2k T^T.

    Symplectic Gaussian elimination with complete pivoting: each stage
    picks the largest remaining |S_ij| (ties broken by row-major scan
    order), orients it positive and eliminates the pair with a rank-2
    update.  Column m of T pairs with column m + k.

    Parameters
    ----------
    s : array_like, shape (2k, 2k)
        Skew-symmetric nonsingular matrix.
    tol : float
        Pivot threshold relative to the largest initial entry.

    Returns
    -------
    SymplecticFactorization
        With ||T J T^T - S||_F <= 1e-10 ||S||_F.

    Raises
    ------
    SingularStructureError
        When the pivot falls below tolerance before completion.
    """
    s0 = as_matrix(s, "structure matrix")
    n2 = s0.shape[0]
    if s0.shape[0] != s0.shape[1] or n2 % 2:
        raise ContractError(f"structure matrix must be square with even size, got {s0.shape}")
    scale = np.linalg.norm(s0)
    if np.linalg.norm(s0 + s0.T) > SKEW_RTOL * max(scale, 1.0):
        raise ContractError("structure matrix is not skew-symmetric")
    k = n2 // 2
    work = s0.copy()
    scale0 = float(np.max(np.abs(work))) if work.size else 0.0
    left = []
    right = []
    for m in range(k):
        flat = int(np.argmax(np.abs(work)))
        i, j = divmod(flat, n2)
        piv = work[i, j]
        if abs(piv) <= tol * scale0 or scale0 == 0.0:
            raise SingularStructureError(
                f"skew matrix is numerically rank deficient: pivot {abs(piv):.2e} "
                f"at stage {m} of {k}")
        if piv < 0.0:
            i, j = j, i
            piv = work[i, j]
        ci = work[:, i].copy()
        cj = work[:, j].copy()
        r = np.sqrt(piv)
        left.append(cj / r)
        right.append(-ci / r)
        work -= (np.outer(ci, cj) - np.outer(cj, ci)) / piv
        # the update zeroes rows/columns i and j exactly; clamp roundoff
        work[i, :] = 0.0
        work[j, :] = 0.0
        work[:, i] = 0.0
        work[:, j] = 0.0
    t = np.column_stack(left + right)
    resid = float(np.linalg.norm(t @ j_apply(t.T) - s0))
    if resid > 1e-10 * max(scale, 1.0):
        raise NumericalFailure(f"structure factorization residual too large: {resid:.2e}")
    return SymplecticFactorization(T=t, residual=resid)

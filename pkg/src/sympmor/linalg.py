"""Dense linear algebra kernel.

Thin, contract-checked wrappers around LAPACK via numpy/scipy.  All
matrices are float64 ndarrays in row-major (C) order; column vectors are
1-d arrays.  Validation tolerances are module constants so tests and
callers can override them in one place.

`spd_sqrt` is a verification helper only: production code paths must
never call it (they are required to work without forming X^(1/2)), and a
structural test enforces this.
"""

import numpy as np
import scipy.linalg

from .errors import ContractError, FactorizationError, SvdConvergenceError

# relative Frobenius tolerance for symmetry checks
SYMMETRY_RTOL = 1e-12
# relative residual contracts of the decomposition wrappers
SVD_RESIDUAL_RTOL = 1e-10
EIG_RESIDUAL_RTOL = 1e-10
SOLVE_RESIDUAL_RTOL = 1e-10


def as_matrix(a, name="matrix"):
    """Validate and convert input to a 2-d float64 row-major array.

    Parameters
    ----------
    a : array_like
        Input data, any shape-(m, n) array-like.
    name : str
        Label used in error messages.

    Returns
    -------
    ndarray
        C-contiguous float64 view or copy of the input.

    Raises
    ------
    ContractError
        If the input is not 2-d or contains non-finite entries.
    """
    m = np.ascontiguousarray(a, dtype=float)
    if m.ndim != 2:
        raise ContractError(f"{name} must be 2-d, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ContractError(f"{name} contains non-finite entries")
    return m


def as_vector(a, name="vector"):
    """Like as_matrix but for 1-d float64 arrays."""
    v = np.ascontiguousarray(a, dtype=float)
    if v.ndim != 1:
        raise ContractError(f"{name} must be 1-d, got ndim={v.ndim}")
    if not np.isfinite(v).all():
        raise ContractError(f"{name} contains non-finite entries")
    return v


class SpdMatrix:
    """Symmetric positive definite matrix with a cached Cholesky factor.

    Symmetry is required to SYMMETRY_RTOL relative (Frobenius);
    positive definiteness is certified at construction by a Cholesky
    factorization with strictly positive pivots.  The factor is cached
    and reused by every subsequent solve.

    Parameters
    ----------
    m : array_like
        Square SPD matrix.
    name : str
        Label used in error messages.
    """

    def __init__(self, m, name="spd matrix"):
        m = as_matrix(m, name)
        if m.shape[0] != m.shape[1]:
            raise ContractError(f"{name} must be square, got {m.shape}")
        scale = np.linalg.norm(m)
        if np.linalg.norm(m - m.T) > SYMMETRY_RTOL * scale:
            raise ContractError(f"{name} is not symmetric to {SYMMETRY_RTOL} relative")
        self.matrix = m
        self.name = name
        try:
            # reads the lower triangle only, so roundoff asymmetry below
            # the tolerance cannot leak through
            self._factor = scipy.linalg.cho_factor(m, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise FactorizationError(f"{name} is not positive definite: {exc}") from None
        if np.min(np.diag(self._factor[0])) <= 0.0:
            raise FactorizationError(f"{name} has a nonpositive Cholesky pivot")

    @property
    def n(self):
        return self.matrix.shape[0]

    def solve(self, rhs):
        """Solve M x = rhs using the cached factorization.

        rhs may be a vector or a matrix of stacked right-hand sides.
        """
        rhs = np.asarray(rhs, dtype=float)
        return scipy.linalg.cho_solve(self._factor, rhs, check_finite=False)

    def cholesky_lower(self):
        """Lower-triangular R with M = R R^T (the cached factor, cleaned)."""
        return np.tril(self._factor[0])

    def matvec(self, z):
        """Product M @ z for a vector or matrix z."""
        return self.matrix @ z


def svd(m, full_matrices=False):
    """Singular value decomposition with a residual contract.

    Returns (U, s, Vt) with ||M - U diag(s) Vt||_F <= 1e-10 ||M||_F and
    orthonormal factors.  Falls back from the divide-and-conquer driver
    to the QR-based one before giving up.

    Raises
    ------
    SvdConvergenceError
        If neither LAPACK driver converges.
    """
    m = as_matrix(m)
    try:
        return np.linalg.svd(m, full_matrices=full_matrices)
    except np.linalg.LinAlgError:
        pass
    try:
        u, s, vt = scipy.linalg.svd(m, full_matrices=full_matrices,
                                    lapack_driver="gesvd", check_finite=False)
        return u, s, vt
    except scipy.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge: {exc}") from None


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix, descending eigenvalues.

    Parameters
    ----------
    m : array_like
        Symmetric matrix (to SYMMETRY_RTOL relative).

    Returns
    -------
    w : ndarray
        Eigenvalues sorted descending.
    v : ndarray
        Orthonormal eigenvectors, column i pairs with w[i].

    Raises
    ------
    ContractError
        If m is not symmetric within tolerance.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ContractError(f"sym_eig needs a square matrix, got {m.shape}")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > SYMMETRY_RTOL * max(scale, 1.0):
        raise ContractError("sym_eig input is not symmetric")
    w, v = np.linalg.eigh(m)
    return w[::-1].copy(), v[:, ::-1].copy()


def spd_solve(m, rhs):
    """Solve M x = rhs for SPD M.

    Accepts either an SpdMatrix (reusing its cached factorization) or a
    raw array (factored once here).

    Raises
    ------
    FactorizationError
        If m is not positive definite.
    """
    if not isinstance(m, SpdMatrix):
        m = SpdMatrix(m)
    return m.solve(rhs)


def spd_sqrt(m):
    """Symmetric positive definite square root.  VERIFICATION ONLY.

    Production code is required to operate without ever forming X^(1/2);
    this helper exists so tests can cross-check the square-root-free
    formulations against the explicit ones.

    Returns S symmetric with S @ S = M to 1e-10 relative.
    """
    if isinstance(m, SpdMatrix):
        m = m.matrix
    m = as_matrix(m)
    w, v = sym_eig(m)
    if w[-1] <= 0.0:
        raise FactorizationError("spd_sqrt input is not positive definite")
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)

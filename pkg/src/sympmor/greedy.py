"""Greedy construction of symplectic reduced bases.

Three drivers share one insertion primitive (symplectic_gs_insert):

* greedy_symplectic_euclidean: plain 2-norm greedy over snapshot
  columns, optionally followed by a pass over gradient snapshots.
* greedy_symplectic_weighted: energy-weighted greedy; maintains the
  working pair (A, B) with B orthonormal-symplectic and A = X^-1 B via
  incremental factored solves.  With an identity weight it reproduces
  the euclidean driver pivot for pivot.
* greedy_nonlinear_basis: enriches an existing basis until the
  gradient snapshots are covered, for interpolation of the nonlinear
  term.

Projection errors are evaluated without forming any projector:
err_j^2 = sum_i (Z - A Y)_ij (W - B Y)_ij with W = X Z and
Y = J2k^T B^T J2n W, which equals the weighted residual norm squared
because X A = B.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractError, SelectionError, StagnationError
from .linalg import as_matrix
from .symplectic import (DEFLATION_TOL, SymplecticBasis, j_apply, jt_apply,
                         paired_basis, symplectic_gs_insert)
from .weighted import WeightMatrix


@dataclass
class GreedyReport:
    """Selection history of one greedy run.

    errors[i] is the worst projection error right before the i-th pair
    was added (for the seed: the candidate's norm).
    """

    selected: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    final_k: int = 0
    deflations: int = 0
    k_initial: int = 0


def _check_budget(delta, k_max):
    if delta is None and k_max is None:
        raise ContractError("greedy needs a tolerance (delta) or a size budget (k_max)")
    if delta is not None and delta <= 0.0:
        raise ContractError("delta must be positive")
    if k_max is not None and k_max < 1:
        raise ContractError("k_max must be at least 1")


def _seed_column(w, deflation_tol):
    norms = np.sqrt(np.maximum(np.einsum("ij,ij->j", w, w), 0.0))
    alive = np.nonzero(norms > deflation_tol)[0]
    if alive.size == 0:
        raise SelectionError("every candidate column is numerically zero", -1)
    return int(alive[0]), float(norms[alive[0]])


def greedy_symplectic_euclidean(snapshots, grad_snapshots=None, delta=None,
                                k_max=None, deflation_tol=DEFLATION_TOL):
    """Greedy symplectic basis in the plain 2-norm (identity weight).

    Seeds with the first nonvanishing snapshot column, then repeatedly
    adds the worst-approximated snapshot as a (e, J^T e) pair.  When
    grad_snapshots is given, a second pass enriches the basis the same
    way over those columns, sharing delta and the k_max budget.

    Returns a SymplecticBasis with A == B and weight None.
    """
    z = as_matrix(snapshots, "snapshots")
    n2 = z.shape[0]
    if n2 % 2:
        raise ContractError("snapshot rows must be even (stacked q and p)")
    _check_budget(delta, k_max)
    report = GreedyReport()

    j0, norm0 = _seed_column(z, deflation_tol)
    e1, _ = symplectic_gs_insert(np.empty((n2, 0)), z[:, j0], deflation_tol)
    e_block = e1[:, None]
    report.selected.append(j0)
    report.errors.append(norm0)

    def enrich(cands, e_block):
        j_cands = j_apply(cands)
        while True:
            k = e_block.shape[1]
            if k_max is not None and k >= k_max:
                return e_block
            if 2 * k >= n2:
                return e_block
            b = paired_basis(e_block)
            y = jt_apply(b.T @ j_cands)
            r = cands - b @ y
            errs = np.maximum(np.einsum("ij,ij->j", r, r), 0.0)
            j = int(np.argmax(errs))
            err = float(np.sqrt(errs[j]))
            if delta is not None and err <= delta:
                return e_block
            e_new, _ = symplectic_gs_insert(b, cands[:, j], deflation_tol)
            if e_new is None:
                report.deflations += 1
                raise StagnationError(
                    f"candidate {j} lies in the current span but its projection "
                    f"error {err:.3e} is still above tolerance", j)
            e_block = np.column_stack([e_block, e_new])
            report.selected.append(j)
            report.errors.append(err)

    e_block = enrich(z, e_block)
    if grad_snapshots is not None:
        g = as_matrix(grad_snapshots, "grad_snapshots")
        if g.shape[0] != n2:
            raise ContractError("gradient snapshots must match the snapshot rows")
        e_block = _enrich_plain(g, e_block, delta, k_max, deflation_tol, report)

    b = paired_basis(e_block)
    report.final_k = e_block.shape[1]
    return SymplecticBasis(A=b.copy(), B=b, weight=None, report=report)


def _enrich_plain(cands, e_block, delta, k_max, deflation_tol, report):
    # second pass of the euclidean driver: ordinary orthogonal projection
    # (b is 2-orthonormal, so b b^T is the projector onto its span)
    n2 = cands.shape[0]
    while True:
        k = e_block.shape[1]
        if k_max is not None and k >= k_max:
            return e_block
        if 2 * k >= n2:
            return e_block
        b = paired_basis(e_block)
        r = cands - b @ (b.T @ cands)
        errs = np.maximum(np.einsum("ij,ij->j", r, r), 0.0)
        j = int(np.argmax(errs))
        err = float(np.sqrt(errs[j]))
        if delta is not None and err <= delta:
            return e_block
        e_new, _ = symplectic_gs_insert(b, cands[:, j], deflation_tol)
        if e_new is None:
            report.deflations += 1
            raise StagnationError(
                f"gradient candidate {j} deflated with error {err:.3e} above "
                "tolerance", j)
        e_block = np.column_stack([e_block, e_new])
        report.selected.append(j)
        report.errors.append(err)


def greedy_symplectic_weighted(snapshots, weight, delta=None, k_max=None,
                               deflation_tol=DEFLATION_TOL):
    """Greedy symplectic basis in the weighted inner product <x, X y>.

    Works on the weighted candidates w = X z: the symplectic basis B is
    built from them by paired Gram-Schmidt, and the decoder A = X^-1 B
    is maintained by two factored solves per added pair.  Projection
    errors are the true weighted residuals, computed through the
    identity err^2 = sum (z - A y) * (w - B y) without solving against
    X per iteration.

    Returns a SymplecticBasis carrying the weight and a GreedyReport.
    """
    z = as_matrix(snapshots, "snapshots")
    n2 = z.shape[0]
    if n2 % 2:
        raise ContractError("snapshot rows must be even (stacked q and p)")
    if not isinstance(weight, WeightMatrix):
        weight = WeightMatrix(weight, "weight")
    if weight.n != n2:
        raise ContractError("weight dimension does not match the snapshots")
    _check_budget(delta, k_max)
    report = GreedyReport()

    w = weight.apply(z)
    j0, norm0 = _seed_column(w, deflation_tol)
    e1, _ = symplectic_gs_insert(np.empty((n2, 0)), w[:, j0], deflation_tol)
    e_block = e1[:, None]
    ae = weight.solve(e1)[:, None]
    aje = weight.solve(jt_apply(e1))[:, None]
    report.selected.append(j0)
    report.errors.append(norm0)

    jw = j_apply(w)
    while True:
        k = e_block.shape[1]
        if k_max is not None and k >= k_max:
            break
        if 2 * k >= n2:
            break
        b = paired_basis(e_block)
        a = np.hstack([ae, aje])
        y = jt_apply(b.T @ jw)
        r_a = z - a @ y
        r_b = w - b @ y
        errs = np.maximum(np.einsum("ij,ij->j", r_a, r_b), 0.0)
        j = int(np.argmax(errs))
        err = float(np.sqrt(errs[j]))
        if delta is not None and err <= delta:
            break
        e_new, _ = symplectic_gs_insert(b, w[:, j], deflation_tol)
        if e_new is None:
            report.deflations += 1
            raise StagnationError(
                f"candidate {j} lies in the current span but its weighted "
                f"projection error {err:.3e} is still above tolerance", j)
        e_block = np.column_stack([e_block, e_new])
        ae = np.column_stack([ae, weight.solve(e_new)])
        aje = np.column_stack([aje, weight.solve(jt_apply(e_new))])
        report.selected.append(j)
        report.errors.append(err)

    b = paired_basis(e_block)
    a = np.hstack([ae, aje])
    report.final_k = e_block.shape[1]
    return SymplecticBasis(A=a, B=b, weight=weight, report=report)


def greedy_nonlinear_basis(basis, grad_snapshots, delta=None, max_new=None,
                           metric="xinv", deflation_tol=DEFLATION_TOL):
    """Enrich a symplectic basis until it covers the gradient snapshots.

    Candidates are the back-solved columns X^-1 g, inserted as pairs
    into the frame of B; afterwards every gradient snapshot is close to
    span(X B), which is what interpolation of the nonlinear term needs.
    Residuals are tracked incrementally (two rank-1 downdates per added
    column), so the cost per iteration is one argmax over the snapshot
    set.

    metric selects the termination norm: "xinv" measures the residual
    g - X B B^T X^-1 g in the X^-1 inner product (equivalently, the
    2-norm in the frame of B); "euclidean" measures it in the plain
    2-norm.  The two coincide for an identity weight.

    Returns (enriched SymplecticBasis, GreedyReport with k_initial set).
    """
    if metric not in ("xinv", "euclidean"):
        raise ContractError(f"unknown enrichment metric {metric!r}")
    if delta is None and max_new is None:
        raise ContractError("enrichment needs a tolerance (delta) or a budget (max_new)")
    if delta is not None and delta <= 0.0:
        raise ContractError("delta must be positive")
    if max_new is not None and max_new < 1:
        raise ContractError("max_new must be at least 1")
    g = as_matrix(grad_snapshots, "grad_snapshots")
    n2 = g.shape[0]
    if n2 != basis.n2:
        raise ContractError("gradient snapshots do not match the basis dimension")
    weight = basis.weight if basis.weight is not None else WeightMatrix.identity(n2)

    k0 = basis.k
    e_block = basis.B[:, :k0].copy()
    ae = basis.A[:, :k0].copy()
    aje = basis.A[:, k0:].copy()
    report = GreedyReport(k_initial=k0)

    ginv = weight.solve(g)
    b = paired_basis(e_block)
    c = b.T @ ginv
    r_inv = ginv - b @ c          # residual of X^-1 g against span(B)
    r_w = g - weight.apply(b) @ c  # the same residual scaled back by X

    def current_errs():
        if metric == "xinv":
            return np.maximum(np.einsum("ij,ij->j", r_inv, r_w), 0.0)
        return np.maximum(np.einsum("ij,ij->j", r_w, r_w), 0.0)

    while True:
        added = e_block.shape[1] - k0
        if max_new is not None and added >= max_new:
            break
        if 2 * e_block.shape[1] >= n2:
            break
        errs = current_errs()
        j = int(np.argmax(errs))
        err = float(np.sqrt(errs[j]))
        if delta is not None and err <= delta:
            break
        b = paired_basis(e_block)
        e_new, _ = symplectic_gs_insert(b, ginv[:, j], deflation_tol)
        if e_new is None:
            report.deflations += 1
            raise StagnationError(
                f"gradient candidate {j} lies in the enriched span but its "
                f"residual {err:.3e} is still above tolerance", j)
        e_block = np.column_stack([e_block, e_new])
        ae = np.column_stack([ae, weight.solve(e_new)])
        aje = np.column_stack([aje, weight.solve(jt_apply(e_new))])
        for col in (e_new, jt_apply(e_new)):
            row = col @ ginv
            r_inv -= np.outer(col, row)
            r_w -= np.outer(weight.apply(col), row)
        report.selected.append(j)
        report.errors.append(err)

    b = paired_basis(e_block)
    a = np.hstack([ae, aje])
    report.final_k = e_block.shape[1]
    out_weight = basis.weight
    return SymplecticBasis(A=a, B=b, weight=out_weight, report=report), report


@dataclass
class DeimOperator:
    """Interpolation indices and the factored square matrix U[p, :].

    solve(g_p) maps sampled values at the indices to interpolation
    coefficients; interpolation is exact at the selected rows by
    construction.
    """

    indices: np.ndarray
    interp: np.ndarray
    lu: tuple
    cond: float

    @property
    def r(self):
        return self.indices.shape[0]

    def solve(self, g_p):
        return scipy.linalg.lu_solve(self.lu, g_p, check_finite=False)


def deim_select(u):
    """Greedy interpolation-index selection for the columns of u.

    Picks the row of largest magnitude of each successive column's
    interpolation residual.  Requires u to have full column rank;
    raises SelectionError (with the offending column) otherwise.
    """
    u = as_matrix(u, "interpolation basis")
    n, r = u.shape
    if r < 1 or r > n:
        raise ContractError(f"need 1 <= r <= n interpolation columns, got {r} x {n}")
    indices = np.empty(r, dtype=np.intp)
    p0 = int(np.argmax(np.abs(u[:, 0])))
    if u[p0, 0] == 0.0:
        raise SelectionError("first interpolation column vanishes", 0)
    indices[0] = p0
    for i in range(1, r):
        sel = indices[:i]
        coef = np.linalg.solve(u[sel, :i], u[sel, i])
        res = u[:, i] - u[:, :i] @ coef
        p = int(np.argmax(np.abs(res)))
        if abs(res[p]) <= 1e-14 * max(1.0, float(np.abs(u[:, i]).max())):
            raise SelectionError("interpolation basis is numerically rank deficient", i)
        indices[i] = p
    interp = u[indices, :].copy()
    try:
        lu = scipy.linalg.lu_factor(interp, check_finite=False)
    except scipy.linalg.LinAlgError:
        raise SelectionError("selected interpolation matrix is singular", r - 1) from None
    cond = float(np.linalg.cond(interp))
    return DeimOperator(indices=indices, interp=interp, lu=lu, cond=cond)

"""Independent reference implementations used only by tests.

Everything here is written the slow, explicit way on purpose: square
roots are formed with spd_sqrt, Gram-Schmidt runs column by column,
quadrature is numerical.  The production code must agree with these
routes without ever forming a matrix square root itself.
"""

import mpmath
import numpy as np

from sympmor.linalg import spd_sqrt


def j_mat(n2):
    n = n2 // 2
    j = np.zeros((n2, n2))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    return j


def pair_of(e):
    n = e.shape[0] // 2
    return np.concatenate([-e[n:], e[:n]])  # J^T e


def gs_insert_slow(b, w, tol=1e-10):
    """Two-pass Gram-Schmidt against the paired columns, one at a time."""
    v = w.astype(float).copy()
    for _ in range(2):
        for i in range(b.shape[1]):
            v -= (b[:, i] @ v) * b[:, i]
    nrm = np.linalg.norm(v)
    if nrm <= tol * max(1.0, np.linalg.norm(w)):
        return None
    return v / nrm


def sqrt_weighted_greedy(z, x_mat, k_max, delta=None, deflation_tol=1e-10):
    """Energy-weighted greedy with every composite spelled out via X^{1/2}.

    Returns (a, b, selected, errors).  Candidates are X z computed as
    X^{1/2}(X^{1/2} z); A is recovered as X^{-1/2}(X^{-1/2} B);
    projection errors are literal lifted residual norms
    ||X^{1/2}(z_j - A y_j)||_2 evaluated column by column.
    """
    rt = spd_sqrt(x_mat)
    rti = np.linalg.inv(rt)
    n2 = z.shape[0]
    jj = j_mat(n2)
    w = rt @ (rt @ z)

    norms = np.linalg.norm(w, axis=0)
    alive = np.nonzero(norms > deflation_tol)[0]
    j0 = int(alive[0])
    e_cols = [w[:, j0] / norms[j0]]
    selected = [j0]
    errors = [float(norms[j0])]

    while True:
        k = len(e_cols)
        if k_max is not None and k >= k_max:
            break
        if 2 * k >= n2:
            break
        e_block = np.column_stack(e_cols)
        b = np.hstack([e_block, np.column_stack([pair_of(c) for c in e_cols])])
        a = rti @ (rti @ b)
        j2k = j_mat(2 * k)
        errs = np.empty(z.shape[1])
        for j in range(z.shape[1]):
            y = j2k.T @ (b.T @ (jj @ w[:, j]))
            r = z[:, j] - a @ y
            errs[j] = np.linalg.norm(rt @ r) ** 2
        jsel = int(np.argmax(errs))
        err = float(np.sqrt(max(errs[jsel], 0.0)))
        if delta is not None and err <= delta:
            break
        e_new = gs_insert_slow(b, w[:, jsel], deflation_tol)
        if e_new is None:
            raise RuntimeError("oracle greedy deflated")
        e_cols.append(e_new)
        selected.append(jsel)
        errors.append(err)

    e_block = np.column_stack(e_cols)
    b = np.hstack([e_block, np.column_stack([pair_of(c) for c in e_cols])])
    a = rti @ (rti @ b)
    return a, b, selected, errors


def lifted_enrichment_residuals(basis_b, g, x_mat):
    """Residual norms of gradient snapshots, explicit-sqrt route.

    The coefficient is always c = B^T X^{-1} g.  The "xinv" metric is
    ||X^{1/2}(X^{-1} g - B c)||_2, the "euclidean" one is
    ||g - X B c||_2.  Production gets the first without any square
    root by pairing the two residuals; here it is spelled out.
    """
    rt = spd_sqrt(x_mat)
    ginv = np.linalg.solve(x_mat, g)
    c = basis_b.T @ ginv
    r_inv = ginv - basis_b @ c
    xinv = np.linalg.norm(rt @ r_inv, axis=0)
    euclidean = np.linalg.norm(g - (x_mat @ basis_b) @ c, axis=0)
    return xinv, euclidean


def fem_mass_stiffness_gauss(nodes, kappa, npts=3):
    """Hat-function mass/stiffness via Gauss quadrature (no closed forms)."""
    x = np.asarray(nodes, dtype=float)
    nel = len(x) - 1
    ni = len(x) - 2
    if npts == 3:
        gp = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
        gw = np.array([5.0, 8.0, 5.0]) / 9.0
    else:
        gp, gw = np.polynomial.legendre.leggauss(npts)
    m = np.zeros((ni, ni))
    k = np.zeros((ni, ni))

    def hat(i, pts):
        # global hat centered at node i (0-based over all nodes)
        out = np.zeros_like(pts)
        if i > 0:
            mask = (pts >= x[i - 1]) & (pts <= x[i])
            out[mask] = (pts[mask] - x[i - 1]) / (x[i] - x[i - 1])
        if i < len(x) - 1:
            mask = (pts > x[i]) & (pts <= x[i + 1])
            out[mask] = (x[i + 1] - pts[mask]) / (x[i + 1] - x[i])
        return out

    def dhat(i, pts):
        out = np.zeros_like(pts)
        if i > 0:
            mask = (pts >= x[i - 1]) & (pts <= x[i])
            out[mask] = 1.0 / (x[i] - x[i - 1])
        if i < len(x) - 1:
            mask = (pts > x[i]) & (pts <= x[i + 1])
            out[mask] = -1.0 / (x[i + 1] - x[i])
        return out

    for e in range(nel):
        h = x[e + 1] - x[e]
        pts = 0.5 * (x[e] + x[e + 1]) + 0.5 * h * gp
        wts = 0.5 * h * gw
        for a in range(ni):
            ia = a + 1
            ha = hat(ia, pts)
            da = dhat(ia, pts)
            if not np.any(ha) and not np.any(da):
                continue
            for bcol in range(ni):
                ib = bcol + 1
                hb = hat(ib, pts)
                db = dhat(ib, pts)
                m[a, bcol] += np.sum(wts * ha * hb)
                k[a, bcol] += kappa * np.sum(wts * da * db)
    return m, k


def soliton_mpmath(t, x, c, x0, sign=1):
    """High-precision traveling-wave value 4 atan(exp(g))."""
    with mpmath.workdps(50):
        g = mpmath.mpf(sign) * (mpmath.mpf(x) - mpmath.mpf(x0)
                                - mpmath.mpf(c) * mpmath.mpf(t))
        g = g / mpmath.sqrt(1 - mpmath.mpf(c) ** 2)
        return float(4 * mpmath.atan(mpmath.exp(g)))


def soliton_dt_mpmath(t, x, c, x0, sign=1, h=1e-20):
    """du/dt via complex-step-free high-precision central difference."""
    with mpmath.workdps(60):
        hh = mpmath.mpf(h)

        def u(tt):
            g = mpmath.mpf(sign) * (mpmath.mpf(x) - mpmath.mpf(x0)
                                    - mpmath.mpf(c) * tt)
            g = g / mpmath.sqrt(1 - mpmath.mpf(c) ** 2)
            return 4 * mpmath.atan(mpmath.exp(g))

        tt = mpmath.mpf(t)
        return float((u(tt + hh) - u(tt - hh)) / (2 * hh))


def fd_jacobian_central(fun, z, eps=1e-6):
    n = z.shape[0]
    jac = np.empty((n, fun(z).shape[0]))
    for i in range(n):
        h = eps * (1.0 + abs(z[i]))
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        jac[i] = (fun(zp) - fun(zm)) / (2.0 * h)
    return jac.T

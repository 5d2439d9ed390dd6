"""Second-order symplectic time integrators.

Implicit midpoint for canonical and generalized Hamiltonian systems
(any constant skew structure folded into the rhs), and Stormer-Verlet
in canonical coordinates.  Both solve their implicit stages to a
residual of newton_tol * (1 + ||z||).

Nonlinear stage solves: full-Jacobian (chord) Newton below dimension
NEWTON_DIM_LIMIT, fixed-point iteration at or above it.  Systems that
expose a linear/nonlinear split may request the preconditioned
fixed-point variant that solves against the frozen linear part; the
solver escalates automatically (picard -> preconditioned -> Newton)
when an iteration stalls, and the escalation is sticky across steps.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractError, StepFailure

NEWTON_DIM_LIMIT = 256


@dataclass
class IntegratorConfig:
    """Time grid and nonlinear-solver settings.

    dt and t_final define the uniform step grid; snapshot_stride thins
    the stored trajectory (every stride-th step is kept, step 0 always).
    """

    dt: float
    t_final: float
    scheme: str = "implicit_midpoint"
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    snapshot_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ContractError(f"dt must be positive, got {self.dt}")
        if self.t_final < 0.0:
            raise ContractError(f"t_final must be nonnegative, got {self.t_final}")
        if self.newton_tol <= 0.0:
            raise ContractError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ContractError("newton_max_iter must be at least 1")
        if self.snapshot_stride < 1 or int(self.snapshot_stride) != self.snapshot_stride:
            raise ContractError("snapshot_stride must be a positive integer")
        if self.scheme not in ("implicit_midpoint", "stormer_verlet"):
            raise ContractError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


@dataclass
class Trajectory:
    """Stored time grid, states (one column per stored time) and traces."""

    times: np.ndarray
    states: np.ndarray
    hamiltonian: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def n_stored(self):
        return self.times.shape[0]


class MidpointSystem:
    """Adapter interface consumed by implicit_midpoint_run.

    Required: dim, rhs(z).  Optional hooks unlock faster solvers:
    linear_matrix() returning (M, b) with rhs(z) = M z + b
    [+ nonlinear_rhs(z)], nonlinear_rhs(z), rhs_jacobian(z),
    hamiltonian(z), diagnostics(z), solver_hint in
    {None, "picard", "semi", "newton"}.
    """

    dim = None
    solver_hint = None

    def rhs(self, z):
        raise NotImplementedError

    def linear_matrix(self):
        return None

    def nonlinear_rhs(self, z):
        return None

    def rhs_jacobian(self, z):
        return None

    def hamiltonian(self, z):
        return None

    def diagnostics(self, z):
        return {}


class ModelMidpointSystem(MidpointSystem):
    """Canonical-form model adapter: rhs = J (L z + grad f + c_b)."""

    def __init__(self, model):
        from .symplectic import j_apply
        self._j_apply = j_apply
        self.model = model
        self.dim = model.dim2n
        self.solver_hint = None

    def rhs(self, z):
        return self.model.rhs(z)

    def linear_matrix(self):
        m = self._j_apply(self.model.L.matrix)
        b = self._j_apply(self.model.c_b)
        return m, b

    def nonlinear_rhs(self, z):
        if self.model.is_linear:
            return None
        return self._j_apply(self.model.nonlinear_grad(z))

    def rhs_jacobian(self, z):
        h = self.model.L.matrix.copy()
        d = self.model.nonlinear_hess_diag(z)
        if d is not None:
            h[np.diag_indices_from(h)] += d
        return self._j_apply(h)

    def hamiltonian(self, z):
        return self.model.hamiltonian(z)

    def diagnostics(self, z):
        return self.model.diagnostics(z)

    @property
    def is_linear(self):
        return self.model.is_linear


class _MidpointSolver:
    """Per-run solver state: cached factorizations and sticky strategy."""

    def __init__(self, system, dt, tol, max_iter):
        self.system = system
        self.dt = dt
        self.tol = tol
        self.max_iter = max_iter
        self._lin = None          # (M, b) or False once probed
        self._semi_lu = None      # lu of (I - dt/2 M)
        self._chord_lu = None
        self._chord_point = None
        self.strategy = self._initial_strategy()

    def _linear_parts(self):
        if self._lin is None:
            parts = self.system.linear_matrix()
            self._lin = parts if parts is not None else False
        return self._lin

    def _initial_strategy(self):
        hint = getattr(self.system, "solver_hint", None)
        if hint in ("picard", "semi", "newton"):
            return hint
        is_linear = getattr(self.system, "is_linear", False)
        if is_linear and self._linear_parts() is not False:
            return "direct"
        if self.system.dim >= NEWTON_DIM_LIMIT:
            return "picard"
        return "newton"

    def _semi_factor(self):
        if self._semi_lu is None:
            parts = self._linear_parts()
            if parts is False:
                return None
            m, b = parts
            a = np.eye(self.system.dim) - 0.5 * self.dt * m
            self._semi_lu = (scipy.linalg.lu_factor(a, check_finite=False), m, b)
        return self._semi_lu

    def step(self, z, step_index, u_pred):
        """Advance one step; returns (z_next, midpoint)."""
        tol = 0.5 * self.tol * (1.0 + float(np.linalg.norm(z)))
        while True:
            if self.strategy == "direct":
                u = self._step_direct(z)
            elif self.strategy == "picard":
                u = self._step_picard(z, tol, u_pred)
            elif self.strategy == "semi":
                u = self._step_semi(z, tol, u_pred)
            else:
                u = self._step_newton(z, tol, u_pred, step_index)
            if u is not None:
                return 2.0 * u - z, u
            # stalled: escalate and retry the same step
            nxt = self._escalate()
            if nxt is None:
                raise StepFailure("implicit midpoint stage did not converge", step_index)
            self.strategy = nxt

    def _escalate(self):
        if self.strategy == "picard":
            return "semi" if self._linear_parts() is not False else "newton"
        if self.strategy == "semi":
            return "newton"
        return None

    def _step_direct(self, z):
        lu, m, b = self._semi_factor()
        u = scipy.linalg.lu_solve(lu, z + 0.5 * self.dt * b, check_finite=False)
        return u

    def _step_picard(self, z, tol, u_pred):
        u = u_pred
        d_prev = np.inf
        grow = 0
        for _ in range(self.max_iter):
            u_new = z + 0.5 * self.dt * self.system.rhs(u)
            d = float(np.linalg.norm(u_new - u))
            u = u_new
            if d <= tol:
                return u
            if d > d_prev:
                grow += 1
                if grow >= 3 or not np.isfinite(d):
                    return None
            else:
                grow = 0
            d_prev = d
        return None

    def _step_semi(self, z, tol, u_pred):
        fac = self._semi_factor()
        if fac is None:
            return None
        lu, m, b = fac
        u = u_pred
        d_prev = np.inf
        grow = 0
        for _ in range(self.max_iter):
            nl = self.system.nonlinear_rhs(u)
            r = z + 0.5 * self.dt * b
            if nl is not None:
                r = r + 0.5 * self.dt * nl
            u_new = scipy.linalg.lu_solve(lu, r, check_finite=False)
            d = float(np.linalg.norm(u_new - u))
            u = u_new
            if d <= tol:
                return u
            if d > d_prev:
                grow += 1
                if grow >= 2 or not np.isfinite(d):
                    return None
            else:
                grow = 0
            d_prev = d
        return None

    def _step_newton(self, z, tol, u_pred, step_index):
        u = u_pred.copy()
        half = 0.5 * self.dt

        def residual(v):
            return v - z - half * self.system.rhs(v)

        r = residual(u)
        rn = float(np.linalg.norm(r))
        refreshed = False
        if self._chord_lu is None:
            self._refresh_jacobian(u, step_index)
            refreshed = True
        for _ in range(self.max_iter):
            if rn <= tol:
                return u
            du = scipy.linalg.lu_solve(self._chord_lu, r, check_finite=False)
            u = u - du
            r = residual(u)
            rn_new = float(np.linalg.norm(r))
            if rn_new > 0.25 * rn and not refreshed:
                # chord Jacobian went stale; rebuild at the current point
                self._refresh_jacobian(u, step_index)
                refreshed = True
            elif rn_new > 0.25 * rn:
                refreshed = False
            rn = rn_new
        raise StepFailure("Newton iteration for the midpoint stage did not converge",
                          step_index)

    def _refresh_jacobian(self, u, step_index):
        jac = self.system.rhs_jacobian(u)
        if jac is None:
            jac = _fd_jacobian(self.system.rhs, u)
        a = np.eye(self.system.dim) - 0.5 * self.dt * jac
        try:
            self._chord_lu = scipy.linalg.lu_factor(a, check_finite=False)
        except scipy.linalg.LinAlgError:
            raise StepFailure("singular midpoint stage Jacobian", step_index) from None
        self._chord_point = u.copy()


def _fd_jacobian(fun, z, eps=1e-7):
    n = z.shape[0]
    f0 = fun(z)
    jac = np.empty((n, n))
    for i in range(n):
        h = eps * (1.0 + abs(z[i]))
        zp = z.copy()
        zp[i] += h
        jac[:, i] = (fun(zp) - f0) / h
    return jac


def midpoint_step(system, z, dt, newton_tol=1e-12, newton_max_iter=50):
    """Single implicit midpoint step (dt may be negative); test helper."""
    solver = _MidpointSolver(system, dt, newton_tol, newton_max_iter)
    u_pred = z + 0.5 * dt * system.rhs(z)
    z_next, _ = solver.step(z, 0, u_pred)
    return z_next


def _alloc_trajectory(system, z0, config):
    n_steps = config.n_steps
    stride = config.snapshot_stride
    n_stored = n_steps // stride + 1
    dim = z0.shape[0]
    times = config.dt * stride * np.arange(n_stored)
    states = np.empty((dim, n_stored))
    ham = np.full(n_stored, np.nan)
    extras = {}
    d0 = system.diagnostics(z0) if hasattr(system, "diagnostics") else {}
    for key in d0:
        extras[key] = np.full(n_stored, np.nan)
    return times, states, ham, extras


def _record(system, z, slot, states, ham, extras):
    states[:, slot] = z
    h = system.hamiltonian(z) if hasattr(system, "hamiltonian") else None
    if h is not None:
        ham[slot] = h
    if extras:
        for key, val in system.diagnostics(z).items():
            extras[key][slot] = val


def implicit_midpoint_run(system, z0, config):
    """Integrate dz/dt = rhs(z) with the implicit midpoint rule.

    Each step solves z1 = z0 + dt * rhs((z0 + z1)/2) to a residual of
    newton_tol * (1 + ||z0||).  Quadratic invariants of the flow are
    conserved to solver tolerance.

    Parameters
    ----------
    system : MidpointSystem
    z0 : ndarray
        Initial state.
    config : IntegratorConfig

    Returns
    -------
    Trajectory

    Raises
    ------
    StepFailure
        When a stage iteration fails to converge (carries the step index).
    """
    z = np.array(z0, dtype=float)
    times, states, ham, extras = _alloc_trajectory(system, z, config)
    _record(system, z, 0, states, ham, extras)
    solver = _MidpointSolver(system, config.dt, config.newton_tol, config.newton_max_iter)
    stride = config.snapshot_stride
    shift = None
    slot = 1
    for m in range(config.n_steps):
        if shift is None:
            u_pred = z + 0.5 * config.dt * system.rhs(z)
        else:
            u_pred = z + shift
        z_new, u = solver.step(z, m, u_pred)
        shift = u - z
        z = z_new
        if (m + 1) % stride == 0:
            _record(system, z, slot, states, ham, extras)
            slot += 1
    return Trajectory(times=times, states=states[:, :slot], hamiltonian=ham[:slot],
                      extras={k: v[:slot] for k, v in extras.items()})


# --------------------------------------------------------------------------
# Stormer-Verlet


class ModelVerletSystem:
    """Canonical-form model adapter for the Stormer-Verlet scheme."""

    def __init__(self, model):
        if model.dim2n % 2:
            raise ContractError("model dimension must be even")
        self.model = model
        self.n = model.dim2n // 2
        self.separable = getattr(model, "separable", False)

    def _grad(self, q, p):
        return self.model.grad_hamiltonian(np.concatenate([q, p]))

    def grad_q(self, q, p):
        return self._grad(q, p)[:self.n]

    def grad_p(self, q, p):
        return self._grad(q, p)[self.n:]

    def hessian(self, q, p):
        h = self.model.L.matrix.copy()
        d = self.model.nonlinear_hess_diag(np.concatenate([q, p]))
        if d is not None:
            h[np.diag_indices_from(h)] += d
        return h

    def hamiltonian(self, z):
        return self.model.hamiltonian(z)

    def diagnostics(self, z):
        return self.model.diagnostics(z)


class VerletSystem:
    """Adapter interface for stormer_verlet_run (canonical coordinates).

    Required: n (half dimension), grad_q(q, p), grad_p(q, p).
    separable=True marks grad_p independent of q and grad_q independent
    of p, which makes every stage explicit.  Non-separable systems need
    hessian(q, p) (full 2n x 2n) or small enough n for finite
    differences.
    """

    n = None
    separable = False

    def grad_q(self, q, p):
        raise NotImplementedError

    def grad_p(self, q, p):
        raise NotImplementedError

    def hessian(self, q, p):
        return None

    def hamiltonian(self, z):
        return None

    def diagnostics(self, z):
        return {}


def _stage_newton(fun, jac_fun, u0, tol, max_iter, step_index):
    u = u0.copy()
    for _ in range(max_iter):
        r = fun(u)
        rn = float(np.linalg.norm(r))
        if rn <= tol:
            return u
        jac = jac_fun(u)
        try:
            du = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            raise StepFailure("singular Verlet stage Jacobian", step_index) from None
        u = u - du
    r = fun(u)
    if float(np.linalg.norm(r)) <= tol:
        return u
    raise StepFailure("Verlet stage Newton did not converge", step_index)


def stormer_verlet_run(system, z0, config):
    """Integrate with the three-stage Stormer-Verlet scheme.

    The system must be in canonical coordinates (structure matrix J);
    generalized structures are transformed first via factor_structure.
    For separable Hamiltonians every stage is explicit; otherwise the
    q- and p-implicit half stages are solved by Newton iteration.
    """
    z = np.array(z0, dtype=float)
    n = system.n
    if z.shape[0] != 2 * n:
        raise ContractError(f"state length {z.shape[0]} does not match 2n = {2 * n}")
    times, states, ham, extras = _alloc_trajectory(system, z, config)
    _record(system, z, 0, states, ham, extras)
    dt = config.dt
    half = 0.5 * dt
    stride = config.snapshot_stride
    slot = 1
    q = z[:n].copy()
    p = z[n:].copy()
    for m in range(config.n_steps):
        tol = 0.5 * config.newton_tol * (1.0 + float(np.linalg.norm(np.concatenate([q, p]))))
        # stage 1: q_half = q + dt/2 grad_p(p, q_half)
        if system.separable:
            qh = q + half * system.grad_p(q, p)
        else:
            def f1(u):
                return u - q - half * system.grad_p(u, p)

            def j1(u):
                hess = system.hessian(u, p)
                if hess is None:
                    return np.eye(n) - half * _fd_jacobian(
                        lambda v: system.grad_p(v, p), u)
                return np.eye(n) - half * hess[n:, :n]

            qh = _stage_newton(f1, j1, q + half * system.grad_p(q, p), tol,
                               config.newton_max_iter, m)
        # stage 2: p1 = p - dt/2 (grad_q(qh, p) + grad_q(qh, p1))
        gq_a = system.grad_q(qh, p)
        if system.separable:
            p1 = p - dt * gq_a
        else:
            def f2(u):
                return u - p + half * (gq_a + system.grad_q(qh, u))

            def j2(u):
                hess = system.hessian(qh, u)
                if hess is None:
                    return np.eye(n) + half * _fd_jacobian(
                        lambda v: system.grad_q(qh, v), u)
                return np.eye(n) + half * hess[:n, n:]

            p1 = _stage_newton(f2, j2, p - dt * gq_a, tol, config.newton_max_iter, m)
        # stage 3: explicit
        q = qh + half * system.grad_p(qh, p1)
        p = p1
        if (m + 1) % stride == 0:
            _record(system, np.concatenate([q, p]), slot, states, ham, extras)
            slot += 1
    return Trajectory(times=times, states=states[:, :slot], hamiltonian=ham[:slot],
                      extras={k: v[:slot] for k, v in extras.items()})

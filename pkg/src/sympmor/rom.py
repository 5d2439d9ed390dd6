"""Reduced-order model assembly and integration.

Symplectic reduction with a working pair (A, B), X A = B: the reduced
system is dy/dt = J_r (L_r y + c_r + n_r(y)) with

    J_r = (X B)^T J (X B),   L_r = A^T L A,   c_r = A^T c_b,

and the reduced energy is the full Hamiltonian of the decoded state,
H(A y), which the reduced flow conserves exactly because J_r is skew.
The nonlinear term n_r is either evaluated exactly (A^T grad f(A y))
or interpolated: with sample matrix P and U = X B (square system,
r = 2k columns), A^T U = B^T X^-1 X B = I collapses the reduced term to

    n_r(y) = (P^T U)^-1 P^T grad f(A y),

which needs grad f only at the sampled rows.  The online evaluator for
that path holds nothing sized by the full dimension: decoder rows at
the sample stencil, the reduced operators, and the factored P^T U.

POD reduction (weighted Galerkin, V^T X V = I) is assembled alongside
as the non-structure-preserving baseline, optionally with classic
interpolation of the nonlinear term from separate gradient modes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, ContractError
from .greedy import DeimOperator, deim_select
from .integrators import (IntegratorConfig, MidpointSystem, Trajectory,
                          VerletSystem, implicit_midpoint_run,
                          stormer_verlet_run)
from .symplectic import (SymplecticBasis, factor_structure, j_apply, jt_apply)
from .weighted import PodBasis, WeightMatrix

ROM_SKEW_TOL = 1e-10
ROM_SYM_TOL = 1e-10


@dataclass
class ReducedModel:
    """Offline-assembled reduced system.

    kind is "symplectic" or "pod"; nonlinear_path is one of "none",
    "exact", "symplectic_deim", "deim_baseline".  Fields not used by a
    given kind/path stay None.
    """

    kind: str
    nonlinear_path: str
    model: object
    decoder: np.ndarray
    y0: np.ndarray
    j_r: np.ndarray = None
    l_r: np.ndarray = None
    c_r: np.ndarray = None
    m_r: np.ndarray = None
    b_r: np.ndarray = None
    s_r: np.ndarray = None
    deim: DeimOperator = None
    deim_modes: np.ndarray = None
    p_r: np.ndarray = None
    a_rows: np.ndarray = None
    stencil: np.ndarray = None
    basis: SymplecticBasis = None
    pod: PodBasis = None

    @property
    def dim(self):
        return self.decoder.shape[1]

    @property
    def full_dim(self):
        return self.decoder.shape[0]

    def validate(self):
        if self.kind == "symplectic":
            skew = np.linalg.norm(self.j_r + self.j_r.T)
            if skew > ROM_SKEW_TOL * max(1.0, np.linalg.norm(self.j_r)):
                raise AssemblyError(f"reduced structure matrix not skew: {skew:.3e}")
            sym = np.linalg.norm(self.l_r - self.l_r.T)
            if sym > ROM_SYM_TOL * max(1.0, np.linalg.norm(self.l_r)):
                raise AssemblyError(f"reduced quadratic part not symmetric: {sym:.3e}")
        return True


def _basis_weight(basis):
    if basis.weight is not None:
        return basis.weight
    return WeightMatrix.identity(basis.n2)


def _reduced_linear(model, basis):
    weight = _basis_weight(basis)
    u = weight.apply(basis.B)
    j_r = u.T @ j_apply(u)
    skew = np.linalg.norm(j_r + j_r.T)
    if skew > ROM_SKEW_TOL * max(1.0, np.linalg.norm(j_r)):
        raise AssemblyError(f"reduced structure matrix not skew: {skew:.3e}")
    j_r = 0.5 * (j_r - j_r.T)
    l_r = basis.A.T @ model.apply_L(basis.A)
    sym = np.linalg.norm(l_r - l_r.T)
    if sym > ROM_SYM_TOL * max(1.0, np.linalg.norm(l_r)):
        raise AssemblyError(f"reduced quadratic part not symmetric: {sym:.3e}")
    l_r = 0.5 * (l_r + l_r.T)
    c_r = basis.A.T @ model.c_b
    y0 = basis.B.T @ weight.apply(model.z0)
    return j_r, l_r, c_r, y0


def assemble_linear_rom(model, basis):
    """Reduce a linear canonical model onto a symplectic basis."""
    if basis.n2 != model.dim2n:
        raise ContractError("basis and model dimensions differ")
    if not model.is_linear:
        raise ContractError("model has a nonlinear term; use assemble_nonlinear_rom")
    j_r, l_r, c_r, y0 = _reduced_linear(model, basis)
    return ReducedModel(kind="symplectic", nonlinear_path="none", model=model,
                        decoder=basis.A, y0=y0, j_r=j_r, l_r=l_r, c_r=c_r,
                        basis=basis)


def assemble_nonlinear_rom(model, basis, interpolate=False):
    """Reduce a nonlinear canonical model onto a symplectic basis.

    interpolate=False evaluates the reduced gradient term exactly
    (cost scales with the full dimension); interpolate=True builds the
    square sampled system over the columns of X B, so the basis should
    already be enriched to cover the gradient snapshots.
    """
    if basis.n2 != model.dim2n:
        raise ContractError("basis and model dimensions differ")
    if model.is_linear:
        return assemble_linear_rom(model, basis)
    j_r, l_r, c_r, y0 = _reduced_linear(model, basis)
    rom = ReducedModel(kind="symplectic", nonlinear_path="exact", model=model,
                       decoder=basis.A, y0=y0, j_r=j_r, l_r=l_r, c_r=c_r,
                       basis=basis)
    if interpolate:
        weight = _basis_weight(basis)
        deim = deim_select(weight.apply(basis.B))
        rom.nonlinear_path = "symplectic_deim"
        rom.deim = deim
        rom.stencil = model.grad_stencil(deim.indices)
        rom.a_rows = np.array(basis.A[rom.stencil, :])
    return rom


def assemble_pod_rom(model, pod, deim_modes=None):
    """Weighted Galerkin POD reduction (not structure preserving).

    deim_modes, when given, are interpolation modes for the nonlinear
    gradient (columns spanning the sampled gradient snapshots); the
    online term is then p_r (P^T U_g)^-1 P^T grad f.
    """
    if pod.V.shape[0] != model.dim2n:
        raise ContractError("POD basis and model dimensions differ")
    weight = pod.weight if pod.weight is not None else WeightMatrix.identity(model.dim2n)
    v = pod.V
    u = weight.apply(v)
    s_r = jt_apply(u).T          # = V^T X J
    m_r = s_r @ model.apply_L(v)
    b_r = s_r @ model.c_b
    y0 = u.T @ model.z0
    l_r = v.T @ model.apply_L(v)
    l_r = 0.5 * (l_r + l_r.T)
    path = "none" if model.is_linear else "exact"
    rom = ReducedModel(kind="pod", nonlinear_path=path, model=model, decoder=v,
                       y0=y0, l_r=l_r, m_r=m_r, b_r=b_r, s_r=s_r, pod=pod)
    if deim_modes is not None:
        if model.is_linear:
            raise ContractError("interpolation modes given for a linear model")
        deim = deim_select(np.asarray(deim_modes, dtype=float))
        rom.nonlinear_path = "deim_baseline"
        rom.deim = deim
        rom.deim_modes = np.asarray(deim_modes, dtype=float)
        rom.p_r = s_r @ rom.deim_modes
        rom.stencil = model.grad_stencil(deim.indices)
        rom.a_rows = np.array(v[rom.stencil, :])
    return rom


def decode(rom, y):
    """Map reduced coordinates (vector or column-stacked) to full states."""
    return rom.decoder @ y


def reduced_hamiltonian(rom, y):
    """Energy of the decoded state; the trace the reduced flow should hold."""
    return rom.model.hamiltonian(decode(rom, y))


# --------------------------------------------------------------------------
# online right-hand-side cores


class _SymplecticCore:
    """Exact (or linear-only) reduced rhs; holds the full decoder."""

    def __init__(self, rom):
        self.rom = rom
        self.jl = rom.j_r @ rom.l_r
        self.jc = rom.j_r @ rom.c_r
        self.is_linear = rom.nonlinear_path == "none"

    def rhs(self, y):
        out = self.jl @ y + self.jc
        nl = self.nonlinear_rhs(y)
        if nl is not None:
            out = out + nl
        return out

    def linear_matrix(self):
        return self.jl, self.jc

    def nonlinear_rhs(self, y):
        if self.is_linear:
            return None
        rom = self.rom
        z = rom.decoder @ y
        return rom.j_r @ (rom.decoder.T @ rom.model.nonlinear_grad(z))

    def rhs_jacobian(self, y):
        rom = self.rom
        jac = rom.l_r.copy()
        if not self.is_linear:
            z = rom.decoder @ y
            d = rom.model.nonlinear_hess_diag(z)
            if d is None:
                return None
            jac += rom.decoder.T @ (d[:, None] * rom.decoder)
        return rom.j_r @ jac

    def hess_r(self, y):
        rom = self.rom
        hess = rom.l_r.copy()
        if not self.is_linear:
            z = rom.decoder @ y
            d = rom.model.nonlinear_hess_diag(z)
            if d is None:
                return None
            hess += rom.decoder.T @ (d[:, None] * rom.decoder)
        return hess

    def grad_reduced(self, y):
        rom = self.rom
        g = rom.l_r @ y + rom.c_r
        if not self.is_linear:
            z = rom.decoder @ y
            g = g + rom.decoder.T @ rom.model.nonlinear_grad(z)
        return g


class _SymplecticDeimCore:
    """Sampled reduced rhs.  Holds only reduced-size arrays: J_r, L_r,
    c_r, the decoder rows at the sample stencil, and the factored
    interpolation system.  grad_rows is the model's row-sampled
    gradient; the full-state gradient is never evaluated."""

    is_linear = False

    def __init__(self, rom):
        self.j_r = rom.j_r
        self.jl = rom.j_r @ rom.l_r
        self.jc = rom.j_r @ rom.c_r
        self.l_r = rom.l_r
        self.c_r = rom.c_r
        self.a_rows = rom.a_rows
        self.deim = rom.deim
        self.rows = rom.deim.indices
        self.grad_rows = rom.model.grad_rows

    def rhs(self, y):
        return self.jl @ y + self.jc + self.nonlinear_rhs(y)

    def linear_matrix(self):
        return self.jl, self.jc

    def term(self, y):
        vals = self.a_rows @ y
        return self.deim.solve(self.grad_rows(self.rows, vals))

    def nonlinear_rhs(self, y):
        return self.j_r @ self.term(y)

    def rhs_jacobian(self, y):
        return None

    def hess_r(self, y):
        return None

    def grad_reduced(self, y):
        return self.l_r @ y + self.c_r + self.term(y)


class _PodCore:
    """Galerkin rhs m_r y + b_r + s_r grad f(V y) (exact term)."""

    def __init__(self, rom):
        self.rom = rom
        self.is_linear = rom.nonlinear_path == "none"

    def rhs(self, y):
        out = self.rom.m_r @ y + self.rom.b_r
        nl = self.nonlinear_rhs(y)
        if nl is not None:
            out = out + nl
        return out

    def linear_matrix(self):
        return self.rom.m_r, self.rom.b_r

    def nonlinear_rhs(self, y):
        if self.is_linear:
            return None
        rom = self.rom
        return rom.s_r @ rom.model.nonlinear_grad(rom.decoder @ y)

    def rhs_jacobian(self, y):
        rom = self.rom
        jac = rom.m_r.copy()
        if not self.is_linear:
            d = rom.model.nonlinear_hess_diag(rom.decoder @ y)
            if d is None:
                return None
            jac += rom.s_r @ (d[:, None] * rom.decoder)
        return jac

    def hess_r(self, y):
        return None

    def grad_reduced(self, y):
        return None


class _PodDeimCore:
    """Galerkin rhs with the interpolated gradient term."""

    is_linear = False

    def __init__(self, rom):
        self.m_r = rom.m_r
        self.b_r = rom.b_r
        self.p_r = rom.p_r
        self.a_rows = rom.a_rows
        self.deim = rom.deim
        self.rows = rom.deim.indices
        self.grad_rows = rom.model.grad_rows

    def rhs(self, y):
        return self.m_r @ y + self.b_r + self.nonlinear_rhs(y)

    def linear_matrix(self):
        return self.m_r, self.b_r

    def nonlinear_rhs(self, y):
        vals = self.a_rows @ y
        return self.p_r @ self.deim.solve(self.grad_rows(self.rows, vals))

    def rhs_jacobian(self, y):
        return None

    def hess_r(self, y):
        return None

    def grad_reduced(self, y):
        return None


_CORES = {
    ("symplectic", "none"): _SymplecticCore,
    ("symplectic", "exact"): _SymplecticCore,
    ("symplectic", "symplectic_deim"): _SymplecticDeimCore,
    ("pod", "none"): _PodCore,
    ("pod", "exact"): _PodCore,
    ("pod", "deim_baseline"): _PodDeimCore,
}


def make_core(rom):
    try:
        cls = _CORES[(rom.kind, rom.nonlinear_path)]
    except KeyError:
        raise ContractError(
            f"no evaluator for kind={rom.kind!r} path={rom.nonlinear_path!r}") from None
    return cls(rom)


class RomMidpointSystem(MidpointSystem):
    """Midpoint adapter around an rhs core; the energy trace decodes."""

    def __init__(self, rom):
        self.rom = rom
        self.core = make_core(rom)
        self.dim = rom.dim
        self.is_linear = self.core.is_linear
        self.solver_hint = None if self.is_linear else "semi"

    def rhs(self, y):
        return self.core.rhs(y)

    def linear_matrix(self):
        return self.core.linear_matrix()

    def nonlinear_rhs(self, y):
        return self.core.nonlinear_rhs(y)

    def rhs_jacobian(self, y):
        return self.core.rhs_jacobian(y)

    def hamiltonian(self, y):
        return reduced_hamiltonian(self.rom, y)


class _TransformedVerletSystem(VerletSystem):
    """Canonical coordinates for dy/dt = J_r grad H_r(y) via y = T zhat."""

    separable = False

    def __init__(self, rom, core, t_mat):
        self.rom = rom
        self.core = core
        self.t = t_mat
        self.n = rom.dim // 2

    def _grad(self, q, p):
        y = self.t @ np.concatenate([q, p])
        return self.t.T @ self.core.grad_reduced(y)

    def grad_q(self, q, p):
        return self._grad(q, p)[:self.n]

    def grad_p(self, q, p):
        return self._grad(q, p)[self.n:]

    def hessian(self, q, p):
        y = self.t @ np.concatenate([q, p])
        h = self.core.hess_r(y)
        if h is None:
            return None
        return self.t.T @ h @ self.t

    def hamiltonian(self, zhat):
        return reduced_hamiltonian(self.rom, self.t @ zhat)


def run_rom(rom, config):
    """Integrate the reduced system; returns a reduced-state Trajectory.

    implicit_midpoint integrates dy/dt directly.  stormer_verlet first
    factors J_r = T J T^T and integrates the transformed canonical
    system, mapping the stored states back through T; it needs a
    Hamiltonian reduced system (symplectic kind).
    """
    rom.validate()
    if config.scheme == "implicit_midpoint":
        system = RomMidpointSystem(rom)
        return implicit_midpoint_run(system, rom.y0, config)
    if rom.kind != "symplectic":
        raise ContractError("stormer_verlet needs a Hamiltonian reduced system")
    core = make_core(rom)
    fact = factor_structure(rom.j_r)
    t_mat = fact.T
    system = _TransformedVerletSystem(rom, core, t_mat)
    zhat0 = np.linalg.solve(t_mat, rom.y0)
    traj = stormer_verlet_run(system, zhat0, config)
    states = t_mat @ traj.states
    return Trajectory(times=traj.times, states=states,
                      hamiltonian=traj.hamiltonian, extras=traj.extras)


def rom_hamiltonian_trace(rom, states):
    """Energies of decoded reduced states, one per column."""
    return np.array([reduced_hamiltonian(rom, states[:, i])
                     for i in range(states.shape[1])])

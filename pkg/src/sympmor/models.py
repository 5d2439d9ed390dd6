"""Full-order Hamiltonian models in canonical form.

Both models expose

    dz/dt = J (L z + grad_f(z) + c_b),   H(z) = 1/2 z^T L z + f(z) + z^T c_b,

with z = (q, p), L SPD, and a constant forcing c_b carrying the
Dirichlet boundary lift.  H is the exact first integral of the stated
ODE system, so it is the quantity monitored by the integrators.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, MeshError, ParameterError
from .linalg import SpdMatrix, as_vector
from .symplectic import j_apply
from .weighted import WeightMatrix


@dataclass
class HamiltonianModel:
    """Canonical-form Hamiltonian model.

    Attributes
    ----------
    L : SpdMatrix
        Quadratic energy matrix (2n x 2n).
    c_b : ndarray, shape (2n,)
        Constant forcing (boundary lift).
    z0 : ndarray, shape (2n,)
        Initial state.
    weight : WeightMatrix
        Inner-product weight; defaults to the energy matrix L.
    name : str
    """

    L: SpdMatrix
    c_b: np.ndarray
    z0: np.ndarray
    weight: WeightMatrix = None
    name: str = "model"
    # True when grad H splits (dH/dq independent of p and vice versa),
    # which makes every Stormer-Verlet stage explicit
    separable = False

    def __post_init__(self):
        self.c_b = as_vector(self.c_b, "c_b")
        self.z0 = as_vector(self.z0, "z0")
        if self.L.n != self.c_b.shape[0] or self.L.n != self.z0.shape[0]:
            raise ContractError("model dimensions are inconsistent")
        if self.L.n % 2:
            raise ContractError("state dimension must be even")
        if self.weight is None:
            self.weight = WeightMatrix(self.L.matrix, name="energy weight")

    @property
    def dim2n(self):
        return self.L.n

    # nonlinear part; the base model is linear
    def nonlinear_grad(self, z):
        """grad f(z); zero for a linear model."""
        return np.zeros_like(z)

    def nonlinear_value(self, z):
        """f(z); zero for a linear model."""
        return 0.0

    def nonlinear_hess_diag(self, z):
        """Diagonal of the Hessian of f, or None when f is zero."""
        return None

    @property
    def is_linear(self):
        return type(self).nonlinear_grad is HamiltonianModel.nonlinear_grad

    # stencil hooks for hyper-reduced evaluation -------------------------
    def grad_stencil(self, rows):
        """State components needed to evaluate grad f at the given rows.

        The default (pointwise nonlinearity or none) is the rows
        themselves.
        """
        return np.asarray(rows, dtype=int)

    def grad_rows(self, rows, vals):
        """Components of grad f at `rows` given the state values there."""
        return np.zeros(len(rows))

    # evaluation ---------------------------------------------------------
    def apply_L(self, z):
        """L @ z; models may override with a stencil-aware fast path."""
        return self.L.matrix @ z

    def rhs(self, z):
        """J (L z + grad f(z) + c_b)."""
        return j_apply(self.apply_L(z) + self.nonlinear_grad(z) + self.c_b)

    def hamiltonian(self, z):
        """H(z) = 1/2 z^T L z + f(z) + z^T c_b."""
        return float(0.5 * (z @ self.apply_L(z)) + self.nonlinear_value(z) + z @ self.c_b)

    def grad_hamiltonian(self, z):
        return self.apply_L(z) + self.nonlinear_grad(z) + self.c_b

    def nonlinear_grad_matrix(self, states):
        """grad f applied column-wise to a snapshot matrix."""
        out = np.empty_like(states)
        for j in range(states.shape[1]):
            out[:, j] = self.nonlinear_grad(states[:, j])
        return out

    def diagnostics(self, z):
        """Named extra traces recorded along trajectories."""
        return {}


def eval_rhs(model, z):
    """rhs = J (L z + grad f(z) + c_b)."""
    return model.rhs(as_vector(z))


def eval_hamiltonian(model, z):
    return model.hamiltonian(as_vector(z))


def eval_nonlinear_grad(model, z):
    return model.nonlinear_grad(as_vector(z))


def check_gradient(model, rng, trials=50, eps=1e-5, rtol=1e-6):
    """Finite-difference consistency of H against its gradient.

    Compares (H(z+eps*d) - H(z-eps*d)) / (2 eps) with d^T grad H(z) for
    random states and directions; eps is scaled by the state magnitude.
    Returns the worst relative error observed.
    """
    worst = 0.0
    n2 = model.dim2n
    for _ in range(trials):
        z = rng.standard_normal(n2)
        d = rng.standard_normal(n2)
        d /= np.linalg.norm(d)
        h = eps * (1.0 + np.linalg.norm(z))
        num = (model.hamiltonian(z + h * d) - model.hamiltonian(z - h * d)) / (2.0 * h)
        ana = float(d @ model.grad_hamiltonian(z))
        scale = max(abs(ana), abs(num), 1e-8)
        worst = max(worst, abs(num - ana) / scale)
    if worst > rtol:
        raise ContractError(f"gradient check failed: relative error {worst:.2e}")
    return worst


# --------------------------------------------------------------------------
# sine-Gordon on a line segment with Dirichlet values (0, 2*pi)


def _sech(x):
    # 2 e^{-|x|} / (1 + e^{-2|x|}) avoids overflow for large |x|
    e = np.exp(-np.abs(x))
    return 2.0 * e / (1.0 + e * e)


def soliton_exact(t, x, c, x0, sign=1):
    """Traveling kink/anti-kink solution 4 atan(exp(+-(x - x0 - c t)/sqrt(1-c^2))).

    sign=+1 selects the kink, sign=-1 the anti-kink.  Vectorized in x.
    """
    if abs(c) >= 1.0:
        raise ParameterError(f"|c| must be below 1, got {c}")
    g = sign * (np.asarray(x, dtype=float) - x0 - c * t) / np.sqrt(1.0 - c * c)
    # atan(e^g) = pi/2 - atan(e^-g) keeps the exponential bounded
    em = np.exp(-np.abs(g))
    u = np.where(g >= 0.0, 2.0 * np.pi - 4.0 * np.arctan(em), 4.0 * np.arctan(em))
    if np.isscalar(x):
        return float(u)
    return u


def soliton_time_derivative(t, x, c, x0, sign=1):
    """du/dt of the traveling wave; used for the initial momentum."""
    if abs(c) >= 1.0:
        raise ParameterError(f"|c| must be below 1, got {c}")
    w = np.sqrt(1.0 - c * c)
    g = sign * (np.asarray(x, dtype=float) - x0 - c * t) / w
    du = -2.0 * sign * c / w * _sech(g)
    if np.isscalar(x):
        return float(du)
    return du


@dataclass
class SineGordonModel(HamiltonianModel):
    """Finite-difference sine-Gordon system on (0, l).

    Interior unknowns only; u(t,0) = 0 and u(t,l) = 2 pi enter through
    the constant c_b.  L = blockdiag(D^T D, I) with the forward
    difference matrix D of shape (n+1, n).
    """

    n: int = 0
    l: float = 0.0
    dx: float = 0.0
    D_x: np.ndarray = field(default=None, repr=False)
    c: float = 0.0
    x0: float = 0.0
    sign: int = 1
    grid: np.ndarray = field(default=None, repr=False)
    # L is block diagonal and f touches q only
    separable = True

    def nonlinear_grad(self, z):
        g = np.zeros_like(z)
        g[:self.n] = np.sin(z[:self.n])
        return g

    def nonlinear_value(self, z):
        return float(np.sum(1.0 - np.cos(z[:self.n])))

    def nonlinear_hess_diag(self, z):
        d = np.zeros_like(z)
        d[:self.n] = np.cos(z[:self.n])
        return d

    def grad_rows(self, rows, vals):
        # sin on q rows, zero on p rows; the stencil of row i is {i}
        rows = np.asarray(rows)
        out = np.where(rows < self.n, np.sin(vals), 0.0)
        return out

    def nonlinear_grad_matrix(self, states):
        out = np.zeros_like(states)
        out[:self.n] = np.sin(states[:self.n])
        return out

    def apply_L(self, z):
        # blockdiag(D^T D, I) via the second-difference stencil
        q = z[:self.n]
        p = z[self.n:]
        t = 2.0 * q
        t[1:] -= q[:-1]
        t[:-1] -= q[1:]
        out = np.empty_like(z)
        out[:self.n] = t / (self.dx * self.dx)
        out[self.n:] = p
        return out

    def hamiltonian(self, z):
        q = z[:self.n]
        p = z[self.n:]
        d = np.diff(q, prepend=0.0, append=0.0) / self.dx
        return float(0.5 * (p @ p) + 0.5 * (d @ d)
                     + np.sum(1.0 - np.cos(q)) + z @ self.c_b)

    def hamiltonian_grid_scaled(self, z):
        """Grid-scaled diagnostic dx*(1/2 ||p||^2 + ||D q||^2 + sum(1-cos q)).

        Not an invariant of the integrated ODE system (and not used as
        one); recorded for comparison only.
        """
        q = z[:self.n]
        p = z[self.n:]
        d = (self.D_x @ q)
        return float(self.dx * (0.5 * (p @ p) + d @ d + np.sum(1.0 - np.cos(q))))

    def diagnostics(self, z):
        return {"hamiltonian_grid_scaled": self.hamiltonian_grid_scaled(z)}


def build_sine_gordon(n, l, c, x0=None, sign=1):
    """Build the finite-difference sine-Gordon model.

    Parameters
    ----------
    n : int
        Number of interior grid points (n >= 3).
    l : float
        Domain length; dx = l / (n + 1).
    c : float
        Soliton speed, |c| < 1.
    x0 : float, optional
        Initial kink position, 0 < x0 < l.  Defaults to l / 2.
    sign : int
        +1 kink, -1 anti-kink.

    Returns
    -------
    SineGordonModel
        With z0 sampled from the soliton and its exact time derivative.
    """
    n = int(n)
    if n < 3:
        raise ParameterError(f"n must be at least 3, got {n}")
    if abs(c) >= 1.0:
        raise ParameterError(f"|c| must be below 1, got {c} (the soliton width degenerates)")
    if x0 is None:
        x0 = 0.5 * l
    if not 0.0 < x0 < l:
        raise ParameterError(f"x0 must lie inside (0, {l}), got {x0}")
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 (kink) or -1 (anti-kink)")
    dx = l / (n + 1)
    grid = dx * np.arange(1, n + 1)

    d_x = (np.eye(n + 1, n) - np.eye(n + 1, n, k=-1)) / dx
    big_l = np.zeros((2 * n, 2 * n))
    big_l[:n, :n] = d_x.T @ d_x
    big_l[n:, n:] = np.eye(n)

    # Dirichlet lift: u(t,l) = 2 pi enters the last interior stencil row
    beta = np.zeros(n)
    beta[-1] = 2.0 * np.pi / (dx * dx)
    c_b = np.concatenate([-beta, np.zeros(n)])

    q0 = soliton_exact(0.0, grid, c, x0, sign)
    p0 = soliton_time_derivative(0.0, grid, c, x0, sign)
    z0 = np.concatenate([q0, p0])

    model = SineGordonModel(
        L=SpdMatrix(big_l, name="sine-Gordon energy matrix"),
        c_b=c_b, z0=z0, weight=None, name="sine_gordon",
        n=n, l=float(l), dx=dx, D_x=d_x, c=float(c), x0=float(x0),
        sign=int(sign), grid=grid)
    return model


# --------------------------------------------------------------------------
# 1-d linear wave, hat-function FEM, clamped at both ends


@dataclass
class FemWaveModel(HamiltonianModel):
    """Linear wave equation, hat-function FEM on a possibly nonuniform mesh.

    State: q are nodal displacements at interior nodes, p = M qdot the
    conjugate momenta.  H = 1/2 p^T M^-1 p + 1/2 q^T K q - q^T g_q, which
    matches the canonical form with L = blockdiag(K, M^-1) and
    c_b = (-g_q, 0).
    """

    nodes: np.ndarray = None
    M: SpdMatrix = None
    K: SpdMatrix = None
    g_q: np.ndarray = None
    kappa: float = 1.0
    # L = blockdiag(K, M^-1), no nonlinear term
    separable = True


def _hat_mass_stiffness(nodes, kappa):
    """Closed-form hat-function mass and stiffness on interior nodes."""
    h = np.diff(nodes)
    ni = len(nodes) - 2
    m = np.zeros((ni, ni))
    k = np.zeros((ni, ni))
    for i in range(ni):
        hl, hr = h[i], h[i + 1]
        m[i, i] = (hl + hr) / 3.0
        k[i, i] = kappa * (1.0 / hl + 1.0 / hr)
        if i + 1 < ni:
            m[i, i + 1] = m[i + 1, i] = hr / 6.0
            k[i, i + 1] = k[i + 1, i] = -kappa / hr
    return m, k


def _hat_load(nodes, density):
    """Consistent load vector for the interior hat functions.

    3-point Gauss quadrature per element; exact for cubic densities.
    """
    x = np.asarray(nodes, dtype=float)
    h = np.diff(x)
    ni = len(x) - 2
    g = np.zeros(ni)
    gp = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
    gw = np.array([5.0, 8.0, 5.0]) / 9.0
    for e in range(len(h)):
        xm = 0.5 * (x[e] + x[e + 1])
        pts = xm + 0.5 * h[e] * gp
        fv = np.array([density(p) for p in pts], dtype=float)
        # local hats: rising toward node e+1, falling from node e
        rise = (pts - x[e]) / h[e]
        fall = (x[e + 1] - pts) / h[e]
        left, right = e - 1, e  # interior indices of the element's nodes
        if left >= 0:
            g[left] += 0.5 * h[e] * np.sum(gw * fv * fall)
        if right < ni:
            g[right] += 0.5 * h[e] * np.sum(gw * fv * rise)
    return g


def build_fem_wave(nodes, force_density=None, kappa=1.0):
    """Assemble the FEM wave model on the given node coordinates.

    Parameters
    ----------
    nodes : sequence
        Strictly increasing coordinates including both boundary nodes;
        at least 3 interior nodes.  Displacements are clamped to zero at
        both ends.
    force_density : callable or float or None
        Distributed load f(x); a float means a constant density, None
        means no load.
    kappa : float
        Stiffness coefficient scaling the bilinear form.

    Returns
    -------
    FemWaveModel
        At rest (z0 = 0) with the load folded into c_b.
    """
    x = np.asarray(nodes, dtype=float)
    if x.ndim != 1 or len(x) < 5:
        raise MeshError("need at least 5 nodes (3 interior)")
    if np.any(np.diff(x) <= 0.0):
        raise MeshError("node coordinates must be strictly increasing")
    if kappa <= 0.0:
        raise ParameterError(f"stiffness coefficient must be positive, got {kappa}")
    ni = len(x) - 2
    m, k = _hat_mass_stiffness(x, kappa)
    if force_density is None:
        g_q = np.zeros(ni)
    elif callable(force_density):
        g_q = _hat_load(x, force_density)
    else:
        amp = float(force_density)
        g_q = _hat_load(x, lambda _: amp)

    mass = SpdMatrix(m, name="mass matrix")
    stiff = SpdMatrix(k, name="stiffness matrix")
    minv = mass.solve(np.eye(ni))
    minv = 0.5 * (minv + minv.T)
    big_l = np.zeros((2 * ni, 2 * ni))
    big_l[:ni, :ni] = k
    big_l[ni:, ni:] = minv

    c_b = np.concatenate([-g_q, np.zeros(ni)])
    z0 = np.zeros(2 * ni)
    model = FemWaveModel(
        L=SpdMatrix(big_l, name="wave energy matrix"),
        c_b=c_b, z0=z0, weight=None, name="fem_wave",
        nodes=x, M=mass, K=stiff, g_q=g_q, kappa=float(kappa))
    return model

"""End-to-end acceptance suite: one test per advertised guarantee.

Every test prints a single live [PASS]/[FAIL] line with the measured
numbers (the `report` fixture bypasses capture) before asserting, so a
plain pytest run shows the whole scorecard even on failure.  The
full-order sine-Gordon trajectory and the k=100 weighted greedy basis
are module fixtures shared by the reduced-order tests; everything
downstream reuses the same reference states.
"""

import time
from types import SimpleNamespace

import numpy as np
import pytest

import oracles
from helpers import make_spd, make_weight, paired_snapshots, random_weighted_basis
from sympmor import (IntegratorConfig, ModelMidpointSystem, NumericalFailure,
                     WeightMatrix, WeightedStructure, assemble_linear_rom,
                     assemble_nonlinear_rom, assemble_pod_rom, build_fem_wave,
                     build_sine_gordon, check_symplectic, decode,
                     greedy_nonlinear_basis, greedy_symplectic_euclidean,
                     greedy_symplectic_weighted, implicit_midpoint_run, j_matrix,
                     midpoint_step, run_rom, spd_sqrt, stormer_verlet_run,
                     symplectic_inverse, weighted_pod,
                     weighted_symplectic_projection)
from sympmor.integrators import MidpointSystem, VerletSystem

# two-sided 95% Student-t quantile at 10 - 2 degrees of freedom; a block
# slope within T_CRIT standard errors of zero counts as "no secular trend"
T_CRIT = 2.306
N_BLOCKS = 10


def block_slope(times, values, blocks=N_BLOCKS):
    """Least-squares slope over block means, with its standard error."""
    edges = np.linspace(0, len(values), blocks + 1).astype(int)
    c = np.array([times[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])
    m = np.array([values[a:b].mean() for a, b in zip(edges[:-1], edges[1:])])
    cm, mm = c - c.mean(), m - m.mean()
    sxx = float((cm ** 2).sum())
    slope = float((cm * mm).sum()) / sxx
    resid = mm - slope * cm
    se = float(np.sqrt((resid ** 2).sum() / (blocks - 2) / sxx))
    return slope, se


# --- shared sine-Gordon pipeline ----------------------------------------


@pytest.fixture(scope="module")
def sg():
    """Full-order soliton run: l=50, n=500, dt=0.01, c=0.2, t in [0, 50]."""
    model = build_sine_gordon(500, 50.0, 0.2)
    conf = IntegratorConfig(dt=0.01, t_final=50.0)
    t0 = time.perf_counter()
    ref = implicit_midpoint_run(ModelMidpointSystem(model), model.z0, conf)
    wall = time.perf_counter() - t0
    states = ref.states
    nrm2 = np.maximum(np.linalg.norm(states, axis=0), 1e-300)
    nrmx = np.maximum(
        np.sqrt(np.einsum("ij,ij->j", states, model.apply_L(states))), 1e-300)
    return SimpleNamespace(model=model, conf=conf, ref=ref, wall=wall,
                           nrm2=nrm2, nrmx=nrmx)


@pytest.fixture(scope="module")
def sg_basis(sg):
    return greedy_symplectic_weighted(sg.ref.states, sg.model.weight, k_max=100)


def run_reduced(sg, rom):
    """Integrate a ROM on the reference grid; relative errors and H trend."""
    traj = run_rom(rom, sg.conf)
    dec = decode(rom, traj.states)
    diff = dec - sg.ref.states
    e2 = np.linalg.norm(diff, axis=0) / sg.nrm2
    ex = np.sqrt(np.maximum(
        np.einsum("ij,ij->j", diff, sg.model.apply_L(diff)), 0.0)) / sg.nrmx
    h = traj.hamiltonian
    dev = (h - h[0]) / max(abs(h[0]), 1e-300)
    slope, se = block_slope(traj.times, dev)
    return SimpleNamespace(traj=traj, e2=e2, ex=ex, drift=float(np.abs(dev).max()),
                           slope=slope, se=se)


# --- criterion 1: symplectic-inverse identities --------------------------


def test_symplectic_inverse_identities(report):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = np.zeros(4)
    for _ in range(100):
        n = int(rng.integers(2, 17))
        k = int(rng.integers(1, min(8, n) + 1))
        n2 = 2 * n
        cond = 10.0 ** rng.uniform(0.0, 4.0)
        weight = make_weight(rng, n2, cond)
        basis = random_weighted_basis(rng, n2, k, weight)
        a = basis.A
        ap = symplectic_inverse(basis).matrix()
        # left inverse
        d1 = np.abs(ap @ a - np.eye(2 * k)).max()
        # transposed inverse is symplectic for the inverse-weighted form
        _, d2 = check_symplectic(ap.T, WeightedStructure(weight, inverse=True))
        # taking the inverse twice returns the basis
        omi = WeightedStructure(weight, inverse=True).apply(np.eye(n2))
        cp = j_matrix(2 * k).T @ ap @ omi
        d3 = np.abs(cp.T - a).max() / (1.0 + np.abs(a).max())
        # orthonormality transfers between the lift and its dual
        rt = spd_sqrt(weight.matrix)
        at = rt @ a
        jt = rt @ j_matrix(n2) @ rt
        apt = j_matrix(2 * k).T @ at.T @ jt
        d4 = max(np.abs(at.T @ weight.apply(at) - np.eye(2 * k)).max(),
                 np.abs(apt @ weight.solve(apt.T) - np.eye(2 * k)).max())
        # and fails on both sides at once when the lift is rescaled
        s = rng.uniform(1.5, 3.0)
        ats = at * np.concatenate([np.full(k, s), np.full(k, 1.0 / s)])
        apts = j_matrix(2 * k).T @ ats.T @ jt
        both_off = (np.abs(ats.T @ weight.apply(ats) - np.eye(2 * k)).max() > 1e-3
                    and np.abs(apts @ weight.solve(apts.T) - np.eye(2 * k)).max() > 1e-3)
        assert both_off
        worst = np.maximum(worst, [d1, d2, d3, d4])
    wall = time.perf_counter() - t0
    ok = bool(worst.max() <= 1e-9) and wall < 30.0
    report("symplectic-inverse identities", ok,
           f"worst defects {worst[0]:.1e}/{worst[1]:.1e}/{worst[2]:.1e}/"
           f"{worst[3]:.1e} over 100 bases (tol 1e-9), {wall:.1f}s")
    assert ok, (worst, wall)


# --- criterion 2: weighted greedy output is an orthonormal lift ----------


def test_weighted_greedy_lift_orthonormality(report):
    rng = np.random.default_rng(102)
    cases = []
    for _ in range(40):
        n = int(rng.integers(3, 9))
        n2 = 2 * n
        cond = 10.0 ** rng.uniform(0.0, 4.0)
        x = make_spd(rng, n2, cond)
        z = paired_snapshots(rng, n2, 3 * n)
        basis = greedy_symplectic_weighted(
            z, WeightMatrix(x), k_max=int(rng.integers(2, n)))
        cases.append((x, basis))
    # one real model output alongside the randomized ones
    model = build_sine_gordon(32, 20.0, 0.3)
    traj = implicit_midpoint_run(ModelMidpointSystem(model), model.z0,
                                 IntegratorConfig(dt=0.1, t_final=5.0))
    cases.append((model.weight.matrix,
                  greedy_symplectic_weighted(traj.states, model.weight, k_max=5)))

    w_orth, w_bound = 0.0, 0.0
    for x, basis in cases:
        m = spd_sqrt(x) @ basis.A
        w_orth = max(w_orth, np.abs(m.T @ x @ m - np.eye(2 * basis.k)).max())
        lam = np.linalg.eigvalsh(x)
        sig = np.linalg.svd(m, compute_uv=False)
        w_bound = max(w_bound, lam[-1] ** -0.5 - sig.min(),
                      sig.max() - lam[0] ** -0.5)
    ok = w_orth <= 1e-10 and w_bound <= 1e-8
    report("greedy lift orthonormality", ok,
           f"worst X-orthonormality defect {w_orth:.1e} (tol 1e-10), "
           f"singular-value bound violation {w_bound:.1e} (slack 1e-8)")
    assert ok, (w_orth, w_bound)


# --- criterion 3: identity weight degenerates to the plain greedy --------


def test_identity_weight_matches_plain_greedy(report):
    rng = np.random.default_rng(103)
    runs = 0
    for _ in range(20):
        km = int(rng.integers(2, 6))
        m = 2 * km + int(rng.integers(2, 6))
        n2 = 2 * int(rng.integers(km + 2, 14))
        z = paired_snapshots(rng, n2, m)
        bw = greedy_symplectic_weighted(z, WeightMatrix.identity(n2), k_max=km)
        be = greedy_symplectic_euclidean(z, k_max=km)
        same = (bw.report.selected == be.report.selected
                and bw.report.errors == be.report.errors
                and np.array_equal(bw.B, be.B)
                and np.array_equal(bw.A, be.B))
        runs += same
    ok = runs == 20
    report("identity-weight degeneration", ok,
           f"{runs}/20 runs identical pivot-for-pivot (errors and bases exact)")
    assert ok, runs


# --- criterion 4: square-root-free route vs explicit-sqrt oracle ---------


def test_sqrt_free_route_matches_explicit_oracle(report):
    rng = np.random.default_rng(104)
    pivots_equal = True
    w = dict(basis=0.0, err=0.0, proj=0.0, struct=0.0, y0=0.0)
    for _ in range(12):
        n2 = int(rng.choice([8, 12, 16]))
        x = make_spd(rng, n2, 10.0 ** rng.uniform(0.0, 3.0))
        z = paired_snapshots(rng, n2, 12)
        km = int(rng.integers(2, min(5, n2 // 2)))
        basis = greedy_symplectic_weighted(z, WeightMatrix(x), k_max=km)
        ao, bo, sel, err = oracles.sqrt_weighted_greedy(z, x, k_max=km)
        pivots_equal = pivots_equal and basis.report.selected == sel
        w["basis"] = max(w["basis"], np.abs(basis.A - ao).max(),
                         np.abs(basis.B - bo).max())
        w["err"] = max(w["err"], np.abs(np.array(basis.report.errors)
                                        - np.array(err)).max() / max(err))
        # oracle composites, all through the explicit square root
        rt = oracles.spd_sqrt(x)
        at = rt @ ao
        jt = rt @ oracles.j_mat(n2) @ rt
        apt = oracles.j_mat(2 * km).T @ at.T @ jt
        jr_prod = basis.B.T @ WeightedStructure(basis.weight).apply(basis.B)
        w["struct"] = max(w["struct"], np.abs(jr_prod - apt @ jt @ apt.T).max())
        for _ in range(4):
            zv = rng.standard_normal(n2)
            p_prod = weighted_symplectic_projection(basis, zv)
            p_oracle = ao @ (apt @ (rt @ zv))
            w["proj"] = max(w["proj"],
                            np.abs(p_prod - p_oracle).max() / np.linalg.norm(zv))
            y_prod = symplectic_inverse(basis).apply(zv)
            w["y0"] = max(w["y0"], np.abs(y_prod - apt @ (rt @ zv)).max()
                          / np.linalg.norm(zv))
    ok = pivots_equal and max(w.values()) <= 1e-8
    report("sqrt-free route vs explicit-sqrt oracle", ok,
           f"pivots equal; bases {w['basis']:.1e}, errors {w['err']:.1e}, "
           f"projector {w['proj']:.1e}, reduced structure {w['struct']:.1e}, "
           f"y0 {w['y0']:.1e} (tol 1e-8)")
    assert ok, (pivots_equal, w)


# --- criterion 5: weighted symplectic projector is idempotent ------------


def test_weighted_projector_idempotent(report):
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 13))
        n2 = 2 * n
        weight = make_weight(rng, n2, 10.0 ** rng.uniform(0.0, 4.0))
        basis = random_weighted_basis(rng, n2,
                                      int(rng.integers(1, min(6, n) + 1)), weight)
        for _ in range(4):
            zv = rng.standard_normal(n2)
            pz = weighted_symplectic_projection(basis, zv)
            ppz = weighted_symplectic_projection(basis, pz)
            worst = max(worst, np.linalg.norm(ppz - pz) / np.linalg.norm(zv))
        # a vector already in the span must be a fixed point too
        zin = basis.A @ rng.standard_normal(2 * basis.k)
        pz = weighted_symplectic_projection(basis, zin)
        worst = max(worst, np.linalg.norm(weighted_symplectic_projection(basis, pz)
                                          - pz) / np.linalg.norm(zin))
    ok = worst <= 1e-10
    report("weighted projector idempotency", ok,
           f"worst ||P(P z) - P z|| / ||z|| = {worst:.1e} (tol 1e-10)")
    assert ok, worst


# --- criterion 6: integrator orders and one-step symplecticity -----------


class _Oscillator(MidpointSystem):
    dim = 2

    def __init__(self, omega):
        self.omega = float(omega)
        self.lmat = np.array([[0.0, 1.0], [-omega ** 2, 0.0]])

    def rhs(self, z):
        return self.lmat @ z

    def linear_matrix(self):
        return self.lmat, np.zeros(2)

    def hamiltonian(self, z):
        return 0.5 * (z[1] ** 2 + (self.omega * z[0]) ** 2)


class _OscillatorVerlet(VerletSystem):
    n = 1
    separable = True

    def __init__(self, omega):
        self.omega = float(omega)

    def grad_q(self, q, p):
        return self.omega ** 2 * q

    def grad_p(self, q, p):
        return p


class _PendulumChain(MidpointSystem):
    """Two coupled pendulums; small nonlinear system for step-map checks."""

    dim = 4

    def _grad_q(self, q):
        return np.sin(q) + np.array([q[0] - q[1], q[1] - q[0]])

    def rhs(self, z):
        return np.concatenate([z[2:], -self._grad_q(z[:2])])

    def hamiltonian(self, z):
        q, p = z[:2], z[2:]
        return 0.5 * p @ p + np.sum(1.0 - np.cos(q)) + 0.5 * (q[0] - q[1]) ** 2


class _PendulumChainVerlet(VerletSystem):
    n = 2
    separable = True

    def grad_q(self, q, p):
        return np.sin(q) + np.array([q[0] - q[1], q[1] - q[0]])

    def grad_p(self, q, p):
        return p


def test_integrator_orders_and_step_symplecticity(report):
    omega, z0 = 2.0, np.array([1.0, 0.0])
    dts = np.array([0.2, 0.1, 0.05, 0.025])
    exact = np.array([np.cos(omega * 2.0), -omega * np.sin(omega * 2.0)])
    errs_m, errs_v = [], []
    for dt in dts:
        conf = IntegratorConfig(dt=float(dt), t_final=2.0)
        tm = implicit_midpoint_run(_Oscillator(omega), z0, conf)
        tv = stormer_verlet_run(_OscillatorVerlet(omega), z0, conf)
        errs_m.append(np.linalg.norm(tm.states[:, -1] - exact))
        errs_v.append(np.linalg.norm(tv.states[:, -1] - exact))
    slope_m = float(np.polyfit(np.log(dts), np.log(errs_m), 1)[0])
    slope_v = float(np.polyfit(np.log(dts), np.log(errs_v), 1)[0])

    rng = np.random.default_rng(106)
    zc = rng.uniform(-1.0, 1.0, 4)
    jj = oracles.j_mat(4)
    jac_m = oracles.fd_jacobian_central(
        lambda z: midpoint_step(_PendulumChain(), z, 0.1, newton_tol=1e-13), zc)
    one = IntegratorConfig(dt=0.1, t_final=0.1)
    jac_v = oracles.fd_jacobian_central(
        lambda z: stormer_verlet_run(_PendulumChainVerlet(), z, one).states[:, -1], zc)
    defect_m = np.abs(jac_m.T @ jj @ jac_m - jj).max()
    defect_v = np.abs(jac_v.T @ jj @ jac_v - jj).max()

    ok = (1.8 <= slope_m <= 2.2 and 1.8 <= slope_v <= 2.2
          and defect_m < 1e-6 and defect_v < 1e-6)
    report("integrator orders and symplecticity", ok,
           f"slopes midpoint {slope_m:.3f} / verlet {slope_v:.3f} (window 1.8-2.2); "
           f"step-map defects {defect_m:.1e}, {defect_v:.1e} (tol 1e-6)")
    assert ok, (slope_m, slope_v, defect_m, defect_v)


# --- criterion 7: full-order energy conservation --------------------------


def test_full_order_energy_drift(sg, report):
    h = sg.ref.hamiltonian
    drift = float(np.abs(h - h[0]).max() / abs(h[0]))
    t0 = time.perf_counter()
    half = implicit_midpoint_run(
        ModelMidpointSystem(sg.model), sg.model.z0,
        IntegratorConfig(dt=0.005, t_final=50.0))
    wall_half = time.perf_counter() - t0
    hh = half.hamiltonian
    drift_half = float(np.abs(hh - hh[0]).max() / abs(hh[0]))
    ratio = drift / drift_half
    wall = sg.wall + wall_half
    ok = drift < 1e-4 and 3.2 <= ratio <= 4.8 and wall < 300.0
    report("full-order energy drift", ok,
           f"relative drift {drift:.2e} (tol 1e-4), halving ratio {ratio:.2f} "
           f"(window 3.2-4.8), runs {wall:.0f}s (limit 300)")
    assert ok, (drift, ratio, wall)


# --- criterion 8: weighted symplectic ROM, exact nonlinear term -----------


def test_weighted_rom_bounded_errors_flat_energy(sg, sg_basis, report):
    rom = assemble_nonlinear_rom(sg.model, sg_basis, interpolate=False)
    r = run_reduced(sg, rom)
    flat = abs(r.slope) <= T_CRIT * r.se

    # untreated-structure comparison trace; recorded, never asserted on
    pod = weighted_pod(sg.ref.states, sg.model.weight, 74)
    try:
        ptraj = run_rom(assemble_pod_rom(sg.model, pod), sg.conf)
        ph = ptraj.hamiltonian
        pod_note = f"pod(74) drift {np.abs(ph - ph[0]).max() / abs(ph[0]):.1e}"
    except NumericalFailure as exc:
        pod_note = f"pod(74) run failed: {exc}"

    ok = r.e2.max() <= 1.0 and r.ex.max() <= 1.0 and flat
    report("weighted ROM error and energy", ok,
           f"max e2 {r.e2.max():.2e}, max eX {r.ex.max():.2e} (bound 1.0); "
           f"energy slope {r.slope:.1e} within {T_CRIT} se ({r.se:.1e}); "
           f"comparison only: {pod_note}")
    assert ok, (r.e2.max(), r.ex.max(), r.slope, r.se)


# --- criterion 9: gradient-enriched interpolation ROM ---------------------


def test_enriched_rom_improves_and_interpolates_exactly(sg, sg_basis, report):
    grads = sg.model.nonlinear_grad_matrix(sg.ref.states)
    out = {}
    deim_worst = 0.0
    for kn in (75, 100):
        # gradient residuals sit near roundoff on this trajectory; relax
        # the insert guard so the full budget is spent instead of
        # stagnating at the default tolerance
        enriched, _ = greedy_nonlinear_basis(sg_basis, grads, max_new=kn,
                                             metric="xinv", deflation_tol=1e-12)
        rom = assemble_nonlinear_rom(sg.model, enriched, interpolate=True)
        r = run_reduced(sg, rom)
        u = sg.model.apply_L(enriched.B)
        idx = rom.deim.indices
        for i in range(0, r.traj.states.shape[1], 250):
            g = sg.model.nonlinear_grad(decode(rom, r.traj.states[:, i]))
            vals = u @ rom.deim.solve(g[idx])
            deim_worst = max(deim_worst,
                             np.abs(vals[idx] - g[idx]).max() / (1.0 + np.abs(g).max()))
        out[kn] = r
    a75, a100 = float(out[75].ex.mean()), float(out[100].ex.mean())
    flat = all(abs(out[kn].slope) <= T_CRIT * out[kn].se for kn in (75, 100))
    ok = a100 <= a75 and flat and deim_worst <= 1e-10
    report("enriched interpolation ROM", ok,
           f"time-avg eX 75 -> 100 modes: {a75:.2e} -> {a100:.2e}; energy slopes "
           f"within {T_CRIT} se; interpolation defect {deim_worst:.1e} (tol 1e-10)")
    assert ok, (a75, a100, flat, deim_worst)


# --- criterion 10: FEM assembly oracle + linear ROM conservation ----------


def test_fem_assembly_and_linear_rom_conservation(report):
    rng = np.random.default_rng(110)
    nodes = np.linspace(0.0, 1.0, 20)
    nodes[1:-1] += rng.uniform(-0.3, 0.3, 18) * (nodes[1] - nodes[0])
    fem = build_fem_wave(nodes, kappa=1.3)
    m_o, k_o = oracles.fem_mass_stiffness_gauss(nodes, 1.3)
    d_mk = max(np.abs(fem.M.matrix - m_o).max(), np.abs(fem.K.matrix - k_o).max())

    model = build_fem_wave(np.linspace(0.0, 1.0, 34))
    xi = model.nodes[1:-1]
    # several standing modes so the trajectory supports a k=6 basis
    shapes = np.stack([np.sin(m * np.pi * xi) for m in range(1, 9)])
    q0 = (0.5 ** np.arange(8)) @ shapes
    v0 = (0.3 * 0.6 ** np.arange(8)) @ shapes
    model.z0 = np.concatenate([q0, model.M.matrix @ v0])
    snaps = implicit_midpoint_run(ModelMidpointSystem(model), model.z0,
                                  IntegratorConfig(dt=0.02, t_final=4.0))
    basis = greedy_symplectic_weighted(snaps.states, model.weight, k_max=6)
    rom = assemble_linear_rom(model, basis)
    conf = IntegratorConfig(dt=0.01, t_final=10.0)
    h = run_rom(rom, conf).hamiltonian
    drift = float(np.abs(h - h[0]).max())
    bound = 10.0 * conf.newton_tol * (1.0 + abs(h[0]))

    ok = d_mk <= 1e-12 and drift <= bound
    report("fem assembly and linear ROM conservation", ok,
           f"mass/stiffness vs quadrature oracle {d_mk:.1e} (tol 1e-12); reduced "
           f"energy drift {drift:.1e} <= {bound:.1e} over {conf.n_steps} steps")
    assert ok, (d_mk, drift, bound)


# --- criterion 11: POD tail-sum identity and optimality -------------------


def test_pod_tail_identity_and_optimality(report):
    rng = np.random.default_rng(111)
    s = rng.standard_normal((20, 10))
    weight = make_weight(rng, 20, 300.0)
    pod = weighted_pod(s, weight, 4)
    resid = s - pod.V @ (pod.V.T @ weight.apply(s))
    err_sq = float(np.einsum("ij,ij->", resid, weight.apply(resid)))
    tail = float(pod.spectrum[4:].sum())
    rel = abs(err_sq - tail) / tail

    s2 = rng.standard_normal((10, 6))
    w2 = make_weight(rng, 10, 50.0)
    pod2 = weighted_pod(s2, w2, 2)

    def proj_err(v):
        r = s2 - v @ (v.T @ w2.apply(s2))
        return float(np.einsum("ij,ij->", r, w2.apply(r)))

    e_opt = proj_err(pod2.V)
    margin = np.inf
    for _ in range(200):
        y = rng.standard_normal((10, 2))
        q = y @ np.linalg.inv(spd_sqrt(y.T @ w2.apply(y)))
        margin = min(margin, proj_err(q) - e_opt)
    ok = rel <= 1e-8 and margin > 0.0
    report("pod tail identity and optimality", ok,
           f"tail-sum mismatch {rel:.1e} (tol 1e-8); worst competitor margin "
           f"{margin:.2e} over 200 draws (must stay positive)")
    assert ok, (rel, margin)

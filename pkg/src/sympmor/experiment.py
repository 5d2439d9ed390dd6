"""End-to-end experiment driver.

Offline stage: integrate the full model, build the configured
reduction variants from the snapshots, and collect diagnostics
(singular values of the plain and weighted snapshot matrices, greedy
selection histories).  Online stage: integrate each reduced system on
the same time grid and measure decoded state errors against the
reference in the 2-norm and the energy norm.

Results serialize to one binary package (offline) and a fixed set of
CSV files; float cells are written with repr, so identical runs
produce identical bytes.
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .config import validate_config
from .errors import ConfigError, ContractError, RankError
from .greedy import (GreedyReport, greedy_nonlinear_basis,
                     greedy_symplectic_euclidean, greedy_symplectic_weighted)
from .integrators import (IntegratorConfig, ModelMidpointSystem,
                          ModelVerletSystem, Trajectory,
                          implicit_midpoint_run, stormer_verlet_run)
from .models import build_fem_wave, build_sine_gordon
from .package_io import OfflinePackage, save_package
from .rom import (assemble_linear_rom, assemble_nonlinear_rom,
                  assemble_pod_rom, decode, run_rom)
from .symplectic import SymplecticBasis
from .weighted import PodBasis, weighted_pod


def build_model(model_cfg):
    """Instantiate the configured full-order model."""
    kind = model_cfg["kind"]
    if kind == "sine_gordon":
        return build_sine_gordon(model_cfg["n"], model_cfg["l"], model_cfg["c"],
                                 x0=model_cfg["x0"], sign=model_cfg["sign"])
    if kind == "fem_wave":
        nodes = np.linspace(0.0, model_cfg["length"], model_cfg["n_nodes"])
        return build_fem_wave(nodes, force_density=model_cfg["force"],
                              kappa=model_cfg["kappa"])
    raise ConfigError(f"unknown model kind {kind!r}")


def integrator_config(icfg):
    return IntegratorConfig(dt=icfg["dt"], t_final=icfg["t_final"],
                            scheme=icfg["scheme"], newton_tol=icfg["newton_tol"],
                            newton_max_iter=icfg["newton_max_iter"],
                            snapshot_stride=icfg["snapshot_stride"])


def reference_trajectory(model, iconf):
    """Integrate the full model with the configured scheme."""
    if iconf.scheme == "implicit_midpoint":
        return implicit_midpoint_run(ModelMidpointSystem(model), model.z0, iconf)
    return stormer_verlet_run(ModelVerletSystem(model), model.z0, iconf)


def _apply_weight(model, m):
    # the default weight is the energy matrix itself, whose stencil
    # apply is much cheaper than the dense product
    if model.weight.matrix is model.L.matrix:
        return model.apply_L(m)
    return model.weight.apply(m)


@dataclass
class VariantArtifacts:
    name: str
    settings: dict
    rom: object
    basis: SymplecticBasis = None
    pod_basis: PodBasis = None
    main_report: GreedyReport = None
    enrich_report: GreedyReport = None
    deim_modes: np.ndarray = None


@dataclass
class OfflineResult:
    config: dict
    model: object
    reference: Trajectory
    grads: np.ndarray
    sigma_s: np.ndarray
    sigma_xs: np.ndarray
    variants: list = field(default_factory=list)


@dataclass
class VariantRun:
    name: str
    trajectory: Trajectory
    hamiltonian: np.ndarray
    e2: np.ndarray = None
    ex: np.ndarray = None


@dataclass
class OnlineResult:
    times: np.ndarray
    reference_hamiltonian: np.ndarray
    runs: list = field(default_factory=list)
    messages: list = field(default_factory=list)


def _check_nonlinear_setting(model, rcfg):
    nl = rcfg["nonlinear"]
    if nl == "none" and not model.is_linear:
        raise ConfigError(
            f"variant {rcfg['name']!r}: nonlinear 'none' would silently drop the "
            "model's gradient term; use 'exact' or 'deim'")
    if nl == "deim" and model.is_linear:
        raise ConfigError(
            f"variant {rcfg['name']!r}: interpolation of a nonlinear term was "
            "requested but the model is linear")
    return nl


def _gradient_modes(grads, r):
    u, s, _ = np.linalg.svd(grads, full_matrices=False)
    if r > s.shape[0] or s[r - 1] <= 1e-13 * s[0]:
        raise RankError(f"gradient snapshots support at most "
                        f"{int(np.sum(s > 1e-13 * s[0]))} interpolation modes, "
                        f"asked for {r}")
    return u[:, :r]


def _assemble_symplectic(model, rcfg, basis):
    nl = rcfg["nonlinear"]
    if model.is_linear or nl == "none":
        return assemble_linear_rom(model, basis)
    return assemble_nonlinear_rom(model, basis, interpolate=(nl == "deim"))


def build_variant(model, states, grads, rcfg):
    """Run the configured reduction on the snapshot set."""
    nl = _check_nonlinear_setting(model, rcfg)
    method = rcfg["method"]
    if method == "pod":
        modes = rcfg["modes"]
        if modes is None:
            if rcfg["k"] is None:
                raise ConfigError(f"variant {rcfg['name']!r}: pod needs k or modes")
            modes = 2 * rcfg["k"]
        pod_b = weighted_pod(states, model.weight, modes)
        deim_modes = None
        if nl == "deim":
            deim_modes = _gradient_modes(grads, rcfg["deim_k"])
        rom = assemble_pod_rom(model, pod_b, deim_modes=deim_modes)
        return VariantArtifacts(name=rcfg["name"], settings=rcfg, rom=rom,
                                pod_basis=pod_b, deim_modes=deim_modes)
    if method == "greedy_weighted":
        basis = greedy_symplectic_weighted(states, model.weight,
                                           delta=rcfg["delta"], k_max=rcfg["k"])
    else:
        basis = greedy_symplectic_euclidean(states, delta=rcfg["delta"],
                                            k_max=rcfg["k"])
    main_report = basis.report
    enrich_report = None
    if nl == "deim":
        basis, enrich_report = greedy_nonlinear_basis(
            basis, grads, delta=rcfg["delta"], max_new=rcfg["deim_k"],
            metric=rcfg["metric"])
    rom = _assemble_symplectic(model, rcfg, basis)
    return VariantArtifacts(name=rcfg["name"], settings=rcfg, rom=rom,
                            basis=basis, main_report=main_report,
                            enrich_report=enrich_report)


def run_offline(cfg):
    """Reference solve, snapshot diagnostics, and all reduction variants."""
    cfg = validate_config(cfg)
    model = build_model(cfg["model"])
    iconf = integrator_config(cfg["integrator"])
    reference = reference_trajectory(model, iconf)
    states = reference.states
    grads = None if model.is_linear else model.nonlinear_grad_matrix(states)
    sigma_s = np.linalg.svd(states, compute_uv=False)
    sigma_xs = np.linalg.svd(_apply_weight(model, states), compute_uv=False)
    variants = [build_variant(model, states, grads, rcfg)
                for rcfg in cfg["reductions"]]
    return OfflineResult(config=cfg, model=model, reference=reference,
                         grads=grads, sigma_s=sigma_s, sigma_xs=sigma_xs,
                         variants=variants)


def run_online(offline, iconf=None):
    """Integrate every reduced variant and measure errors when possible."""
    if iconf is None:
        iconf = integrator_config(offline.config["integrator"])
    model = offline.model
    ref = offline.reference
    runs = []
    messages = []
    times = None
    for v in offline.variants:
        traj = run_rom(v.rom, iconf)
        times = traj.times
        e2 = ex = None
        if ref is None:
            messages.append(f"variant {v.name}: no stored reference trajectory; "
                            "state errors were not computed")
        elif ref.times.shape != traj.times.shape or not np.allclose(ref.times, traj.times):
            messages.append(f"variant {v.name}: reference time grid differs from "
                            "the reduced run; state errors were not computed")
        else:
            dec = decode(v.rom, traj.states)
            diff = dec - ref.states
            wdiff = _apply_weight(model, diff)
            wref = _apply_weight(model, ref.states)
            nrm2 = np.linalg.norm(ref.states, axis=0)
            nrmx = np.sqrt(np.maximum(np.einsum("ij,ij->j", ref.states, wref), 0.0))
            e2 = np.linalg.norm(diff, axis=0) / np.maximum(nrm2, 1e-300)
            ex = (np.sqrt(np.maximum(np.einsum("ij,ij->j", diff, wdiff), 0.0))
                  / np.maximum(nrmx, 1e-300))
        runs.append(VariantRun(name=v.name, trajectory=traj,
                               hamiltonian=traj.hamiltonian, e2=e2, ex=ex))
    ref_h = ref.hamiltonian if ref is not None else None
    if times is None:
        times = iconf.dt * iconf.snapshot_stride * np.arange(
            iconf.n_steps // iconf.snapshot_stride + 1)
    return OnlineResult(times=times, reference_hamiltonian=ref_h, runs=runs,
                        messages=messages)


# --------------------------------------------------------------------------
# packaging


def offline_package(offline):
    """Bundle the offline results into a serializable package."""
    cfg = offline.config
    arrays = {}
    arrays["sigma_s"] = offline.sigma_s
    arrays["sigma_xs"] = offline.sigma_xs
    if cfg["output"]["store_reference"] and offline.reference is not None:
        arrays["reference/times"] = offline.reference.times
        arrays["reference/states"] = offline.reference.states
        arrays["reference/hamiltonian"] = offline.reference.hamiltonian
    for v in offline.variants:
        base = f"variant/{v.name}"
        if v.pod_basis is not None:
            arrays[f"{base}/V"] = v.pod_basis.V
            arrays[f"{base}/pod_values"] = v.pod_basis.values
            if v.pod_basis.spectrum is not None:
                arrays[f"{base}/pod_spectrum"] = v.pod_basis.spectrum
        else:
            arrays[f"{base}/A"] = v.rom.basis.A
            arrays[f"{base}/B"] = v.rom.basis.B
        if v.deim_modes is not None:
            arrays[f"{base}/deim_modes"] = v.deim_modes
        if v.main_report is not None:
            arrays[f"{base}/selected"] = np.asarray(v.main_report.selected, dtype=np.int64)
            arrays[f"{base}/errors"] = np.asarray(v.main_report.errors, dtype=float)
        if v.enrich_report is not None:
            arrays[f"{base}/enrich_selected"] = np.asarray(
                v.enrich_report.selected, dtype=np.int64)
            arrays[f"{base}/enrich_errors"] = np.asarray(
                v.enrich_report.errors, dtype=float)
    metadata = {"config": cfg, "model_name": offline.model.name}
    return OfflinePackage(metadata=metadata, arrays=arrays)


def _report_from(selected, errors, final_k, k_initial=0):
    return GreedyReport(selected=[int(i) for i in selected],
                        errors=[float(e) for e in errors],
                        final_k=final_k, k_initial=k_initial)


def restore_offline(pkg):
    """Rebuild an OfflineResult from a loaded package.

    The reduced operators are reassembled from the stored bases and the
    model reconstructed from the config, which is cheap and keeps the
    package compact.  The reference trajectory is present only when it
    was stored.
    """
    cfg = validate_config(pkg.metadata.get("config"))
    model = build_model(cfg["model"])
    arrays = pkg.arrays
    reference = None
    if "reference/times" in arrays:
        (rt, rs, rh) = pkg.require("reference/times", "reference/states",
                                   "reference/hamiltonian")
        reference = Trajectory(times=rt, states=rs, hamiltonian=rh)
    sigma_s, sigma_xs = pkg.require("sigma_s", "sigma_xs")
    variants = []
    for rcfg in cfg["reductions"]:
        base = f"variant/{rcfg['name']}"
        nl = rcfg["nonlinear"]
        if rcfg["method"] == "pod":
            (v_mat, values) = pkg.require(f"{base}/V", f"{base}/pod_values")
            spectrum = arrays.get(f"{base}/pod_spectrum")
            pod_b = PodBasis(V=v_mat, values=values, weight=model.weight,
                             spectrum=spectrum)
            deim_modes = arrays.get(f"{base}/deim_modes")
            rom = assemble_pod_rom(model, pod_b, deim_modes=deim_modes)
            variants.append(VariantArtifacts(name=rcfg["name"], settings=rcfg,
                                             rom=rom, pod_basis=pod_b,
                                             deim_modes=deim_modes))
            continue
        (a_mat, b_mat) = pkg.require(f"{base}/A", f"{base}/B")
        weight = model.weight if rcfg["method"] == "greedy_weighted" else None
        main_report = None
        enrich_report = None
        if f"{base}/selected" in arrays:
            sel, err = pkg.require(f"{base}/selected", f"{base}/errors")
            main_report = _report_from(sel, err, final_k=len(sel))
        basis = SymplecticBasis(A=a_mat, B=b_mat, weight=weight, report=main_report)
        if f"{base}/enrich_selected" in arrays:
            sel, err = pkg.require(f"{base}/enrich_selected", f"{base}/enrich_errors")
            k0 = len(main_report.selected) if main_report else 0
            enrich_report = _report_from(sel, err, final_k=basis.k, k_initial=k0)
        rom = _assemble_symplectic(model, rcfg, basis)
        variants.append(VariantArtifacts(name=rcfg["name"], settings=rcfg, rom=rom,
                                         basis=basis, main_report=main_report,
                                         enrich_report=enrich_report))
    return OfflineResult(config=cfg, model=model, reference=reference, grads=None,
                         sigma_s=sigma_s, sigma_xs=sigma_xs, variants=variants)


# --------------------------------------------------------------------------
# delimited output


def _fmt(x):
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def emit_offline_csv(offline, outdir):
    """singular_values.csv and greedy.csv; returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    rows = [[str(i), _fmt(s), _fmt(xs)] for i, (s, xs) in
            enumerate(zip(offline.sigma_s, offline.sigma_xs))]
    paths.append(_write_rows(os.path.join(outdir, "singular_values.csv"),
                             ["index", "sigma_S", "sigma_XS"], rows))
    rows = []
    for v in offline.variants:
        it = 0
        for report in (v.main_report, v.enrich_report):
            if report is None:
                continue
            for sel, err in zip(report.selected, report.errors):
                rows.append([v.name, str(it), str(int(sel)), _fmt(err)])
                it += 1
    paths.append(_write_rows(os.path.join(outdir, "greedy.csv"),
                             ["variant", "iteration", "selected_index", "error"], rows))
    return paths


def emit_online_csv(online, outdir):
    """hamiltonian.csv and errors.csv; returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    header = ["t"]
    if online.reference_hamiltonian is not None:
        header.append("H_full")
    header += [f"H_{run.name}" for run in online.runs]
    rows = []
    for i, t in enumerate(online.times):
        row = [_fmt(t)]
        if online.reference_hamiltonian is not None:
            row.append(_fmt(online.reference_hamiltonian[i]))
        row += [_fmt(run.hamiltonian[i]) for run in online.runs]
        rows.append(row)
    paths.append(_write_rows(os.path.join(outdir, "hamiltonian.csv"), header, rows))

    with_err = [run for run in online.runs if run.e2 is not None]
    if with_err:
        header = ["t"]
        for run in with_err:
            header += [f"e2_{run.name}", f"eX_{run.name}"]
        rows = []
        for i, t in enumerate(online.times):
            row = [_fmt(t)]
            for run in with_err:
                row += [_fmt(run.e2[i]), _fmt(run.ex[i])]
            rows.append(row)
        paths.append(_write_rows(os.path.join(outdir, "errors.csv"), header, rows))
    return paths


def emit_csv(offline, online, outdir):
    return emit_offline_csv(offline, outdir) + emit_online_csv(online, outdir)


def run_full(cfg, outdir=None):
    """Offline + online + all configured outputs.

    Returns (OfflineResult, OnlineResult, list of written paths).
    """
    offline = run_offline(cfg)
    out_cfg = offline.config["output"]
    outdir = outdir if outdir is not None else out_cfg["directory"]
    written = []
    if out_cfg["write_package"]:
        os.makedirs(outdir, exist_ok=True)
        pkg_path = os.path.join(outdir, "offline.spmr")
        save_package(offline_package(offline), pkg_path)
        written.append(pkg_path)
    online = run_online(offline)
    if out_cfg["csv"]:
        written += emit_csv(offline, online, outdir)
    if out_cfg["figures"]:
        from .figures import render_figures
        written += render_figures(offline, online, outdir)
    return offline, online, written

"""Report figures rendered next to the delimited output.

PNG renderings of the same quantities the CSV files carry: snapshot
singular values, greedy error decay, energy drift, and state errors.
The CSV files remain the machine-readable contract; these are for
eyeballing a run.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path, written):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)


def render_figures(offline, online, outdir):
    """Write the four report figures; returns the file paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    idx = np.arange(1, offline.sigma_s.shape[0] + 1)
    ax.semilogy(idx, offline.sigma_s, label="singular values of S")
    ax.semilogy(idx, offline.sigma_xs, label="singular values of X S", ls="--")
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.legend(fontsize=8)
    _save(fig, os.path.join(outdir, "singular_values.png"), written)

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    any_greedy = False
    for v in offline.variants:
        errs = []
        for report in (v.main_report, v.enrich_report):
            if report is not None:
                errs.extend(report.errors)
        if errs:
            ax.semilogy(np.arange(1, len(errs) + 1), errs, label=v.name)
            any_greedy = True
    if any_greedy:
        ax.set_xlabel("greedy iteration")
        ax.set_ylabel("worst projection error")
        ax.legend(fontsize=8)
        _save(fig, os.path.join(outdir, "greedy.png"), written)
    else:
        plt.close(fig)

    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    t = online.times
    if online.reference_hamiltonian is not None:
        ax.plot(t, _drift(online.reference_hamiltonian), label="full", color="k")
    for run in online.runs:
        ax.plot(t, _drift(run.hamiltonian), label=run.name)
    ax.set_xlabel("t")
    ax.set_ylabel("relative energy drift")
    ax.legend(fontsize=8)
    _save(fig, os.path.join(outdir, "hamiltonian.png"), written)

    with_err = [run for run in online.runs if run.e2 is not None]
    if with_err:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        for run in with_err:
            ax.semilogy(t, np.maximum(run.e2, 1e-300), label=f"{run.name} (2-norm)")
            ax.semilogy(t, np.maximum(run.ex, 1e-300), ls="--",
                        label=f"{run.name} (energy norm)")
        ax.set_xlabel("t")
        ax.set_ylabel("relative state error")
        ax.legend(fontsize=8)
        _save(fig, os.path.join(outdir, "errors.png"), written)
    return written


def _drift(h):
    h = np.asarray(h, dtype=float)
    scale = max(abs(h[0]), 1e-300)
    return (h - h[0]) / scale

"""Figure rendering for run reports.  Figures are written next to the
delimited output so a run directory is self-describing."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["flow_figures", "constancy_figure", "identity_figure"]


def _save(fig, path):
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def flow_figures(out_dir, grid, snapshots, history, level):
    """Field overlay / waterfall and conserved-functional drift figures.

    snapshots: list of (tau, values) with values shaped (N, p).
    history: list of record dicts from the flow driver.
    """
    written = []
    l = grid.nodes()

    fig, ax = plt.subplots(figsize=(7, 4))
    first_tau, first = snapshots[0]
    last_tau, last = snapshots[-1]
    for comp in range(first.shape[1]):
        ax.plot(l, first[:, comp], lw=1.0, label=f"v{comp + 1} at tau={first_tau:g}")
        ax.plot(l, last[:, comp], lw=1.6, ls="--", label=f"v{comp + 1} at tau={last_tau:g}")
    ax.set_xlabel("l")
    ax.set_ylabel("v")
    ax.set_title(f"level {level} flow: initial vs final field")
    ax.legend(fontsize=8)
    fig.tight_layout()
    written.append(_save(fig, os.path.join(out_dir, "field.png")))

    if len(snapshots) >= 3:
        stack = np.stack([s[1][:, 0] for s in snapshots])
        taus = [s[0] for s in snapshots]
        fig, ax = plt.subplots(figsize=(7, 4))
        im = ax.imshow(
            stack,
            aspect="auto",
            origin="lower",
            extent=(0.0, grid.length, taus[0], taus[-1]),
            cmap="RdBu_r",
        )
        fig.colorbar(im, ax=ax, label="v1")
        ax.set_xlabel("l")
        ax.set_ylabel("tau")
        ax.set_title("first component, space-time")
        fig.tight_layout()
        written.append(_save(fig, os.path.join(out_dir, "waterfall.png")))

    taus = [r["tau"] for r in history]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key in ("H0", "H1", "H2_printed", "H2_periodic"):
        ref = history[0][key]
        denom = max(abs(ref), 1e-300)
        drift = [abs(r[key] - ref) / denom for r in history]
        ax.semilogy(taus, np.maximum(drift, 1e-18), label=key)
    ax.set_xlabel("tau")
    ax.set_ylabel("relative drift")
    ax.set_title("conserved functional drift")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    written.append(_save(fig, os.path.join(out_dir, "hamiltonian_drift.png")))

    if level == -1 and "constraint_residual" in history[0]:
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.semilogy(
            taus,
            np.maximum([r["constraint_residual"] for r in history], 1e-18),
            label="unit-frame constraint",
        )
        ax.semilogy(
            taus,
            np.maximum([r["closure_mismatch"] for r in history], 1e-18),
            label="periodic closure mismatch",
        )
        ax.set_xlabel("tau")
        ax.set_ylabel("residual")
        ax.set_title("frame reconstruction diagnostics")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        written.append(_save(fig, os.path.join(out_dir, "frame_diagnostics.png")))
    return written


def constancy_figure(out_dir, report_dict):
    spreads = report_dict["spreads"]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    names = list(spreads)
    vals = [max(spreads[k], 1e-18) for k in names]
    ax.bar(names, vals, color="steelblue")
    ax.set_yscale("log")
    ax.axhline(report_dict["tolerance"], color="crimson", ls="--", label="tolerance")
    ax.set_ylabel("max deviation from mean")
    ax.set_title(f"orthonormal-frame curvature spread ({report_dict['verdict']})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "constancy.png"))


def identity_figure(out_dir, results):
    names = [r["name"] for r in results]
    vals = [max(r["residual"], 1e-18) for r in results]
    tols = [r["tolerance"] for r in results]
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(names)), 4.5))
    xs = np.arange(len(names))
    ax.bar(xs, vals, color=["seagreen" if r["passed"] else "crimson" for r in results])
    ax.plot(xs, tols, "k_", markersize=14, label="tolerance")
    ax.set_yscale("log")
    ax.set_xticks(xs)
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("residual")
    ax.set_title("operator identity battery")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, os.path.join(out_dir, "identities.png"))

"""Matplotlib rendering of trajectories, convergence tables, and probes.

Every CLI report path writes these figures next to its delimited output.
"""

from __future__ import annotations

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .game import GameSpec
from .trajectory import Trajectory


def plot_policy_mass(traj: Trajectory, game: GameSpec, policies, path,
                     reference: Trajectory | None = None, title: str = "") -> None:
    """Per-policy total mass over time, one panel per subpopulation.

    ``reference`` (e.g. a mean-field trajectory behind an empirical one) is
    drawn dashed in matching colors.
    """
    n_subs = game.n_subpops
    fig, axes = plt.subplots(n_subs, 1, figsize=(7, 3.2 * n_subs), squeeze=False)
    for c, (sub, pset) in enumerate(zip(game.subpops, policies)):
        ax = axes[c][0]
        series = traj.policy_mass(c)
        colors = plt.cm.tab10(np.arange(len(pset)) % 10)
        for u in range(len(pset)):
            ax.plot(traj.times, series[:, u], color=colors[u], label=f"u{u + 1}")
        if reference is not None:
            ref = reference.policy_mass(c)
            for u in range(len(pset)):
                ax.plot(reference.times, ref[:, u], color=colors[u],
                        linestyle="--", linewidth=1.0, alpha=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel(f"{sub.name}: policy mass")
        ax.set_ylim(-0.02, sub.mass * 1.05)
        ax.legend(loc="center right", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_convergence(medians: dict, slope, path) -> None:
    """Log-log median error vs population size with the fitted slope."""
    ns = np.array(sorted(medians))
    errs = np.array([medians[n] for n in ns])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ns, errs, "o-", label="median sup-L1 error")
    if slope is not None and len(ns) >= 2:
        fit = errs[0] * (ns / ns[0]) ** slope
        ax.loglog(ns, fit, "--", label=f"fit slope {slope:.3f}")
    ax.set_xlabel("population size N")
    ax.set_ylabel("sup-L1 error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_lyapunov(report, path) -> None:
    """Contraction-monitor curves for every perturbation run."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for run in report.runs:
        ts = [t for t, _ in run.samples]
        vs = [v for _, v in run.samples]
        ax.semilogy(ts, np.maximum(vs, 1e-18), label=f"seed {run.seed}")
    ax.set_xlabel("t")
    ax.set_ylabel("monitor value")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_escape(report, path) -> None:
    """Injected-policy mass during the instability probe."""
    ts = [t for t, _ in report.mass_curve]
    ms = [m for _, m in report.mass_curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, ms, label="injected-policy mass")
    if report.exit_time is not None:
        ax.axvline(report.exit_time, color="red", linestyle="--",
                   label=f"ball exit t={report.exit_time:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("mass")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

"""Line charts for norm trajectories, scaling fits and block profiles.

Figures are written without date metadata and with a fixed SVG hash salt,
so identical data give identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "svg.hashsalt": "mochlab",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (5.0, 3.4),
    "lines.linewidth": 1.4,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    meta = {"Date": None} if path.suffix == ".svg" else {}
    if path.suffix == ".png":
        meta = {"Software": None}
    fig.savefig(path, metadata=meta)
    plt.close(fig)
    return path


def plot_norm_trajectories(reports, path) -> Path:
    """``||gamma(t)||`` in both norms against ``t / T`` for each ``N``."""
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
        for r in sorted(reports, key=lambda r: r.N):
            s = r.times / r.T
            ax1.plot(s, r.norm_series[:, 0] / r.norm_series[0, 0], label=f"N={r.N}")
            ax2.plot(s, r.norm_series[:, 1], label=f"N={r.N}")
        ax1.set_xlabel("t / T")
        ax1.set_ylabel(r"$\|\gamma(t)\|_{B^0_{\infty,1}} / \|\gamma_0\|$")
        ax2.set_xlabel("t / T")
        ax2.set_ylabel(r"weighted norm $\sup_j (j+2)^2\|\Delta_j\gamma\|_\infty$")
        ax2.set_yscale("log")
        ax1.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_scaling(table, path) -> Path:
    """Log-log sweep columns with their least-squares power laws."""
    ns = table.column("N")
    cols = ("norm_B0inf1", "norm_weighted", "norm_square_B0inf1", "ratio")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for name in cols:
            vals = table.column(name)
            (line,) = ax.loglog(ns, vals, "o", label=name)
            p = table.exponents.get(name)
            if p is not None:
                c = np.exp(np.mean(np.log(vals) - p * np.log(ns)))
                ax.loglog(ns, c * ns**p, "-", color=line.get_color(), alpha=0.6)
                line.set_label(f"{name} (slope {p:.2f})")
        ax.set_xlabel("N")
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)


def plot_profile(profile, path) -> Path:
    """Per-block sup norms as a step chart."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        vals = np.where(profile.block_sup_norms > 0, profile.block_sup_norms, np.nan)
        ax.semilogy(profile.j_values, vals, "o-", drawstyle="steps-mid")
        ax.set_xlabel("j")
        ax.set_ylabel(r"$\|\Delta_j u\|_\infty$")
        fig.tight_layout()
        return _save(fig, path)


def plot_ensemble(summaries, path) -> Path:
    """Largest ratio per inequality for each seeded ensemble."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for s in sorted(summaries, key=lambda s: s.seed):
            ids = s.ids()
            ax.plot(range(len(ids)), [s.max_ratio(i) for i in ids], "o-", label=f"seed {s.seed}")
            ax.set_xticks(range(len(ids)), ids)
        ax.set_ylabel("max ratio")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)

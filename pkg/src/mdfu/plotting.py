"""Figure rendering for simulate/trace output. Files only, never interactive."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "mdfu",
}


def _positive(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 0, y, np.nan)


def plot_metrics(rounds, mean: dict, path, title: str = "", f: float | None = None,
                 std: dict | None = None) -> None:
    """CV(RMSE), max relative error and relative bias of the network mean."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(10, 3.2), constrained_layout=True)
        for ax, key, label in ((axes[0], "cv_rmse", "CV(RMSE)"),
                               (axes[1], "max_rel_err", "max relative error")):
            ax.semilogy(rounds, _positive(mean[key]), lw=1.2)
            ax.set_xlabel("round")
            ax.set_ylabel(label)
        bias = np.asarray(mean["mean_estimate"]) / np.asarray(mean["true_mean"]) - 1.0
        ax = axes[2]
        ax.plot(rounds, bias, lw=1.2, label="mean estimate")
        if std is not None:
            spread = np.asarray(std["mean_estimate"]) / np.abs(np.asarray(mean["true_mean"]))
            ax.fill_between(rounds, bias - spread, bias + spread, alpha=0.25, lw=0)
        if f:
            ax.axhline(-f, color="k", ls="--", lw=0.8, label=f"-f = {-f:g}")
            ax.legend(frameon=False)
        ax.set_xlabel("round")
        ax.set_ylabel("relative bias")
        if title:
            fig.suptitle(title)
        fig.savefig(path, metadata=_metadata(path))
        plt.close(fig)


def plot_trace(rounds, true_mean, node_ids, estimates, path, title: str = "") -> None:
    """Sampled per-node estimates against the moving true mean."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.6), constrained_layout=True)
        for k in range(len(node_ids)):
            ax.plot(rounds, estimates[:, k], lw=0.4, alpha=0.5, color="tab:blue")
        ax.plot(rounds, true_mean, color="k", lw=1.5, label="true mean")
        ax.set_xlabel("round")
        ax.set_ylabel("estimate")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.savefig(path, metadata=_metadata(path))
        plt.close(fig)


def _metadata(path) -> dict:
    # Drop timestamps / software tags so identical data gives identical files.
    suffix = str(path).rsplit(".", 1)[-1].lower()
    if suffix == "png":
        return {"Software": None}
    if suffix == "pdf":
        return {"CreationDate": None, "ModDate": None, "Producer": None, "Creator": None}
    if suffix == "svg":
        return {"Date": None, "Creator": None}
    return {}

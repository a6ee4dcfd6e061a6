"""Figures written next to CLI outputs. Uses the non-interactive Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

METRICS = ("mrr", "hits1", "hits3", "hits10")


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_training_curve(log, path, title=None):
    """Loss per epoch with validation MRR on a twin axis."""
    epochs = [s.epoch for s in log]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(epochs, [s.loss for s in log], color="tab:blue", lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("train loss", color="tab:blue")
    evals = [(s.epoch, s.val_mrr) for s in log if s.val_mrr is not None]
    if evals:
        ax2 = ax.twinx()
        ex, ey = zip(*evals)
        ax2.plot(ex, ey, "o-", color="tab:red", ms=3, lw=1)
        ax2.set_ylabel("validation MRR", color="tab:red")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_ranking_report(report, path, title=None):
    """Grouped bars of MRR and Hits@k for head, tail and overall ranking."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    x = np.arange(len(METRICS))
    width = 0.27
    for i, name in enumerate(("head", "tail", "overall")):
        d = getattr(report, name).as_dict()
        ax.bar(x + (i - 1) * width, [d[m] for m in METRICS], width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(METRICS)
    ax.set_ylim(0, 1)
    ax.legend(frameon=False, fontsize=8)
    ax.set_title(title or f"{'filtered' if report.filtered else 'raw'} ranking, MR={report.mr:.2f}")
    return _save(fig, path)


def plot_neighbors(entity, rows_by_space, path):
    """One horizontal bar panel per space, most similar entity on top."""
    n = len(rows_by_space)
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 3), squeeze=False)
    for ax, (space, rows) in zip(axes[0], rows_by_space.items()):
        names = [r[0] for r in rows][::-1]
        sims = [r[1] for r in rows][::-1]
        ax.barh(names, sims, color="tab:gray")
        ax.set_xlim(min(0.0, min(sims, default=0.0)), 1.0)
        ax.set_title(f"{entity} [{space}]", fontsize=9)
        ax.tick_params(labelsize=7)
    return _save(fig, path)


def plot_seed_study(mrrs, path, title=None):
    """Validation MRR per seed with the mean as a horizontal line."""
    mrrs = np.asarray(mrrs, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(np.arange(len(mrrs)), mrrs, "o", color="tab:blue")
    ax.axhline(mrrs.mean(), color="tab:red", lw=1, label=f"mean {mrrs.mean():.4f}, std {mrrs.std():.4f}")
    ax.set_xlabel("seed")
    ax.set_ylabel("validation MRR")
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_stats(stats, path):
    """Bar chart of dataset counts on a log scale."""
    d = stats.as_dict() if hasattr(stats, "as_dict") else dict(stats)
    fig, ax = plt.subplots(figsize=(6, 3))
    keys = list(d)
    ax.bar(keys, [max(v, 1) for v in d.values()], color="tab:green")
    ax.set_yscale("log")
    ax.tick_params(axis="x", labelrotation=30, labelsize=7)
    return _save(fig, path)

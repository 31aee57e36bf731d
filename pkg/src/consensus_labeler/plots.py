"""Figure rendering for the report paths. Every CSV report the CLI emits
has a sibling figure produced here."""

from __future__ import annotations

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .grids import CERTAIN, EXCLUDED, UNCERTAIN

_LABEL_COLORS = {CERTAIN: "#4daf4a", UNCERTAIN: "#e41a1c",
                 EXCLUDED: "#bdbdbd"}


def plot_agreement(agreement, path):
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(agreement.values, cmap="viridis", vmin=0,
                   vmax=agreement.n_products)
    fig.colorbar(im, ax=ax, label="products voting forest")
    ax.set_title("Product agreement")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_grid_labels(labels, grids, path):
    fig, ax = plt.subplots(figsize=(6, 5))
    for lab in labels:
        col, row = grids.parse_id(lab.grid_id)
        lo_lon, lo_lat, hi_lon, hi_lat = grids.cell_bounds(col, row)
        ax.add_patch(plt.Rectangle((lo_lon, lo_lat), hi_lon - lo_lon,
                                   hi_lat - lo_lat,
                                   facecolor=_LABEL_COLORS[lab.label],
                                   edgecolor="black", linewidth=0.5))
        if lab.uncertainty_23 is not None:
            ax.text((lo_lon + hi_lon) / 2, (lo_lat + hi_lat) / 2,
                    f"{lab.uncertainty_23:.2f}", ha="center", va="center",
                    fontsize=8)
    ax.autoscale_view()
    ax.set_xlabel("lon")
    ax.set_ylabel("lat")
    ax.set_title("Grid certainty (value = 2-3 ratio)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_pairwise(a, b, stats, path, names=("product a", "product b")):
    ok = a.valid_mask & b.valid_mask
    x, y = a.values[ok], b.values[ok]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(x, y, s=8, alpha=0.5)
    xs = np.linspace(0, 1, 10)
    ax.plot(xs, stats["slope"] * xs + (y.mean() - stats["slope"] * x.mean()),
            "r-", linewidth=1)
    ax.plot([0, 1], [0, 1], "k--", linewidth=0.7)
    ax.set_xlabel(f"forest fraction, {names[0]}")
    ax.set_ylabel(f"forest fraction, {names[1]}")
    ax.set_title(f"slope={stats['slope']:.3f} r2={stats['r_squared']:.3f} "
                 f"rmse={stats['rmse']:.3f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_metrics(rows, path, title="Accuracy by unit"):
    ids = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(max(5, 0.6 * len(ids)), 4))
    width = 0.2
    xs = np.arange(len(ids))
    for i, metric in enumerate(("ua", "pa", "oa", "kappa")):
        vals = [getattr(r[1], metric) for r in rows]
        ax.bar(xs + (i - 1.5) * width, vals, width, label=metric.upper())
    ax.set_xticks(xs)
    ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ledger(ledger, path):
    rows = ledger.per_iteration
    fig, ax = plt.subplots(figsize=(6, 4))
    its = [r["iteration"] for r in rows]
    ax.plot(its, [r["consistent_fraction"] for r in rows], "o-",
            label="consistent fraction")
    ax.set_xlabel("iteration")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Consistency per iteration")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

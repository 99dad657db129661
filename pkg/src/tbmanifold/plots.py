"""SVG figures for sweep results (matplotlib, Agg backend, fixed metadata)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "tbmanifold"
_META = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return Path(path)


def scatter_overlay(train, sample, path, title=""):
    """Training points (grey) with estimate samples (blue) on top."""
    train = np.asarray(train)
    sample = np.asarray(sample)
    fig = plt.figure(figsize=(5, 5))
    if train.shape[1] == 3:
        ax = fig.add_subplot(projection="3d")
        ax.scatter(*train.T, s=2, c="0.6", label="train")
        ax.scatter(*sample.T, s=1, c="tab:blue", alpha=0.5, label="estimate")
    else:
        ax = fig.add_subplot()
        ax.scatter(train[:, 0], train[:, 1], s=2, c="0.6", label="train")
        ax.scatter(sample[:, 0], sample[:, 1], s=1, c="tab:blue", alpha=0.5, label="estimate")
        ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(title)
    ax.legend(loc="upper right", markerscale=4)
    return _save(fig, path)


def normalized_histograms(normalized, path, bins=10):
    """One histogram per method of min-max normalised errors across configs."""
    methods = sorted({m for vals in normalized.values() for m in vals})
    fig, axes = plt.subplots(1, max(1, len(methods)), figsize=(4 * max(1, len(methods)), 3.2),
                             sharey=True, squeeze=False)
    for ax, m in zip(axes[0], methods):
        vals = [v[m] for v in normalized.values() if m in v]
        ax.hist(vals, bins=bins, range=(0, 1), color="tab:blue", edgecolor="k")
        ax.set_title(m.upper())
        ax.set_xlabel("normalised ERE")
    axes[0][0].set_ylabel("configurations")
    fig.tight_layout()
    return _save(fig, path)


def ere_heatmap(entries, path, title="", key="best_sym_ere"):
    """Heatmap of ``key`` over (n, n/k) from summary entries of one dataset/method."""
    ns = sorted({e["n"] for e in entries})
    nks = sorted({e["n_over_k"] for e in entries})
    grid = np.full((len(ns), len(nks)), np.nan)
    for e in entries:
        if key in e:
            grid[ns.index(e["n"]), nks.index(e["n_over_k"])] = e[key]
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(nks)), [str(v) for v in nks])
    ax.set_yticks(range(len(ns)), [str(v) for v in ns])
    ax.set_xlabel("n/k")
    ax.set_ylabel("n")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label=key)
    fig.tight_layout()
    return _save(fig, path)


def render_all(result, out_dir):
    out = Path(out_dir)
    written = []
    for key, (train, sample) in sorted(result.overlays.items()):
        ds, n, nk, method = key
        name = f"scatter_{ds}_n{n}_nk{nk}_{method}.svg"
        written.append(scatter_overlay(train, sample, out / name,
                                       f"{ds} n={n} n/k={nk} {method.upper()}"))
    normed = result.normalized()
    if normed:
        written.append(normalized_histograms(normed, out / "normalized_hist.svg"))
    written.extend(render_heatmaps(result.summary(), out))
    return written


def render_heatmaps(summary, out_dir):
    out = Path(out_dir)
    groups = {}
    for e in summary:
        groups.setdefault((e["dataset"], e["method"]), []).append(e)
    written = []
    for (ds, method), entries in sorted(groups.items()):
        written.append(ere_heatmap(entries, out / f"heatmap_{ds}_{method}.svg",
                                   f"{ds} {method.upper()}"))
    return written


def summary_from_rows(rows):
    """Summary entries (as in summary.json) rebuilt from results.csv rows."""
    cells = {}
    for r in rows:
        cells.setdefault((r["dataset"], r["n"], r["n_over_k"], r["k"], r["method"]), []).append(r)
    out = []
    for (ds, n, nk, k, method), rs in cells.items():
        vals = np.array([r["sym_ere"] for r in rs if not r["error"]], dtype=float)
        e = {"dataset": ds, "n": n, "n_over_k": nk, "k": k, "method": method,
             "repetitions": len(rs), "failed": len(rs) - len(vals)}
        if len(vals):
            e.update(mean_sym_ere=float(vals.mean()), std_sym_ere=float(vals.std()),
                     best_sym_ere=float(vals.min()))
        out.append(e)
    return out


def normalized_from_summary(summary):
    from .harness import min_max_normalize
    cells = {}
    for e in summary:
        if "best_sym_ere" in e:
            cells.setdefault((e["dataset"], e["n"], e["n_over_k"]), {})[e["method"]] = e["best_sym_ere"]
    out = {}
    for cell, by in cells.items():
        if len(by) >= 2:
            ms = sorted(by)
            out[cell] = dict(zip(ms, min_max_normalize([by[m] for m in ms])))
    return out

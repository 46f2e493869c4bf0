"""Threshold-sweep report: accuracy table as CSV plus rendered figures.

The sweep mirrors how a user would work the slider after an initial
selection: the technique runs once at s = 0 and the selection is
re-thresholded at each slider value, scoring F1/MCC against the cloud's
ground-truth labels.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import data, techniques
from .cli import _run_selection

_MAX_SCATTER_POINTS = 20_000


def sweep_selection(cloud, grid, sel, s_values):
    """Rows of (s, threshold, selection, stats) across the slider range."""
    rows = []
    for s in s_values:
        if sel.technique == "baseline":
            cur = sel
        else:
            cur = techniques.adjust_threshold(grid, cloud, sel, float(s))
        stats = data.confusion_stats(cur.particles, cloud.labels)
        rows.append((float(s), cur.threshold, cur, stats))
    return rows


def run_report(cloud, grid, stroke, technique, out_dir, s_values=None):
    if s_values is None:
        s_values = np.arange(-4.0, 4.5, 1.0)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sel = _run_selection(technique, cloud, grid, stroke, None)
    rows = sweep_selection(cloud, grid, sel, s_values)

    csv_path = out_dir / "sweep.csv"
    lines = ["s,threshold,selected,tp,fp,fn,tn,f1,mcc"]
    for s, threshold, cur, st in rows:
        lines.append(f"{s!r},{threshold!r},{cur.count},"
                     f"{st.tp},{st.fp},{st.fn},{st.tn},{st.f1!r},{st.mcc!r}")
    csv_path.write_text("\n".join(lines) + "\n")

    best_s, _, best_sel, best_stats = max(rows, key=lambda r: r[3].f1)
    best_path = out_dir / "best_selection.json"
    best_path.write_text(data.canonical_json(
        techniques.selection_to_dict(best_sel, stats=best_stats.to_dict())))

    curve_path = out_dir / "accuracy_vs_s.png"
    fig, ax = plt.subplots(figsize=(6, 4))
    ss = [r[0] for r in rows]
    ax.plot(ss, [r[3].f1 for r in rows], "o-", label="F1")
    ax.plot(ss, [r[3].mcc for r in rows], "s--", label="MCC")
    ax.axvline(best_s, color="0.7", lw=1, zorder=0)
    ax.set_xlabel("threshold exponent s  (threshold = 2^s rho0)")
    ax.set_ylabel("score")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(f"{technique}: accuracy across the threshold sweep")
    ax.legend()
    fig.tight_layout()
    fig.savefig(curve_path, dpi=120)
    plt.close(fig)

    scatter_path = out_dir / "selection_3d.png"
    _scatter_figure(cloud, best_sel, best_s, scatter_path)
    return [csv_path, best_path, curve_path, scatter_path]


def _scatter_figure(cloud, sel, s, path):
    n = cloud.n
    stride = max(1, n // _MAX_SCATTER_POINTS)
    idx = np.arange(0, n, stride)
    pos = cloud.positions[idx]
    labels = cloud.labels[idx]
    selected = np.zeros(n, dtype=bool)
    selected[sel.particles] = True
    shown_sel = selected[idx]

    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    interf = ~labels & ~shown_sel
    target = labels & ~shown_sel
    ax.scatter(*pos[interf].T, s=1, c="#1e90ff", alpha=0.25, label="interferer")
    ax.scatter(*pos[target].T, s=1, c="#daa520", alpha=0.5, label="target")
    ax.scatter(*pos[shown_sel].T, s=2, c="#b22222", alpha=0.8, label="selected")
    ax.set_title(f"{sel.technique} selection at s = {s:g}")
    ax.legend(loc="upper right", markerscale=6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

"""Figure rendering for experiment reports.

Renders the familiar views of a sweep (efficiency vs. burst count per
experiment, the N x BC efficiency matrix, read/write asymmetry bars) as PNG
files next to the CSV output.  Purely presentational; all numbers come from
the `EffReport` rows.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import EffReport  # noqa: E402


def _aggregate_rows(rows):
    return [r for r in rows if r.port == "all"]


def render_figures(rows: list[EffReport], outdir: str) -> list[str]:
    """Render every figure supported by the rows present; returns paths."""
    os.makedirs(outdir, exist_ok=True)
    agg = _aggregate_rows(rows)
    paths = []

    by_exp = defaultdict(list)
    for r in agg:
        by_exp[r.experiment].append(r)

    bank_exps = [e for e in ("expa", "expb", "expc", "expd") if e in by_exp]
    if bank_exps:
        fig, ax = plt.subplots(figsize=(6, 4))
        for exp in bank_exps:
            pts = sorted(by_exp[exp], key=lambda r: r.BC)
            ax.plot([r.BC for r in pts], [r.eff_percent for r in pts],
                    marker="o", label=f"{exp.upper()} ({pts[0].policy})")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("burst count (words)")
        ax.set_ylabel("bandwidth efficiency (%)")
        ax.set_title("Bank assignment and arbitration policy vs. efficiency")
        ax.grid(True, alpha=0.3)
        ax.legend()
        path = os.path.join(outdir, "bank_experiments.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)

    if "peak" in by_exp:
        pts = by_exp["peak"]
        ns = sorted({r.N for r in pts})
        bcs = sorted({r.BC for r in pts})
        fig, ax = plt.subplots(figsize=(6, 4))
        if len(ns) > 1:
            grid = [[next((r.eff_percent for r in pts if r.N == n and r.BC == bc), float("nan"))
                     for bc in bcs] for n in ns]
            im = ax.imshow(grid, aspect="auto", origin="lower", cmap="viridis")
            ax.set_xticks(range(len(bcs)), [str(b) for b in bcs])
            ax.set_yticks(range(len(ns)), [str(n) for n in ns])
            ax.set_xlabel("burst count (words)")
            ax.set_ylabel("ports")
            fig.colorbar(im, ax=ax, label="efficiency (%)")
            for i, n in enumerate(ns):
                for j, bc in enumerate(bcs):
                    ax.text(j, i, f"{grid[i][j]:.1f}", ha="center", va="center",
                            color="white", fontsize=8)
        else:
            srt = sorted(pts, key=lambda r: r.BC)
            ax.plot([r.BC for r in srt], [r.eff_percent for r in srt], marker="o")
            ax.set_xscale("log", base=2)
            ax.set_xlabel("burst count (words)")
            ax.set_ylabel("efficiency (%)")
        ax.set_title("Peak bandwidth efficiency")
        path = os.path.join(outdir, "peak_sweep.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)

    if "rw" in by_exp:
        pts = by_exp["rw"]
        labels = sorted({r.name.rsplit("_", 1)[0] for r in pts})
        wr = [next((r.eff_percent for r in pts if r.name == f"{l}_write"), 0.0) for l in labels]
        rd = [next((r.eff_percent for r in pts if r.name == f"{l}_read"), 0.0) for l in labels]
        fig, ax = plt.subplots(figsize=(6, 4))
        x = range(len(labels))
        ax.bar([i - 0.2 for i in x], wr, width=0.4, label="write")
        ax.bar([i + 0.2 for i in x], rd, width=0.4, label="read")
        ax.set_xticks(list(x), labels, rotation=30)
        ax.set_ylabel("efficiency (%)")
        ax.set_title("Read/write efficiency asymmetry")
        ax.legend()
        path = os.path.join(outdir, "rw_asymmetry.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)

    return paths

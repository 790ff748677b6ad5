"""Figures for sweep results (headless matplotlib)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiment import median_by_n  # noqa: E402


def plot_sweep(rows: list, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    algs = sorted({r["algorithm"] for r in rows if r["algorithm"] != "baseline"})
    written = []
    for metric, ylabel, log in (("gap_over_opt", "additive gap / OPT estimate", False),
                                ("mult_ratio", "private cost / baseline cost", True)):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for alg in algs:
            pts = [(int(r["n"]), float(r[metric])) for r in rows
                   if r["algorithm"] == alg and r.get(metric, "") != ""]
            if not pts:
                continue
            ax.scatter(*zip(*pts), s=12, alpha=0.5)
            med = median_by_n(rows, metric, alg)
            ax.plot(list(med), list(med.values()), marker="o", label=f"{alg} (median)")
        ax.set_xscale("log")
        if log:
            ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        fig.tight_layout()
        p = out_dir / f"{metric}.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        written.append(p)
    return written

"""Report rendering: aligned text tables, delimited output and figures.

Figures are written to files next to the delimited output; rendering uses
the Agg backend so report generation works headless.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .metrics import MetricsReport
from .pipeline import HISTOGRAM_BINS, BatchReport


def _fmt(value, width: int = 9) -> str:
    if value is None:
        return "-".rjust(width)
    return f"{value:.3f}".rjust(width)


def metrics_table(report: MetricsReport) -> str:
    """Aligned per-type ACC/F1/AUC table with macro averages."""
    header = f"{'command':<10}{'ACC':>9}{'F1':>9}{'AUC':>9}"
    rows = [header, "-" * len(header)]
    for name, scores in report.per_type.items():
        rows.append(f"{name:<10}{_fmt(scores.accuracy)}{_fmt(scores.f1)}"
                    f"{_fmt(scores.auc)}")
    rows.append("-" * len(header))
    rows.append(f"{'macro':<10}{_fmt(report.macro_accuracy)}"
                f"{_fmt(report.macro_f1)}{_fmt(report.macro_auc)}")
    rows.append(f"{'overall':<10}{_fmt(report.overall_accuracy)}")
    rows.append(f"{'params':<10}{_fmt(report.param_accuracy)}")
    if report.shape:
        rows.append("")
        rows.append(f"{'CD':<10}{report.shape['cd']:>12.4f}")
        rows.append(f"{'MMD':<10}{report.shape['mmd']:>12.4f}")
        rows.append(f"{'JSD':<10}{report.shape['jsd']:>12.4f}")
    return "\n".join(rows)


def metrics_csv(report: MetricsReport) -> str:
    lines = ["command,accuracy,f1,auc"]
    for name, scores in report.per_type.items():
        auc = "" if scores.auc is None else f"{scores.auc:.6f}"
        lines.append(f"{name},{scores.accuracy:.6f},{scores.f1:.6f},{auc}")
    macro_auc = "" if report.macro_auc is None else f"{report.macro_auc:.6f}"
    lines.append(f"macro,{report.macro_accuracy:.6f},{report.macro_f1:.6f},{macro_auc}")
    return "\n".join(lines) + "\n"


def histogram_table(counts, lo: float = 0.0, hi: float = 1.0) -> str:
    """Fixed-bin histogram as a delimited text table (bin_lo,bin_hi,count)."""
    edges = np.linspace(lo, hi, len(counts) + 1)
    lines = ["bin_lo,bin_hi,count"]
    for i, c in enumerate(counts):
        lines.append(f"{edges[i]:.3f},{edges[i + 1]:.3f},{int(c)}")
    return "\n".join(lines) + "\n"


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_ratio_histogram(counts, path, title: str = "LCS ratio distribution"):
    """Bar chart of the 50-bin ratio histogram, written as a PNG."""
    plt = _pyplot()
    edges = np.linspace(0.0, 1.0, len(counts) + 1)
    centers = (edges[:-1] + edges[1:]) / 2
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(centers, counts, width=edges[1] - edges[0], color="#4878b0",
           edgecolor="white", linewidth=0.3)
    ax.set_xlabel("LCS ratio")
    ax.set_ylabel("samples")
    ax.set_title(title)
    ax.set_xlim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_metrics_bars(report: MetricsReport, path):
    """Grouped per-type ACC/F1/AUC bars, written as a PNG."""
    plt = _pyplot()
    names = list(report.per_type)
    x = np.arange(len(names))
    width = 0.27
    fig, ax = plt.subplots(figsize=(7, 4))
    for k, (label, attr) in enumerate((("ACC", "accuracy"), ("F1", "f1"),
                                       ("AUC", "auc"))):
        vals = [getattr(report.per_type[n], attr) or 0.0 for n in names]
        ax.bar(x + (k - 1) * width, vals, width, label=label)
    ax.set_xticks(x, names)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("per-command metrics")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_batch_figures(report: BatchReport, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [render_ratio_histogram(report.histogram_counts,
                                    out / "lcs_ratio_histogram.png")]
    return paths

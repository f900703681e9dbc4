"""Rendering of evaluation reports: per-metric figures and a per-sample CSV.

Figures are written as PNG files next to the JSON report so a run leaves a
self-contained, human-inspectable record.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file output only; no display in pipeline contexts

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import MetricReport


def write_per_sample_csv(reports: list[MetricReport], path) -> None:
    """One row per sample id, one column per metric; missing values blank."""
    ids = sorted({i for r in reports for i in r.sample_ids})
    by_metric = {r.name: dict(zip(r.sample_ids, r.values)) for r in reports}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id"] + [r.name for r in reports])
        for sample_id in ids:
            row = [sample_id]
            for r in reports:
                value = by_metric[r.name].get(sample_id)
                row.append("" if value is None else f"{value:.6f}")
            writer.writerow(row)


def render_metric_figure(report: MetricReport, path) -> None:
    """Histogram of per-sample values with the mean ± std band marked."""
    fig, ax = plt.subplots(figsize=(5, 3.2), dpi=120)
    if report.values:
        lo, hi = min(report.values), max(report.values)
        if hi - lo < 1e-6:  # (near-)constant scores need explicit finite-width bins
            center = (lo + hi) / 2.0
            bins = [center - 0.5, center + 0.5]
        else:
            bins = min(20, max(5, report.n))
        ax.hist(report.values, bins=bins, color="#4878a8", edgecolor="white")
        ax.axvline(report.mean, color="#c44e52", linewidth=1.5, label=f"mean {report.mean:.3f}")
        ax.axvspan(
            report.mean - report.std,
            report.mean + report.std,
            color="#c44e52",
            alpha=0.15,
            label=f"± std {report.std:.3f}",
        )
        ax.legend(fontsize=8, frameon=False)
    else:
        ax.text(0.5, 0.5, "no evaluated samples", ha="center", va="center", transform=ax.transAxes)
    ax.set_title(report.line(), fontsize=10)
    ax.set_xlabel(report.name)
    ax.set_ylabel("samples")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_report_outputs(reports: list[MetricReport], out_dir) -> dict:
    """Write CSV + one figure per metric under `out_dir`; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "per_sample.csv"
    write_per_sample_csv(reports, csv_path)
    figures = {}
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    for report in reports:
        fig_path = fig_dir / f"{report.name}.png"
        render_metric_figure(report, fig_path)
        figures[report.name] = str(fig_path)
    return {"csv": str(csv_path), "figures": figures}

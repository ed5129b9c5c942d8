"""Persistence and rendering of evaluation reports.

Writes a delimited summary (bin, metric, mean, std, n), a JSON dump,
per-metric curve data files and matplotlib figures of each metric against
the correction-angle bins.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluate import METRIC_NAMES, EvaluationReport

_METRIC_TITLES = {
    "lpips": "LPIPS (lower is better)",
    "blurriness": "Image blurriness (lower is better)",
    "angular_error": "Gaze angular error [deg] (lower is better)",
    "mse": "Pixel MSE (auxiliary)",
}


def report_table_rows(report: EvaluationReport) -> list[tuple]:
    rows = []
    for metric in METRIC_NAMES:
        for label, mean, std, n in zip(
            report.bin_labels, report.means[metric], report.stds[metric], report.counts
        ):
            rows.append((label, metric, mean, std, n))
    return rows


def format_text_table(report: EvaluationReport) -> str:
    """Aligned text rendering of the per-bin metric means."""
    header = ["bin", "n"] + list(METRIC_NAMES)
    lines = [header]
    for i, label in enumerate(report.bin_labels):
        lines.append(
            [label, str(report.counts[i])]
            + [f"{report.means[m][i]:.4g}" for m in METRIC_NAMES]
        )
    widths = [max(len(str(row[c])) for row in lines) for c in range(len(header))]
    out = []
    for row in lines:
        out.append("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    out.append(
        f"pairs evaluated: {report.total_pairs}  skipped: {report.skipped_pairs}"
    )
    return "\n".join(out)


def write_report(report: EvaluationReport, out_dir: Path, figures: bool = True) -> dict:
    """Persist the report; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    csv_path = out_dir / "report.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin", "metric", "mean", "std", "n"])
        writer.writerows(report_table_rows(report))
    paths["csv"] = csv_path

    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2))
    paths["json"] = json_path

    curve_dir = out_dir / "curves"
    curve_dir.mkdir(exist_ok=True)
    for metric in METRIC_NAMES:
        curve_path = curve_dir / f"{metric}_by_bin.csv"
        with curve_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin", "gamma_mid", "mean", "std", "n"])
            for i, label in enumerate(report.bin_labels):
                writer.writerow(
                    [
                        label,
                        report.gamma_mid[i],
                        report.means[metric][i],
                        report.stds[metric][i],
                        report.counts[i],
                    ]
                )
        paths[f"curve_{metric}"] = curve_path

    if figures:
        fig_dir = out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        for metric in METRIC_NAMES:
            fig_path = fig_dir / f"{metric}_vs_correction_angle.png"
            _plot_metric(report, metric, fig_path)
            paths[f"figure_{metric}"] = fig_path
    return paths


def _plot_metric(report: EvaluationReport, metric: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = range(len(report.bin_labels))
    ax.errorbar(
        xs,
        report.means[metric],
        yerr=report.stds[metric],
        marker="o",
        capsize=3,
        linewidth=1.5,
    )
    ax.set_xticks(list(xs))
    ax.set_xticklabels(report.bin_labels, fontsize=8)
    ax.set_xlabel("correction angle bin")
    ax.set_ylabel(metric)
    ax.set_title(_METRIC_TITLES.get(metric, metric), fontsize=10)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

"""Writing evaluation reports: JSON + CSV plus summary figures.

Given a report path like ``out/report.json`` the writer emits the JSON
document, a CSV twin (``report.csv``) and a rendered per-image score
chart (``report.png``) next to it.  Figures use the Agg backend so the
pipeline works headless.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import QualityReport, report_to_csv_text, report_to_json_dict

#: PSNR value plotted in place of the infinite sentinel so the axis stays finite.
_PSNR_PLOT_CAP = 60.0


def report_paths(report_path: str | Path) -> tuple[Path, Path, Path]:
    """Derive the (json, csv, figure) paths from the requested report path."""
    base = Path(report_path)
    if base.suffix.lower() != ".json":
        base = base.with_name(base.name + ".json")
    return base, base.with_suffix(".csv"), base.with_suffix(".png")


def render_report_figure(report: QualityReport, path: str | Path) -> None:
    """Draw per-image PSNR and SSIM bars with their means marked."""
    ids = [row.id for row in report.rows]
    psnr_vals = [min(row.psnr_db, _PSNR_PLOT_CAP) for row in report.rows]
    ssim_vals = [row.ssim for row in report.rows]
    positions = range(len(ids))

    fig, (ax_psnr, ax_ssim) = plt.subplots(2, 1, figsize=(max(6.0, 0.45 * len(ids)), 6.0))
    ax_psnr.bar(positions, psnr_vals, color="#4878cf")
    if not math.isinf(report.mean_psnr):
        ax_psnr.axhline(report.mean_psnr, color="#d65f5f", linestyle="--", label="mean")
        ax_psnr.legend(loc="lower right")
    ax_psnr.set_ylabel("PSNR [dB]")
    ax_psnr.set_xticks(list(positions))
    ax_psnr.set_xticklabels(ids, rotation=45, ha="right", fontsize=7)

    ax_ssim.bar(positions, ssim_vals, color="#6acc65")
    ax_ssim.axhline(report.mean_ssim, color="#d65f5f", linestyle="--", label="mean")
    ax_ssim.set_ylim(0.0, 1.05)
    ax_ssim.set_ylabel("SSIM")
    ax_ssim.set_xticks(list(positions))
    ax_ssim.set_xticklabels(ids, rotation=45, ha="right", fontsize=7)
    ax_ssim.legend(loc="lower right")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(
    report: QualityReport, report_path: str | Path, figures: bool = True
) -> tuple[Path, Path, Path | None]:
    """Serialise a report to JSON and CSV, optionally rendering the figure.

    Returns the paths written (figure path is None when skipped).
    """
    json_path, csv_path, figure_path = report_paths(report_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(json.dumps(report_to_json_dict(report), indent=2) + "\n")
    csv_path.write_text(report_to_csv_text(report))
    if figures:
        render_report_figure(report, figure_path)
        return json_path, csv_path, figure_path
    return json_path, csv_path, None

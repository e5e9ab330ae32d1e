"""Report rendering: delimited series plus matplotlib figures on disk.

Two series shapes cover the CLI's needs: (level, value) for discretization
runs and (x, objective) for the one-dimensional two-point section. Each CSV
gets a PNG rendered next to it.
"""

from __future__ import annotations

import csv
import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def write_series_csv(path: str, header: Sequence[str],
                     rows: Sequence[Sequence[float]]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def render_series_png(path: str, xs: Sequence[float], ys: Sequence[float],
                      xlabel: str, ylabel: str, title: str,
                      marker: str = "o") -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    ax.plot(xs, ys, marker=marker, lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def emit_level_report(report_dir: str, levels: Sequence[int],
                      values: Sequence[float], title: str) -> list[str]:
    csv_path = os.path.join(report_dir, "levels.csv")
    png_path = os.path.join(report_dir, "levels.png")
    write_series_csv(csv_path, ["level", "value"], list(zip(levels, values)))
    render_series_png(png_path, list(levels), list(values),
                      "discretization cells", "optimal value", title)
    return [csv_path, png_path]


def emit_section_report(report_dir: str, xs: Sequence[float],
                        gs: Sequence[float], title: str) -> list[str]:
    csv_path = os.path.join(report_dir, "objective.csv")
    png_path = os.path.join(report_dir, "objective.png")
    write_series_csv(csv_path, ["x", "objective"], list(zip(xs, gs)))
    render_series_png(png_path, list(xs), list(gs),
                      "first-row transform integral x", "objective G(x)", title,
                      marker="")
    return [csv_path, png_path]

"""Delimited output and figure rendering for the command-line reports."""

from __future__ import annotations

import csv
import io
import math

from .scalars import INF, format_value


def csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) if not isinstance(v, str) else v
                         for v in row])
    return buf.getvalue()


def render_bar_chart(names: list, values: list, path: str, title: str,
                     ylabel: str = "value") -> None:
    """Save a bar chart of per-state values; infinite entries are drawn at
    the top of the axis and hatched."""
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    finite = [float(v) for v in values if v != INF and math.isfinite(float(v))]
    top = max(finite, default=1.0) or 1.0
    heights, hatches = [], []
    for v in values:
        if v == INF or not math.isfinite(float(v)):
            heights.append(top * 1.1)
            hatches.append("//")
        else:
            heights.append(float(v))
            hatches.append(None)

    fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * len(names)), 3.2))
    bars = ax.bar(range(len(names)), heights, color="#4878a8")
    for bar, hatch in zip(bars, hatches):
        if hatch:
            bar.set_hatch(hatch)
            bar.set_facecolor("#c0c8d8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

"""Run artifacts: delimited series tables and static matplotlib figures.

Figures are rendered straight from the same tables the files carry, so the
delimited output stays the source of truth for replays and diffs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

_STRATEGY_COLORS = {
    "def": "#7f7f7f",
    "rnd": "#d62728",
    "style-clk": "#1f77b4",
    "style-evnts": "#2ca02c",
}


def write_tsv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def coverage_figure(
    series: Mapping[str, Sequence[tuple[float, float]]],
    out_path: str | Path,
    *,
    xlabel: str = "crawl actions",
    ylabel: str | None = None,
    title: str = "coverage vs. crawl actions",
) -> None:
    """One line per strategy: x = actions (or seconds), y = coverage.

    Values are treated as ratios (rendered as %) unless a custom ylabel is
    given, in which case they are plotted as-is.
    """
    as_percent = ylabel is None
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    for name in sorted(series):
        points = series[name]
        if not points:
            continue
        xs = [p[0] for p in points]
        ys = [(100.0 * p[1] if as_percent else p[1]) for p in points]
        ax.plot(xs, ys, label=name, color=_STRATEGY_COLORS.get(name), drawstyle="steps-post")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel or "coverage (% of maximal set, by characters)")
    ax.set_title(title)
    ax.set_ylim(bottom=0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def eval_table_rows(reports: Mapping[str, object]) -> list[list]:
    """Rows mirroring the per-event accuracy table: precision/recall/F for the
    actionable and non-actionable classes, percentages to two decimals."""
    rows = []
    for event_name in sorted(reports):
        rep = reports[event_name]
        a = rep.actionable
        n = rep.non_actionable
        rows.append(
            [
                event_name,
                f"{100 * a.precision:.2f}",
                f"{100 * a.recall:.2f}",
                f"{100 * a.f_measure:.2f}",
                f"{100 * n.precision:.2f}",
                f"{100 * n.recall:.2f}",
                f"{100 * n.f_measure:.2f}",
            ]
        )
    return rows


EVAL_TABLE_HEADER = [
    "event",
    "actionable_precision",
    "actionable_recall",
    "actionable_f_measure",
    "non_actionable_precision",
    "non_actionable_recall",
    "non_actionable_f_measure",
]

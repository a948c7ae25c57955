"""
Effort-complexity diagrams: every candidate of a location as a point of
(effort, PCI), with the selected ones highlighted. The SVG output is
deterministic, so reruns produce the same bytes.

Each point is drawn as its own group with the id `candidate-<activity>` or
`selected-<activity>`.
"""

from typing import Optional

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from ecitarget import DataError  # noqa: E402
from ecitarget.effort import EffortMatrix  # noqa: E402
from ecitarget.portfolio.generic import Portfolio  # noqa: E402
from ecitarget.report import Colors  # noqa: E402


DIAGRAM_COLUMNS = ('activity', 'w', 'pci_future', 'selected')


def diagram_rows(effort: EffortMatrix, portfolio: Portfolio) -> pd.DataFrame:
    """
    The rows behind a diagram, sorted by activity. Infinite efforts are
    kept in the CSV but can't be drawn.
    """

    chosen = set(portfolio.activities)
    return pd.DataFrame({
        'activity': [c.activity for c in effort.candidates],
        'w': [c.w for c in effort.candidates],
        'pci_future': [c.pci for c in effort.candidates],
        'selected': [c.activity in chosen for c in effort.candidates]
    }, columns=list(DIAGRAM_COLUMNS))


def write_diagram_csv(rows: pd.DataFrame, path: str) -> None:
    rows.to_csv(path, index=False)


def emit_diagram_svg(rows: pd.DataFrame, path: str,
                     title: Optional[str] = None,
                     target: Optional[float] = None) -> None:
    """
    Writes the scatter of (w, pci_future) of the rows to `path`. The
    `selected` column decides which points are highlighted.
    """

    if rows.empty:
        raise DataError("Can't draw a diagram without candidates")

    rows = rows[np.isfinite(rows['w'].to_numpy(dtype=float))]
    plt.rcParams['svg.hashsalt'] = 'ecitarget'
    fig, ax = plt.subplots(figsize=(6, 4.5))
    try:
        for row in rows.itertuples(index=False):
            selected = bool(row.selected)
            kind = 'selected' if selected else 'candidate'
            ax.scatter([row.w], [row.pci_future], s=22 if selected else 14,
                       color=Colors.selected if selected
                       else Colors.candidate,
                       zorder=3 if selected else 2,
                       gid=f"{kind}-{row.activity}")
        if target is not None:
            ax.axhline(target, color=Colors.fit, linewidth=0.8,
                       linestyle='--', gid='target')

        ax.set_xlabel("Effort W (added RCA)")
        ax.set_ylabel("Future PCI")
        if title is not None:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format='svg', metadata={'Date': None})
    finally:
        plt.close(fig)

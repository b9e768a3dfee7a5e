"""Figure rendering for emitted rate series.

Plots mirror the delimited output: whatever lands in series.csv can also be
read off a PNG next to it. Rendering is headless (Agg) and never part of
byte-compared artifacts; the CSV/JSON files stay the ground truth.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

RATE_SCALE = 100_000

_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
}

_OPERATOR_STYLES = {
    "crude": {"linestyle": "--", "marker": "o"},
    "sca": {"linestyle": "-", "marker": "s"},
    "scc": {"linestyle": "-", "marker": "^"},
}


def _group_label(key) -> str:
    return str(key)


def _series_points(series, column: str) -> dict:
    """period-ordered scaled rates per group; NaN marks undefined entries."""
    periods = sorted({row.period for row in series.rows})
    by_group: dict = {}
    for row in series.rows:
        by_group.setdefault(row.group, {})[row.period] = row
    out = {}
    for group, per_period in by_group.items():
        ys = []
        for p in periods:
            row = per_period.get(p)
            if row is None:
                ys.append(math.nan)
                continue
            if column == "pct_diff":
                ys.append(math.nan if row.pct_diff is None else float(row.pct_diff))
            else:
                res = getattr(row, column)
                ys.append(float(res.value) * RATE_SCALE if res.is_defined else math.nan)
        out[group] = (periods, ys)
    return out


def render_trend(series, path: str | Path) -> Path:
    """One line per (group, operator): rates per 100,000 across periods."""
    path = Path(path)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for column, style in _OPERATOR_STYLES.items():
            for group, (periods, ys) in sorted(
                _series_points(series, column).items(), key=lambda kv: str(kv[0])
            ):
                ax.plot(periods, ys, label=f"{_group_label(group)} {column}",
                        markersize=4, **style)
        ax.set_xlabel("period")
        ax.set_ylabel(f"rate per {RATE_SCALE:,}")
        ax.set_title("crude and standardized rates")
        ax.legend(loc="best", ncol=2)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def render_pct_diff(series, path: str | Path) -> Path:
    """Distortion of crude against standardized, per group and period."""
    path = Path(path)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for group, (periods, ys) in sorted(
            _series_points(series, "pct_diff").items(), key=lambda kv: str(kv[0])
        ):
            ax.plot(periods, ys, marker="o", markersize=4,
                    label=_group_label(group))
        ax.set_xlabel("period")
        ax.set_ylabel("|standardized - crude| / standardized, %")
        ax.set_title("crude-rate distortion relative to standardized")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path

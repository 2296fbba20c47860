#!/usr/bin/env python3
"""Render multi-panel tail-criterion figures from a simulation grid CSV.

Panels are laid out response-kind by row and covariate count by column for one
allocation ratio.  Each panel plots the empirical tail quantile (blue) and the
moment approximation (red) against the block count B on a discrete axis, with
the analytic criterion dashed when the column is present.  Values are divided
by the panel minimum, so only relative comparisons are shown, and the
best-performing B of the empirical series is marked.

The script is a pure consumer of the CSV: it never recomputes statistics.

Usage: figures.py --csv grid.csv --out grid.png --ratio 1:1
"""

from __future__ import annotations

import argparse
import sys
import warnings

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

KIND_ORDER = ("continuous", "incidence", "proportion", "count", "survival")

REQUIRED_COLUMNS = ("kind", "p", "ratio", "B", "empirical_q", "approx_q_mc")
OPTIONAL_SERIES = "analytic_Q"

SERIES_STYLE = {
    "empirical_q": dict(color="tab:blue", marker="o", label="empirical quantile"),
    "approx_q_mc": dict(color="tab:red", marker="s", label="mean + c_q sd"),
    "analytic_Q": dict(color="0.45", marker=None, linestyle="--", label="analytic"),
}


def load_rows(csv_path: str, ratio: str) -> pd.DataFrame:
    frame = pd.read_csv(csv_path)
    missing = [col for col in REQUIRED_COLUMNS if col not in frame.columns]
    if missing:
        raise ValueError(f"CSV {csv_path} misses required columns: {missing}")
    rows = frame[frame["ratio"] == ratio]
    if rows.empty:
        raise ValueError(f"CSV {csv_path} has no rows for ratio {ratio!r}; "
                         f"present: {sorted(frame['ratio'].unique())}")
    return rows


def render(csv_path: str, out_path: str, ratio: str) -> dict:
    """Write the panel grid image; returns per-panel metadata for callers.

    Metadata maps (kind, p) to the plotted B values and the argmin-B of the
    empirical series.
    """
    rows = load_rows(csv_path, ratio)
    has_analytic = OPTIONAL_SERIES in rows.columns
    if not has_analytic:
        warnings.warn(f"column {OPTIONAL_SERIES!r} missing; plotting two series only")

    kinds = [k for k in KIND_ORDER if k in set(rows["kind"])]
    kinds += sorted(set(rows["kind"]) - set(KIND_ORDER))
    p_values = sorted(rows["p"].unique())

    fig, axes = plt.subplots(
        len(kinds), len(p_values), squeeze=False,
        figsize=(3.4 * len(p_values), 2.4 * len(kinds)),
        sharex=False,
    )
    metadata = {}
    for i, kind in enumerate(kinds):
        for j, p in enumerate(p_values):
            ax = axes[i][j]
            panel = rows[(rows["kind"] == kind) & (rows["p"] == p)].sort_values("B")
            if panel.empty:
                ax.set_axis_off()
                continue
            b_values = panel["B"].tolist()
            x = range(len(b_values))
            series = ["empirical_q", "approx_q_mc"] + (["analytic_Q"] if has_analytic else [])
            floor = min(panel[name].min() for name in series)
            for name in series:
                ax.plot(x, panel[name] / floor, lw=1.2, ms=3, **SERIES_STYLE[name])
            best_pos = int(panel["empirical_q"].values.argmin())
            best_b = b_values[best_pos]
            best_y = panel["empirical_q"].values[best_pos] / floor
            ax.plot([best_pos], [best_y], marker="*", ms=11, color="tab:blue", zorder=5)
            ax.annotate(f"B={best_b}", (best_pos, best_y), textcoords="offset points",
                        xytext=(4, 6), fontsize=8, color="tab:blue")
            ax.set_xticks(list(x))
            ax.set_xticklabels([str(b) for b in b_values], fontsize=7)
            if i == len(kinds) - 1:
                ax.set_xlabel("B")
            if i == 0:
                ax.set_title(f"p = {p}", fontsize=10)
            if j == 0:
                ax.set_ylabel(kind, fontsize=9)
            ax.tick_params(axis="y", labelsize=7)
            metadata[(kind, int(p))] = {"B_list": [int(b) for b in b_values],
                                        "argmin_B": int(best_b)}
    handles, labels = axes[0][0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower center", ncol=len(labels), fontsize=9,
               frameon=False)
    fig.suptitle(f"tail criterion vs block count (allocation {ratio}, min-normalized)",
                 fontsize=11)
    fig.tight_layout(rect=(0, 0.05, 1, 0.96))
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return metadata


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--csv", required=True, help="simulation grid CSV")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--ratio", required=True, choices=["1:1", "2:1"],
                        help="allocation ratio panel set to render")
    args = parser.parse_args(argv)
    try:
        metadata = render(args.csv, args.out, args.ratio)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for (kind, p), info in sorted(metadata.items()):
        print(f"{kind} p={p}: argmin B = {info['argmin_B']}")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

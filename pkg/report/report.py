#!/usr/bin/env python3
"""Two-panel convergence figures from solver trace/compare CSV files.

Reads either a single-run ``trace.csv`` (columns iter, f, pg_norm, cg_cum,
time_s, step_kind) or a multi-run ``compare.csv`` (same columns behind a
leading ``label`` column) and renders the optimality residual on a log
scale next to the cumulative CG iteration count, one line per run. Values
are plotted exactly as they appear in the CSV; only the axes are scaled.

Usage:
    report.py <csv> --x {iter,time,cg} --out <png>
"""

from __future__ import annotations

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

TRACE_COLUMNS = ("iter", "f", "pg_norm", "cg_cum", "time_s", "step_kind")
X_CHOICES = {
    "iter": ("iter", "outer iteration"),
    "time": ("time_s", "time (s)"),
    "cg": ("cg_cum", "cumulative CG iterations"),
}


class ReportError(Exception):
    pass


def read_traces(path):
    """Parse a trace/compare CSV into {label: {column: [values...]}}.

    Enforces the trace-table invariants: required columns present, at least
    one data row, strictly increasing iteration numbers and positive
    residuals within each label.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header is None:
            raise ReportError(f"{path}: empty file")
        missing = [c for c in TRACE_COLUMNS if c not in header]
        if missing:
            raise ReportError(f"{path}: missing columns {missing}")
        labeled = "label" in header
        traces: dict[str, dict[str, list]] = {}
        for row in reader:
            label = row["label"] if labeled else ""
            series = traces.setdefault(
                label, {c: [] for c in ("iter", "f", "pg_norm", "cg_cum", "time_s")}
            )
            try:
                series["iter"].append(int(row["iter"]))
                for col in ("f", "pg_norm", "cg_cum", "time_s"):
                    series[col].append(float(row[col]))
            except (TypeError, ValueError) as exc:
                raise ReportError(f"{path}: bad row {row!r}: {exc}") from exc
    if not traces:
        raise ReportError(f"{path}: no data rows")
    for label, series in traces.items():
        its = series["iter"]
        if any(b <= a for a, b in zip(its, its[1:])):
            raise ReportError(f"{path}: iterations not increasing for {label!r}")
        if any(v <= 0.0 for v in series["pg_norm"]):
            raise ReportError(f"{path}: nonpositive pg_norm for {label!r}")
    return traces


def make_figure(traces, x_axis: str):
    """Panel pair: log residual (left), CG consumption (right)."""
    x_col, x_label = X_CHOICES[x_axis]
    fig, (ax_pg, ax_cg) = plt.subplots(1, 2, figsize=(11, 4.2))
    for label, series in sorted(traces.items()):
        name = label or "run"
        ax_pg.semilogy(series[x_col], series["pg_norm"], label=name)
        ax_cg.plot(series["iter"], series["cg_cum"], label=name)
    ax_pg.set_xlabel(x_label)
    ax_pg.set_ylabel("projected gradient norm")
    ax_pg.grid(True, which="both", alpha=0.3)
    ax_pg.legend()
    ax_cg.set_xlabel("outer iteration")
    ax_cg.set_ylabel("cumulative CG iterations")
    ax_cg.grid(True, alpha=0.3)
    ax_cg.legend()
    fig.tight_layout()
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv_path", help="trace.csv or compare.csv")
    parser.add_argument("--x", choices=sorted(X_CHOICES), default="iter",
                        help="x axis of the residual panel")
    parser.add_argument("--out", required=True, help="output PNG path")
    args = parser.parse_args(argv)
    try:
        traces = read_traces(args.csv_path)
    except (ReportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    fig = make_figure(traces, args.x)
    fig.savefig(args.out, dpi=150)
    plt.close(fig)
    print(f"wrote {args.out} ({len(traces)} run{'s' if len(traces) != 1 else ''})")
    return 0


if __name__ == "__main__":
    sys.exit(main())

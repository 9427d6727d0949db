"""CSV-to-figure rendering for sweep results and coherence reports.

Everything drawn comes straight from the CSV; no metric is recomputed
here. SVG output is byte-stable: element ids are salted with a fixed
string, text stays text instead of being outlined, and the date stamp
is suppressed, so re-rendering the same CSV reproduces the same bytes.
"""
import csv
import logging
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

log = logging.getLogger(__name__)

# fixed marker per estimator; anything unknown walks the fallback cycle
MARKERS = {
    "genie-ls": "+",
    "bmp-csi": "s",
    "bmp-nocsi": "x",
    "hf-omp": "o",
}
FALLBACK_MARKERS = ("^", "v", "D", "*", "p")

_SVG_RC = {
    "svg.hashsalt": "hffigures",
    "svg.fonttype": "none",
}


class RenderError(ValueError):
    """Bad render request: missing columns, empty data, output collision."""


@dataclass
class PlotSpec:
    """One line-plot request against a sweep CSV.

    x may name the CSV's x column directly, or the swept parameter: the
    sweep harness stores the abscissa under a generic `value` column and
    names the parameter in `sweep_param`, so x="snr_db" selects the rows
    swept over snr_db and plots their `value` cells.
    """

    csv_path: str
    x: str
    y: str
    out: str
    group: str = "estimator"
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    overwrite: bool = False


def _read_rows(path, required):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = list(reader.fieldnames or [])
        missing = [c for c in required if c not in header]
        if missing:
            raise RenderError(
                f"{path} is missing column(s) {missing}; header has {header}")
        rows = list(reader)
    if not rows:
        raise RenderError(f"{path} has no data rows")
    return header, rows


def _refuse_collision(out, overwrite):
    if os.path.exists(out) and not overwrite:
        raise RenderError(f"{out} already exists; pass overwrite to replace it")


def _marker_for(name, fallback_index):
    if name in MARKERS:
        return MARKERS[name]
    return FALLBACK_MARKERS[fallback_index % len(FALLBACK_MARKERS)]


def _save(fig, out):
    kwargs = {}
    if out.endswith(".svg"):
        kwargs["metadata"] = {"Date": None}
    try:
        fig.savefig(out, **kwargs)
    finally:
        plt.close(fig)


def _resolve_axes(header, rows, spec):
    """Map spec.x onto an actual column, filtering by sweep_param when
    the swept-parameter name was given instead of a column name."""
    if spec.x in header:
        return spec.x, rows
    if "sweep_param" in header and "value" in header:
        kept = [r for r in rows if r["sweep_param"] == spec.x]
        if kept:
            return "value", kept
        raise RenderError(
            f"no rows swept over {spec.x!r} in {spec.csv_path}")
    raise RenderError(
        f"{spec.csv_path} is missing column(s) [{spec.x!r}]; "
        f"header has {header}")


def render_sweep_figure(spec):
    """Line plot of spec.y versus spec.x, one series per distinct value
    of spec.group. Returns {"out", "series": {name: point count}}."""
    _refuse_collision(spec.out, spec.overwrite)
    header, rows = _read_rows(spec.csv_path, (spec.y, spec.group))
    x_col, rows = _resolve_axes(header, rows, spec)
    series = {}
    for row in rows:
        try:
            point = (float(row[x_col]), float(row[spec.y]))
        except ValueError as exc:
            raise RenderError(
                f"non-numeric cell under {x_col}/{spec.y}: {exc}") from exc
        series.setdefault(row[spec.group], []).append(point)

    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=144)
        fallback = 0
        for name in sorted(series):
            pts = sorted(series[name])
            marker = _marker_for(name, fallback)
            if name not in MARKERS:
                fallback += 1
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker=marker, markersize=6, markerfacecolor="none",
                    label=name)
        if spec.y.startswith("nmse") and not spec.y.endswith("_db"):
            ax.set_yscale("log")
        ax.set_xlabel(spec.xlabel or spec.x)
        ax.set_ylabel(spec.ylabel or spec.y)
        if spec.title:
            ax.set_title(spec.title)
        ax.grid(True, alpha=0.4)
        ax.legend()
        fig.tight_layout()
        _save(fig, spec.out)
    return {"out": spec.out,
            "series": {name: len(pts) for name, pts in series.items()}}


def render_coherence_table(csv_path, out, overwrite=False):
    """Bar chart of per-pilot coherence means from a coherence-report
    CSV, with error bars when the stderr column is present (a warning
    is logged and bars are drawn plain otherwise). Each bar is labeled
    with its mean to four decimals. Returns {"out", "bars",
    "error_bars", "labels"}."""
    _refuse_collision(out, overwrite)
    header, rows = _read_rows(csv_path, ("pilot", "coherence_mean"))
    have_err = "coherence_stderr" in header
    if not have_err:
        log.warning("%s lacks a coherence_stderr column; "
                    "drawing bars without error bars", csv_path)
    names = [row["pilot"] for row in rows]
    try:
        means = [float(row["coherence_mean"]) for row in rows]
        errs = [float(row["coherence_stderr"]) for row in rows] \
            if have_err else None
    except ValueError as exc:
        raise RenderError(f"non-numeric coherence cell: {exc}") from exc
    labels = [f"{mean:.4f}" for mean in means]

    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.2), dpi=144)
        bars = ax.bar(names, means, yerr=errs, capsize=3, color="#7aa4c4")
        for rect, text in zip(bars, labels):
            ax.annotate(text,
                        (rect.get_x() + rect.get_width() / 2,
                         rect.get_height()),
                        ha="center", va="bottom", fontsize=8)
        ax.set_ylabel("mutual coherence")
        ax.margins(y=0.15)
        fig.tight_layout()
        _save(fig, out)
    return {"out": out, "bars": len(names), "error_bars": have_err,
            "labels": labels}

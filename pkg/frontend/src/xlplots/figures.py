"""Batch figure rendering from the simulator's CSV artifacts.

Only the documented CSV schemas are read: the long-format metrics log
(``time_s,station,direction,metric,value``), sweep aggregates
(``param,value,...,throughput_mbps,...``), and the sensor capacity table
(``bandwidth_mhz,mcs_index,scheme,duration_us,max_stations``). Inputs are
validated in full before any output file is created, so a failed render
leaves nothing behind. Each render writes the same figure as both PNG and
SVG next to each other.
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

KINDS = (
    "throughput-vs-time",
    "metric-vs-sir",
    "capacity-vs-mcs",
    "power-and-cti-vs-time",
)

# legend order for the capacity bars, most conservative scheme first
_SCHEME_ORDER = ("normal", "short", "ultra_short")


class RenderError(ValueError):
    """Input problem the caller can fix: bad kind, empty CSV, missing data."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv_paths: tuple[str, ...]
    out_path: str
    labels: tuple[str, ...] = ()
    metrics: tuple[str, ...] = ("sinr_db",)
    bandwidth_mhz: int | None = None
    title: str = ""


def _read_rows(path: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise RenderError(f"{path}: empty file")
            rows = list(reader)
    except OSError as exc:
        raise RenderError(f"{path}: {exc.strerror or exc}") from None
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return rows


def _require_columns(path: str, rows: list[dict], needed: tuple[str, ...]) -> None:
    missing = [c for c in needed if c not in rows[0]]
    if missing:
        raise RenderError(f"{path}: missing columns {', '.join(missing)}")


def _label(spec: FigureSpec, index: int) -> str:
    if spec.labels:
        return spec.labels[index]
    stem = os.path.splitext(os.path.basename(spec.csv_paths[index]))[0]
    return stem


def _metric_series(rows: list[dict], metric: str):
    """Sum a long-format metric over stations, keyed by timestamp."""
    acc: dict[float, float] = defaultdict(float)
    for r in rows:
        if r["metric"] == metric:
            acc[float(r["time_s"])] += float(r["value"])
    times = sorted(acc)
    return times, [acc[t] for t in times]


def _throughput_traces(spec: FigureSpec):
    traces = []
    for i, path in enumerate(spec.csv_paths):
        rows = _read_rows(path)
        _require_columns(path, rows, ("time_s", "station", "metric", "value"))
        xs, ys = _metric_series(rows, "throughput_mbps")
        if not xs:
            raise RenderError(f"{path}: no throughput_mbps rows")
        traces.append((_label(spec, i), xs, ys))
    return traces


def _sweep_traces(spec: FigureSpec):
    traces = []
    for i, path in enumerate(spec.csv_paths):
        rows = _read_rows(path)
        _require_columns(path, rows, ("value", "throughput_mbps"))
        pts = sorted((float(r["value"]), float(r["throughput_mbps"])) for r in rows)
        traces.append((_label(spec, i), [p[0] for p in pts], [p[1] for p in pts]))
    return traces


def _metric_lines(spec: FigureSpec):
    traces = []
    prefix_needed = len(spec.csv_paths) > 1 or bool(spec.labels)
    for i, path in enumerate(spec.csv_paths):
        rows = _read_rows(path)
        _require_columns(path, rows, ("time_s", "station", "metric", "value"))
        for metric in spec.metrics:
            per_station: dict[int, list[tuple[float, float]]] = defaultdict(list)
            for r in rows:
                if r["metric"] == metric:
                    per_station[int(r["station"])].append(
                        (float(r["time_s"]), float(r["value"]))
                    )
            if not per_station:
                raise RenderError(f"{path}: no rows for metric {metric!r}")
            for station in sorted(per_station):
                pts = sorted(per_station[station])
                name = f"station {station} {metric}"
                if prefix_needed:
                    name = f"{_label(spec, i)}: {name}"
                traces.append((name, [p[0] for p in pts], [p[1] for p in pts]))
    return traces


def _capacity_table(spec: FigureSpec):
    if len(spec.csv_paths) != 1:
        raise RenderError("capacity-vs-mcs takes exactly one capacity table")
    path = spec.csv_paths[0]
    rows = _read_rows(path)
    _require_columns(path, rows, ("bandwidth_mhz", "mcs_index", "scheme", "max_stations"))
    bandwidths = sorted({int(r["bandwidth_mhz"]) for r in rows})
    chosen = spec.bandwidth_mhz if spec.bandwidth_mhz is not None else bandwidths[0]
    if len(bandwidths) > 1 and spec.bandwidth_mhz is None:
        raise RenderError(
            f"{path}: several bandwidths {bandwidths}; pick one with --bandwidth"
        )
    if chosen not in bandwidths:
        raise RenderError(f"{path}: no rows for bandwidth {chosen} MHz")
    table: dict[str, dict[int, int]] = defaultdict(dict)
    for r in rows:
        if int(r["bandwidth_mhz"]) == chosen:
            table[r["scheme"]][int(r["mcs_index"])] = int(r["max_stations"])
    schemes = [s for s in _SCHEME_ORDER if s in table]
    schemes += sorted(set(table) - set(schemes))
    indices = sorted({i for per in table.values() for i in per})
    return chosen, schemes, indices, table


def _line_figure(traces, xlabel, ylabel, title, marker=""):
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    for name, xs, ys in traces:
        ax.plot(xs, ys, marker=marker, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def _bar_figure(chosen, schemes, indices, table, title):
    fig, ax = plt.subplots(figsize=(7.2, 4.2))
    width = 0.8 / len(schemes)
    for k, scheme in enumerate(schemes):
        offs = (k - (len(schemes) - 1) / 2) * width
        xs = [i + offs for i in range(len(indices))]
        ys = [table[scheme].get(idx, 0) for idx in indices]
        ax.bar(xs, ys, width=width, label=scheme)
    ax.set_xticks(range(len(indices)), [str(i) for i in indices])
    ax.set_xlabel("MCS index")
    ax.set_ylabel("stations")
    ax.set_title(title or f"{chosen} MHz")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> list[str]:
    """Validate inputs, draw the figure, write PNG and SVG.

    Returns the written paths. Raises RenderError before anything is
    written when the inputs cannot produce the requested figure.
    """
    if spec.kind not in KINDS:
        raise RenderError(f"unknown figure kind {spec.kind!r}; expected one of {KINDS}")
    if not spec.csv_paths:
        raise RenderError("no input CSVs")
    if spec.labels and len(spec.labels) != len(spec.csv_paths):
        raise RenderError(
            f"{len(spec.labels)} labels for {len(spec.csv_paths)} input files"
        )
    if spec.kind == "throughput-vs-time":
        fig = _line_figure(
            _throughput_traces(spec), "time (s)", "throughput (Mbps)", spec.title
        )
    elif spec.kind == "metric-vs-sir":
        fig = _line_figure(
            _sweep_traces(spec), "SIR (dB)", "throughput (Mbps)", spec.title, marker="o"
        )
    elif spec.kind == "power-and-cti-vs-time":
        fig = _line_figure(_metric_lines(spec), "time (s)", "level (dB)", spec.title)
    else:
        fig = _bar_figure(*_capacity_table(spec), spec.title)

    base, ext = os.path.splitext(spec.out_path)
    if ext.lower() not in ("", ".png", ".svg"):
        plt.close(fig)
        raise RenderError(f"output must end in .png or .svg, got {ext!r}")
    written = []
    try:
        for target, kwargs in (
            (base + ".png", {}),
            # a fixed date keeps repeated renders byte-identical
            (base + ".svg", {"metadata": {"Date": None}}),
        ):
            fig.savefig(target, dpi=120, **kwargs)
            written.append(target)
    finally:
        plt.close(fig)
    return written

"""CSV and static SVG writers."""

from __future__ import annotations

import csv
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

RESULT_HEADER = ("config_id", "segment", "nrmse", "wall_time", "seed")
TRACE_HEADER = ("k", "segment", "y", "target")

_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#000000", "#9467bd", "#ff7f0e", "#8c564b")


def fmt(x) -> str:
    """17 significant digits for floats so values survive a CSV round trip."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row.get(h)) for h in header])


def emit_csv(table, path) -> None:
    """Result rows with the fixed header ``RESULT_HEADER``."""
    write_rows(path, RESULT_HEADER, table.rows)


def emit_traces_csv(table, path) -> None:
    rows = []
    for segment, (k, y, target) in table.traces.items():
        rows += [{"k": int(a), "segment": segment, "y": float(b), "target": float(c)}
                 for a, b, c in zip(k, y, target)]
    write_rows(path, TRACE_HEADER, rows)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    return np.arange(math.ceil(lo / step) * step, hi + 1e-9 * step, step)


def emit_svg(series: dict, path, title: str = "", xlabel: str = "", ylabel: str = "",
             width: int = 720, height: int = 360, markers: bool = False) -> None:
    """Line plot of ``{label: (x, y)}`` as a self-contained SVG 1.1 document."""
    ml, mr, mt, mb = 64, 150, 30, 46
    pw, ph = width - ml - mr, height - mt - mb
    clean = {k: (np.asarray(x, float), np.asarray(y, float)) for k, (x, y) in series.items()}
    xs = np.concatenate([x[np.isfinite(y)] for x, y in clean.values()] or [np.zeros(1)])
    ys = np.concatenate([y[np.isfinite(y)] for _, y in clean.values()] or [np.zeros(1)])
    if xs.size == 0:
        xs, ys = np.zeros(1), np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", version="1.1",
                     width=str(width), height=str(height), viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    if title:
        t = ET.SubElement(svg, "text", x=str(ml), y="18", style="font:14px sans-serif")
        t.text = title
    ET.SubElement(svg, "rect", x=str(ml), y=str(mt), width=str(pw), height=str(ph),
                  fill="none", stroke="#444444")
    for v in _ticks(x0, x1):
        ET.SubElement(svg, "line", x1=f"{sx(v):.2f}", x2=f"{sx(v):.2f}", y1=str(mt + ph),
                      y2=str(mt + ph + 4), stroke="#444444")
        t = ET.SubElement(svg, "text", x=f"{sx(v):.2f}", y=str(mt + ph + 16),
                          style="font:10px sans-serif", **{"text-anchor": "middle"})
        t.text = f"{v:g}"
    for v in _ticks(y0, y1):
        ET.SubElement(svg, "line", x1=str(ml - 4), x2=str(ml), y1=f"{sy(v):.2f}",
                      y2=f"{sy(v):.2f}", stroke="#444444")
        t = ET.SubElement(svg, "text", x=str(ml - 6), y=f"{sy(v) + 3:.2f}",
                          style="font:10px sans-serif", **{"text-anchor": "end"})
        t.text = f"{v:.3g}"
    if xlabel:
        t = ET.SubElement(svg, "text", x=str(ml + pw / 2), y=str(height - 8),
                          style="font:12px sans-serif", **{"text-anchor": "middle"})
        t.text = xlabel
    if ylabel:
        t = ET.SubElement(svg, "text", x="14", y=str(mt + ph / 2), style="font:12px sans-serif",
                          transform=f"rotate(-90 14 {mt + ph / 2})", **{"text-anchor": "middle"})
        t.text = ylabel
    for i, (label, (x, y)) in enumerate(clean.items()):
        color = _COLORS[i % len(_COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if pts:
            ET.SubElement(svg, "polyline", points=pts, fill="none", stroke=color,
                          **{"stroke-width": "1.5"})
        if markers:
            for a, b in zip(x[ok], y[ok]):
                ET.SubElement(svg, "circle", cx=f"{sx(a):.2f}", cy=f"{sy(b):.2f}", r="3", fill=color)
        ly = mt + 14 + 16 * i
        ET.SubElement(svg, "line", x1=str(ml + pw + 10), x2=str(ml + pw + 30), y1=str(ly),
                      y2=str(ly), stroke=color, **{"stroke-width": "2"})
        t = ET.SubElement(svg, "text", x=str(ml + pw + 34), y=str(ly + 4), style="font:11px sans-serif")
        t.text = str(label)
    Path(path).write_bytes(ET.tostring(svg, encoding="utf-8", xml_declaration=True))

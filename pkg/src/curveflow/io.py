"""CSV persistence, SVG frame rendering and report serialization."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

SNAPSHOT_HEADER = ("theta", "rho", "p", "x", "y")
METRICS_HEADER = ("t", "f", "energy", "length", "rho_min", "rho_max", "harnack_ratio",
                  "closure_defect", "sup_u", "sup_u_theta")


def fmt(x) -> str:
    """17 significant digits: lossless for float64."""
    return format(float(x), ".17g")


def time_tag(t: float, t_end: float | None = None) -> str:
    """Zero-padded time label such that lexical order matches temporal order."""
    width = len(str(int(t_end))) if t_end is not None and t_end >= 1 else 1
    return f"{t:0{width + 5}.4f}"


def write_snapshot_csv(path, theta, rho, p, points):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_HEADER)
        for row in zip(theta, rho, p, points[:, 0], points[:, 1]):
            w.writerow([fmt(v) for v in row])


def read_snapshot_csv(path) -> dict:
    """Columns of a snapshot CSV as float arrays keyed by header name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader if r]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def read_profile_csv(path, n: int | None = None) -> np.ndarray:
    """The ``rho`` column of a CSV file (a snapshot or a bare profile)."""
    try:
        cols = read_snapshot_csv(path)
    except (OSError, ValueError, StopIteration) as exc:
        raise ConfigError(f"cannot read radius samples from {path}: {exc}") from exc
    if "rho" not in cols:
        raise ConfigError(f"{path} has no 'rho' column")
    rho = cols["rho"]
    if n is not None and rho.shape[0] != n:
        raise ConfigError(f"{path} holds {rho.shape[0]} samples but the grid has n = {n}")
    return rho


def write_metrics_csv(path, diagnostics: Iterable):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRICS_HEADER)
        for d in diagnostics:
            w.writerow([fmt(v) for v in d.as_row()])


def read_metrics_csv(path):
    return read_snapshot_csv(path)


def write_rows_csv(path, header: Sequence[str], rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def render_svg(points, size: int = 400, stroke: str = "#1b3a6b", stroke_width: float = 1.5,
               background: str = "#ffffff", margin: float = 0.05, title: str | None = None) -> str:
    """Standalone SVG of a closed polyline, scaled uniformly to fill the canvas.

    The drawing's bounding box is fitted into ``(1 - margin) * size`` pixels and
    centred; the y axis points up as in the plane.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] != 2:
        raise ValueError("render_svg needs a nonempty (n, 2) point array")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    mid = 0.5 * (lo + hi)
    extent = float((hi - lo).max())
    scale = (1.0 - margin) * size / extent if extent > 0 else 1.0
    c = size / 2.0
    xs = c + (pts[:, 0] - mid[0]) * scale
    ys = c - (pts[:, 1] - mid[1]) * scale
    coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
    ]
    if title:
        lines.append(f"  <title>{_escape(title)}</title>")
    lines += [
        f'  <rect x="0" y="0" width="{size}" height="{size}" fill="{background}"/>',
        f'  <polygon points="{coords}" fill="none" stroke="{stroke}" '
        f'stroke-width="{stroke_width}" stroke-linejoin="round"/>',
        "</svg>",
        "",
    ]
    return "\n".join(lines)


def _escape(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def report_to_text(values: dict) -> str:
    """Flat ``key = value`` block."""
    width = max(len(k) for k in values)
    out = []
    for k, v in values.items():
        if isinstance(v, float):
            v = fmt(v) if math.isfinite(v) else str(v)
        out.append(f"{k:<{width}} = {v}")
    return "\n".join(out) + "\n"


def write_report(directory, values: dict, violations=()):
    directory = Path(directory)
    (directory / "report.txt").write_text(report_to_text(values))
    write_rows_csv(directory / "report.csv", list(values), [list(values.values())])
    if violations:
        write_rows_csv(directory / "violations.csv", ("t", "bound", "margin"),
                       [(t, name, margin) for t, name, margin in violations])

"""CSV rows and a small SVG line-chart writer."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from xml.sax.saxutils import escape

from .stats import normal_cdf

CSV_FIELDS = (
    "experiment", "method", "label", "N", "n", "d", "alpha",
    "reps", "seed", "coverage", "mc_stderr", "median_width",
)


@dataclass(frozen=True)
class CsvRow:
    experiment: str
    method: str
    label: str
    N: int
    n: int
    d: int
    alpha: float
    reps: int
    seed: int
    coverage: float
    mc_stderr: float
    median_width: float | None = None


assert tuple(f.name for f in fields(CsvRow)) == CSV_FIELDS


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, rows) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for row in rows:
            writer.writerow([_fmt(v) for v in astuple(row)])
    return path


def ui_floor(alpha: float) -> float:
    """Coverage floor of universal inference under a correct model."""
    return normal_cdf(math.sqrt(2.0 * math.log(1.0 / alpha)))


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_line_chart(
    series: dict[str, list[tuple[float, float]]],
    x_label: str,
    alphas: list[float],
    title: str = "",
    log_x: bool = False,
    width: int = 640,
    height: int = 420,
) -> str:
    """Coverage-versus-x chart.

    One ``polyline.series`` per entry of ``series``, two ``line.axis``
    elements, and for every alpha a dashed ``line.reference`` at ``1 - alpha``
    plus a dash-dotted one at the universal-inference floor.
    """
    left, right, top, bottom = 64, 170, 36, 52
    xs = [x for pts in series.values() for x, _ in pts]
    refs = [1.0 - a for a in alphas] + [ui_floor(a) for a in alphas]
    ys = [y for pts in series.values() for _, y in pts] + refs
    tx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    x0, x1 = tx(min(xs)), tx(max(xs))
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    y0 = math.floor(min(ys) * 10.0) / 10.0
    y0 = min(y0, 0.9)
    y1 = 1.0
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line class="axis" x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">'
        f'{escape(x_label)}</text>',
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">coverage</text>',
    ]
    for tick in sorted(set(xs)):
        out.append(f'<text x="{px(tick):.2f}" y="{top + ph + 16}" text-anchor="middle" font-size="10">{tick:g}</text>')
    steps = int(round((y1 - y0) / 0.1))
    for k in range(steps + 1):
        v = y0 + k * 0.1
        out.append(f'<text x="{left - 6}" y="{py(v) + 3:.2f}" text-anchor="end" font-size="10">{v:.1f}</text>')
    for a in sorted(set(alphas)):
        for value, dash in ((1.0 - a, "6,4"), (ui_floor(a), "8,3,2,3")):
            out.append(
                f'<line class="reference" x1="{left}" y1="{py(value):.2f}" x2="{left + pw}" y2="{py(value):.2f}" '
                f'stroke="gray" stroke-dasharray="{dash}"/>'
            )
    for i, (name, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in sorted(pts))
        out.append(f'<polyline class="series" fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<text x="{left + pw + 12}" y="{ly}" font-size="11" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

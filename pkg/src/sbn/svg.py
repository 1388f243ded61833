"""Static grouped bar charts written as plain SVG text.

Output depends only on the input matrices, so the same CSVs always give the
same bytes.  Each panel draws one group per row (variant) and one bar per
column (scenario).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

PALETTE = ("#4C72B0", "#DD8452", "#55A868", "#C44E52", "#8172B3", "#937860")
PANEL_W, PANEL_H = 420, 300
MARGIN_L, MARGIN_B, MARGIN_T = 60, 50, 40


class MalformedInput(ValueError):
    pass


@dataclass(frozen=True)
class Matrix:
    rows: tuple
    cols: tuple
    values: tuple  # tuple of row tuples

    @property
    def n_cells(self) -> int:
        return len(self.rows) * len(self.cols)


def parse_matrix(text: str, name: str = "input") -> Matrix:
    records = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(records) < 2:
        raise MalformedInput(f"{name}: need a header and at least one row")
    head = records[0]
    if len(head) < 2:
        raise MalformedInput(f"{name}: header needs at least one value column")
    rows, values = [], []
    for i, rec in enumerate(records[1:], start=2):
        if len(rec) != len(head):
            raise MalformedInput(f"{name}: line {i} has {len(rec)} fields, expected {len(head)}")
        try:
            vals = tuple(float(x) for x in rec[1:])
        except ValueError as exc:
            raise MalformedInput(f"{name}: line {i}: {exc}") from exc
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise MalformedInput(f"{name}: line {i}: values must be finite and >= 0")
        rows.append(rec[0])
        values.append(vals)
    return Matrix(tuple(rows), tuple(head[1:]), tuple(values))


def read_matrix(path) -> Matrix:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_matrix(fh.read(), str(path))
    except OSError as exc:
        raise MalformedInput(f"{path}: {exc.strerror}") from exc


def _num(x: float) -> str:
    return f"{x:.2f}"


def _nice_max(v: float) -> float:
    """Smallest 1/2/2.5/5 x 10^k at or above ``v``; ``v`` itself when that underflows."""
    if v <= 0:
        return 1.0
    exp = 10.0 ** math.floor(math.log10(v))
    for step in (1, 2, 2.5, 5, 10):
        top = step * exp
        if top >= v and top > 0:
            return top
    return v


def _panel(m: Matrix, title: str, unit: str, x0: float) -> list[str]:
    top = _nice_max(max(max(r) for r in m.values))
    plot_w = PANEL_W - MARGIN_L - 10
    plot_h = PANEL_H - MARGIN_T - MARGIN_B
    left, base = x0 + MARGIN_L, MARGIN_T + plot_h
    group_w = plot_w / len(m.rows)
    bar_w = group_w * 0.8 / len(m.cols)
    out = ['<g class="panel">',
           f'<text x="{_num(x0 + PANEL_W / 2)}" y="20" text-anchor="middle" class="title">{escape(title)}</text>',
           f'<line x1="{_num(left)}" y1="{_num(base)}" x2="{_num(left + plot_w)}" y2="{_num(base)}" stroke="#000"/>',
           f'<line x1="{_num(left)}" y1="{MARGIN_T}" x2="{_num(left)}" y2="{_num(base)}" stroke="#000"/>']
    for k in range(5):
        val = top * k / 4
        y = base - plot_h * k / 4
        out.append(f'<text x="{_num(left - 4)}" y="{_num(y + 3)}" text-anchor="end" class="tick">{val:g}</text>')
    out.append(f'<text x="{_num(x0 + 14)}" y="{_num(MARGIN_T + plot_h / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 {_num(x0 + 14)} {_num(MARGIN_T + plot_h / 2)})" class="axis">{escape(unit)}</text>')
    for g, (label, vals) in enumerate(zip(m.rows, m.values)):
        gx = left + g * group_w + group_w * 0.1
        for c, v in enumerate(vals):
            h = plot_h * v / top
            x = gx + c * bar_w
            out.append(f'<rect class="bar" x="{_num(x)}" y="{_num(base - h)}" width="{_num(bar_w)}" '
                       f'height="{_num(h)}" fill="{PALETTE[c % len(PALETTE)]}">'
                       f'<title>{escape(label)} / {escape(m.cols[c])}: {v:g}</title></rect>')
        out.append(f'<text x="{_num(gx + group_w * 0.4)}" y="{_num(base + 16)}" text-anchor="middle" '
                   f'class="group">{escape(label)}</text>')
    for c, col in enumerate(m.cols):
        lx = left + c * 70
        out.append(f'<rect x="{_num(lx)}" y="{_num(base + 28)}" width="10" height="10" '
                   f'fill="{PALETTE[c % len(PALETTE)]}"/>')
        out.append(f'<text x="{_num(lx + 14)}" y="{_num(base + 37)}" class="legend">{escape(col)}</text>')
    out.append("</g>")
    return out


def grouped_bars_svg(panels) -> str:
    """``panels`` is a sequence of (Matrix, title, axis unit)."""
    if not panels:
        raise MalformedInput("nothing to plot")
    width = PANEL_W * len(panels)
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" '
             f'viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="11">',
             '<rect width="100%" height="100%" fill="#fff"/>']
    for i, (m, title, unit) in enumerate(panels):
        lines.extend(_panel(m, title, unit, i * PANEL_W))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"

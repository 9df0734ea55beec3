"""Minimal static SVG emission for sweep reports.

No display server, no plotting dependency: each data series becomes one
<polyline> element; axes, ticks, and labels are plain <line> and <text>
elements. Output is well-formed XML.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 640, 480
MARGIN = dict(left=70, right=20, top=40, bottom=50)

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _transform(vals, log):
    out = []
    for v in vals:
        if log:
            if v is None or v <= 0:
                out.append(None)
                continue
            out.append(math.log10(v))
        else:
            out.append(float(v))
    return out


def _ticks(lo, hi, log):
    if log:
        t0, t1 = math.floor(lo), math.ceil(hi)
        if t1 - t0 > 12:
            step = math.ceil((t1 - t0) / 8)
        else:
            step = 1
        return [(t, f"1e{t}") for t in range(t0, t1 + 1, step)]
    span = hi - lo or 1.0
    step = 10 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    t = math.ceil(lo / step) * step
    out = []
    while t <= hi + 1e-12 * span:
        out.append((t, f"{t:.4g}"))
        t += step
    return out


def svg_plot(series, path, title="", xlabel="", ylabel="",
             logx=False, logy=False):
    """Write a line/marker plot; ``series`` is a list of dicts with keys
    x, y, label (and optional color)."""
    pts = []
    for s in series:
        xs = _transform(s["x"], logx)
        ys = _transform(s["y"], logy)
        pp = [(x, y) for x, y in zip(xs, ys) if x is not None and y is not None]
        pts.append(pp)
    allx = [p[0] for pp in pts for p in pp]
    ally = [p[1] for pp in pts for p in pp]
    if not allx:
        allx, ally = [0.0, 1.0], [0.0, 1.0]
    xlo, xhi = min(allx), max(allx)
    ylo, yhi = min(ally), max(ally)
    if xhi == xlo:
        xhi = xlo + 1
    if yhi == ylo:
        yhi = ylo + 1
    padx, pady = 0.05 * (xhi - xlo), 0.05 * (yhi - ylo)
    xlo, xhi = xlo - padx, xhi + padx
    ylo, yhi = ylo - pady, yhi + pady

    px0, px1 = MARGIN["left"], W - MARGIN["right"]
    py0, py1 = H - MARGIN["bottom"], MARGIN["top"]

    def sx(x):
        return px0 + (x - xlo) / (xhi - xlo) * (px1 - px0)

    def sy(y):
        return py0 + (y - ylo) / (yhi - ylo) * (py1 - py0)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>',
        f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>',
    ]
    for t, lab in _ticks(xlo, xhi, logx):
        if xlo <= t <= xhi:
            x = sx(t)
            parts.append(f'<line x1="{x:.1f}" y1="{py0}" x2="{x:.1f}" '
                         f'y2="{py0 + 5}" stroke="black"/>')
            parts.append(f'<text x="{x:.1f}" y="{py0 + 18}" font-size="11" '
                         f'text-anchor="middle">{escape(lab)}</text>')
    for t, lab in _ticks(ylo, yhi, logy):
        if ylo <= t <= yhi:
            y = sy(t)
            parts.append(f'<line x1="{px0 - 5}" y1="{y:.1f}" x2="{px0}" '
                         f'y2="{y:.1f}" stroke="black"/>')
            parts.append(f'<text x="{px0 - 8}" y="{y + 4:.1f}" font-size="11" '
                         f'text-anchor="end">{escape(lab)}</text>')
    if title:
        parts.append(f'<text x="{W / 2}" y="22" font-size="14" '
                     f'text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        parts.append(f'<text x="{(px0 + px1) / 2}" y="{H - 12}" font-size="12" '
                     f'text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{(py0 + py1) / 2}" font-size="12" '
                     f'text-anchor="middle" transform="rotate(-90 16 '
                     f'{(py0 + py1) / 2})">{escape(ylabel)}</text>')

    for i, (s, pp) in enumerate(zip(series, pts)):
        color = s.get("color", _COLORS[i % len(_COLORS)])
        coord = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pp)
        parts.append(f'<polyline points="{coord}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        if s.get("markers", True):
            for x, y in pp:
                parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
                             f'fill="{color}"/>')
        lab = s.get("label", "")
        if lab:
            ly = MARGIN["top"] + 14 * (i + 1)
            parts.append(f'<line x1="{px1 - 110}" y1="{ly - 4}" x2="{px1 - 90}" '
                         f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{px1 - 85}" y="{ly}" font-size="11">'
                         f'{escape(lab)}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
